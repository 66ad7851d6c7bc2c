"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

import math
import time
from dataclasses import replace

import numpy as np

from camprecond import cli
from camprecond.camera import PinholeCamera, project, undistort
from camprecond.config import OptConfig, RunConfig
from camprecond.derivatives import analytic_jacobian, fd_jacobian
from camprecond.geometry import exp_se3, exp_so3, log_se3, log_so3, rot6d_to_rotation
from camprecond.harness import make_scene, refine
from camprecond.optimizer import SharedWeights, shared_intrinsics_loss
from camprecond.parameterizations import Family, ParamKind, all_kinds, apply
from camprecond.preconditioner import build, covariance, motion_magnitudes, whitening_error, wrap
from camprecond.sampler import sample_frustum
from conftest import realistic_camera

DESK_SEEDS = range(10)


def random_camera(rng) -> PinholeCamera:
    cam = realistic_camera(int(rng.integers(1 << 30)))
    return replace(cam, k1=float(rng.uniform(-0.1, 0.1)), k2=float(rng.uniform(-0.05, 0.05)))


def test_criterion_01_whitening_identity(acceptance):
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    cams = [random_camera(rng) for _ in range(20)]
    worst, clamped = 0.0, {}
    for fam in Family:
        kind = ParamKind(fam)
        for i, cam in enumerate(cams):
            pts = sample_frustum(cam, 1000, 0.2, 100.0, seed=[101, i])
            pc = build(covariance(kind, cam, pts), 0.0, 0.0)
            if pc.n_clamped:
                clamped[kind.name] = clamped.get(kind.name, 0) + 1
                continue
            worst = max(worst, whitening_error(wrap(kind, cam, pc), pts))
    dt = time.perf_counter() - t0
    events = ", ".join(f"{k} {v}/20" for k, v in clamped.items()) or "none"
    acceptance(1, worst <= 1e-4 and dt < 10.0,
               f"max|J~^T J~ - I| = {worst:.2e} over 7 kinds x 20 cameras; clamp events: {events}; {dt:.1f} s")


def test_criterion_02_dampened_inverse(acceptance):
    rng = np.random.default_rng(102)
    pairs = [(0.1, 1e-8), (1e-3, 0.0), (1e-2, 1e-8), (0.5, 0.5), (1.0, 0.0), (1e-3, 10.0)]
    worst = 0.0
    for fam in Family:
        for _ in range(3):
            cam = random_camera(rng)
            pts = sample_frustum(cam, 1000, 0.2, 100.0, seed=rng.integers(1 << 30))
            S = covariance(ParamKind(fam), cam, pts).sigma
            for lam, mu in pairs:
                P = build(S, lam, mu).p_inv
                Sd = S + lam * np.diag(np.diag(S)) + mu * np.eye(len(S))
                worst = max(worst, float(np.max(np.abs(P @ Sd @ P - np.eye(len(S))))))
    acceptance(2, worst <= 1e-8, f"max|P Sd P - I| = {worst:.2e} at 6 (lambda, mu) pairs x 7 kinds x 3 cameras")


def test_criterion_03_jacobian_correctness(acceptance):
    t0 = time.perf_counter()
    rng = np.random.default_rng(103)
    worst_excess, ratios = 0.0, []
    for kind in all_kinds():
        for _ in range(50):
            cam = random_camera(rng)
            pts = sample_frustum(cam, 20, 1.0, 20.0, seed=rng.integers(1 << 30))
            delta = 1e-2 * rng.normal(size=kind.k)
            Ja = analytic_jacobian(kind, cam, delta, pts)
            Jf = fd_jacobian(kind, cam, delta, pts)
            tol = np.maximum(1e-5 * np.abs(Jf), 1e-6)
            worst_excess = max(worst_excess, float(np.max(np.abs(Ja - Jf) / tol)))
            e1 = np.max(np.abs(fd_jacobian(kind, cam, delta, pts, step=1e-2) - Ja))
            e2 = np.max(np.abs(fd_jacobian(kind, cam, delta, pts, step=5e-3) - Ja))
            ratios.append(e1 / e2)
    ratios = np.array(ratios)
    dt = time.perf_counter() - t0
    ok = worst_excess <= 1.0 and np.all((ratios > 3.0) & (ratios < 5.0)) and dt < 30.0
    acceptance(3, ok, f"{len(ratios)} configs, worst error/tolerance {worst_excess:.2f}, "
                      f"FD error ratio h/(h/2) in [{ratios.min():.2f}, {ratios.max():.2f}], {dt:.1f} s")


def test_criterion_04_motion_equalization(acceptance):
    cam = realistic_camera(104, k1=-0.05, k2=0.02)
    pts = sample_frustum(cam, 1000, 0.2, 100.0, seed=104)
    spread, skipped = 0.0, []
    for fam in Family:
        kind = ParamKind(fam)
        pc = build(covariance(kind, cam, pts), 0.0, 0.0)
        if pc.n_clamped:
            # Same rule as the whitening check: a clamped direction cannot be whitened.
            skipped.append(f"{kind.name} ({pc.n_clamped} clamped)")
            continue
        mags = motion_magnitudes(wrap(kind, cam, pc), None, pts)
        spread = max(spread, float((mags.max() - mags.min()) / mags.mean()))
    depth1 = PinholeCamera(1000.0, 1000.0, 250.0, 250.0, width=500, height=500)
    rng = np.random.default_rng(4)
    scene = np.column_stack([rng.uniform(-0.25, 0.25, (500, 2)), np.ones(500)])
    raw = motion_magnitudes("se3_focal", depth1, scene)
    ratio = float(np.min(raw[3:6]) / raw[6])
    acceptance(4, spread <= 1e-3 and ratio > 10.0,
               f"preconditioned relative spread {spread:.2e} (skipped: {', '.join(skipped) or 'none'}); "
               f"raw translation/focal ratio {ratio:.3g}")


def _desk_arms():
    conf = RunConfig()
    kind = "focal_pose_intrinsics"
    out = {}
    for s in DESK_SEEDS:
        for mode in ("none", "diag", "full"):
            _, summary = cli._run_arm((conf, kind, mode, s, False))
            out[mode, s] = summary
    return out


_ARMS = {}


def desk_arms():
    if not _ARMS:
        t0 = time.perf_counter()
        _ARMS.update(_desk_arms())
        _ARMS["seconds"] = time.perf_counter() - t0
    return _ARMS


def test_criterion_05_full_beats_none(acceptance):
    arms = desk_arms()
    wins = 0
    for s in DESK_SEEDS:
        f, n = arms["full", s]["final"], arms["none", s]["final"]
        wins += f["rot_err_deg_mean"] < n["rot_err_deg_mean"] and f["mse"] < n["mse"]
    aborted = sum(arms[m, s]["failed_step"] is not None for m in ("none", "full") for s in DESK_SEEDS)
    dt = arms["seconds"]
    acceptance(5, wins >= 8 and dt < 300.0,
               f"full beats none on rotation and MSE in {wins}/10 seeds, {aborted} aborted arm(s), "
               f"{dt:.0f} s for 30 arms")


def test_criterion_06_full_beats_diag(acceptance):
    arms = desk_arms()
    wins = sum(arms["full", s]["final"]["mse"] <= arms["diag", s]["final"]["mse"] for s in DESK_SEEDS)
    med = {m: float(np.median([arms[m, s]["final"]["mse"] for s in DESK_SEEDS])) for m in ("none", "diag", "full")}
    acceptance(6, wins >= 7, f"full MSE <= diag MSE in {wins}/10 seeds "
                             f"(median MSE none {med['none']:.2e}, diag {med['diag']:.2e}, full {med['full']:.2e})")


def test_criterion_07_stationarity(acceptance):
    scene = make_scene(20, 500, seed=[0, 7])
    opt = OptConfig(steps=2000)
    worst_mse, worst_metric = 0.0, 0.0
    for kind in ("focal_pose_intrinsics", "se3_focal_intrinsics", "scnerf"):
        for mode in ("none", "diag", "full"):
            res = refine(scene, scene.gt_cameras, kind, mode, opt, seed=7)
            assert res.error is None, res.error
            worst_mse = max(worst_mse, max(p.mse for p in res.trajectory))
            fm = res.final_metrics
            worst_metric = max(worst_metric, float(max(fm.rotation_err.max(), fm.position_err.max(),
                                                       fm.focal_err.max())))
    acceptance(7, worst_mse <= 1e-16 and worst_metric <= 1e-8,
               f"3 kinds x 3 modes, 2000 steps: max MSE {worst_mse:.1e}, max camera metric {worst_metric:.1e}")


def test_criterion_08_geometry_camera_suite(acceptance):
    rng = np.random.default_rng(108)
    rt = 0.0
    for _ in range(500):
        w = rng.normal(size=3)
        w *= math.exp(rng.uniform(math.log(1e-8), math.log(math.pi - 1e-2))) / np.linalg.norm(w)
        rt = max(rt, float(np.max(np.abs(log_so3(exp_so3(w)) - w))))
        S = np.concatenate([w, rng.normal(size=3)])
        rt = max(rt, float(np.max(np.abs(log_se3(exp_se3(S)) - S))))
    r6 = 0.0
    for _ in range(500):
        a = rng.normal(size=6)
        R = rot6d_to_rotation(a)
        r6 = max(r6, float(np.max(np.abs(R.T @ R - np.eye(3)))), abs(float(np.linalg.det(R)) - 1.0),
                 float(np.max(np.abs(rot6d_to_rotation(rng.uniform(0.1, 10.0) * a) - R))))
    dist = 0.0
    for _ in range(20):
        cam = random_camera(rng)
        pts = sample_frustum(cam, 500, 0.5, 50.0, seed=rng.integers(1 << 30)).points
        X = pts @ cam.pose.rotation.T + cam.pose.translation
        nd = undistort(cam, (project(cam, pts) - [cam.u0, cam.v0]) / [cam.fx, cam.fy])
        dist = max(dist, float(np.max(np.abs(nd - X[:, :2] / X[:, 2:]) * [cam.fx, cam.fy])))
    cam = random_camera(rng)
    zero = max(float(np.max(np.abs(apply(k, cam, np.zeros(k.k)).state() - cam.state()))) for k in all_kinds())
    ok = rt <= 1e-9 and r6 <= 1e-12 and dist <= 1e-8 and zero <= 1e-12
    acceptance(8, ok, f"exp/log {rt:.1e}, rot6d {r6:.1e}, distortion {dist:.1e} px, "
                      f"zero-residual {zero:.1e} over {len(all_kinds())} kinds")


def test_criterion_09_shared_intrinsics(acceptance):
    rng = np.random.default_rng(109)
    w = SharedWeights(1e-1, 1e-2, 1e-2)
    worst = 0.0
    positive = True
    for _ in range(20):
        n = int(rng.integers(2, 8))
        theta = rng.normal(size=(n, 6)) * [5, 5, 2, 2, 0.01, 0.01] + [600, 600, 320, 240, 0, 0]
        loss, grad = shared_intrinsics_loss(theta, w)
        positive &= loss > 0
        for i in range(n):
            for j in range(6):
                h = 1e-6 * max(1.0, abs(theta[i, j]))
                tp, tm = theta.copy(), theta.copy()
                tp[i, j] += h
                tm[i, j] -= h
                fd = (shared_intrinsics_loss(tp, w)[0] - shared_intrinsics_loss(tm, w)[0]) / (2 * h)
                worst = max(worst, abs(fd - grad[i, j]) / max(1.0, abs(fd)))
    same = np.tile([600.0, 600.0, 320.0, 240.0, 0.01, -0.02], (5, 1))
    zero_loss, zero_grad = shared_intrinsics_loss(same, w)
    ok = worst <= 1e-8 and positive and zero_loss == 0.0 and not zero_grad.any()
    acceptance(9, ok, f"gradient vs FD {worst:.1e}; loss zero for agreeing intrinsics, positive on all "
                      f"20 spread configurations: {bool(positive)}")


def test_criterion_10_determinism(acceptance, tmp_path):
    argv = ["--opt.steps=100", "--opt.log_every=25", "--experiment.seeds=[0,1,2]",
            "--experiment.kinds=[\"focal_pose_intrinsics\",\"scnerf\"]"]
    outs = []
    for run, jobs in (("a", "1"), ("b", "1"), ("c", "3")):
        assert cli.main(["refine", "--out-dir", str(tmp_path / run), "--jobs", jobs, *argv]) == 0
        outs.append((tmp_path / run / "results.csv").read_bytes())
    same = outs[0] == outs[1] == outs[2]
    acceptance(10, same, f"results.csv byte-identical across two --jobs 1 runs and --jobs 3 ({len(outs[0])} bytes)")
