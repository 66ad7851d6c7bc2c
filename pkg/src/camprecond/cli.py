"""``camprecond`` command line: precondition | trails | refine | selfcheck.

Exit codes: 0 success, 1 configuration error, 2 numeric error.  Config keys
can be overridden dot-path style, e.g. ``--opt.steps=500``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import config as cfg
from .camera import PinholeCamera
from .errors import CamPrecondError, ConfigError, NumericError
from .geometry import look_at
from .harness import WORLD_UP, make_scene, perturb, refine
from .parameterizations import ParamKind
from .preconditioner import Mode, build, covariance, motion_magnitudes, whitening_error, wrap
from .sampler import sample_frustum
from .svg import heatmap

RESULT_COLUMNS = [
    "experiment_id",
    "kind",
    "flags",
    "mode",
    "seed",
    "step",
    "mse",
    "rot_err_deg_mean",
    "pos_err_mean",
    "focal_err_px_mean",
    "wall_ms",
]
WHITENING_TOL = 1e-4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, default=None, help="JSON config file")
    p.add_argument("--out-dir", type=Path, default=Path("camprecond_out"), help="directory for all outputs")
    p.add_argument("--seed", type=int, default=None, help="override the run seed")
    p.add_argument("--jobs", type=int, default=None, help="parallel experiment arms (default: logical cores)")
    p.add_argument("--strict", action="store_true", help="turn self-check warnings into failures")


def _parser() -> _Parser:
    p = _Parser(prog="camprecond", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_ in [
        ("precondition", "covariance and preconditioner for one camera"),
        ("trails", "per-parameter motion magnitudes, raw and preconditioned"),
        ("refine", "run the refinement experiment grid"),
        ("selfcheck", "fast invariant suite"),
    ]:
        sp = sub.add_parser(name, help=help_)
        _common(sp)
        if name == "refine":
            sp.add_argument("--timing", action="store_true", help="record wall-clock milliseconds in results.csv")
    return p


def _split_overrides(extra: list[str]) -> dict[str, str]:
    out: dict[str, str] = {}
    i = 0
    while i < len(extra):
        arg = extra[i]
        if not arg.startswith("--") or "." not in arg.split("=", 1)[0]:
            raise ConfigError(f"unrecognized argument {arg!r}")
        if "=" in arg:
            key, value = arg[2:].split("=", 1)
        else:
            if i + 1 >= len(extra):
                raise ConfigError(f"override {arg!r} needs a value")
            key, value = arg[2:], extra[i + 1]
            i += 1
        out[key] = value
        i += 1
    return out


def _write(out_dir: Path, name: str, text: str):
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / name).write_text(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _camera(c: cfg.CameraConfig) -> PinholeCamera:
    pose = look_at(np.asarray(c.position, dtype=np.float64), np.asarray(c.look_at, dtype=np.float64), WORLD_UP)
    return PinholeCamera(c.fx, c.fy, c.u0, c.v0, c.k1, c.k2, pose, c.width, c.height)


def cmd_precondition(conf: cfg.RunConfig, out_dir: Path, strict: bool = False) -> int:
    kind = ParamKind.parse(conf.camera.kind)
    cam = _camera(conf.camera)
    p = conf.proxy
    pts = sample_frustum(cam, p.m, p.near, p.far, seed=p.seed)
    cov = covariance(kind, cam, pts)
    pc = build(cov, conf.precond.lam, conf.precond.mu, Mode.FULL)
    doc = pc.to_json()
    labels = kind.layout
    status = 0
    if pc.n_clamped:
        print(f"eigenvalue clamp fired on {pc.n_clamped} eigenvalue(s)")
    if conf.precond.lam == 0 and conf.precond.mu == 0:
        err = whitening_error(wrap(kind, cam, pc), pts)
        print(f"whitening check: max|J~^T J~ - I| = {err:.3e}")
        if strict and err > WHITENING_TOL and pc.n_clamped == 0:
            print(f"whitening check failed (tolerance {WHITENING_TOL:g})", file=sys.stderr)
            status = 2
    _write(out_dir, "sigma.json", _json({k: doc[k] for k in ("kind", "k", "m", "lambda", "mu", "sigma")}))
    _write(out_dir, "p_inv.json", _json(doc))
    _write(out_dir, "covariance.svg", heatmap(cov.sigma, labels, f"covariance {kind.name}"))
    _write(out_dir, "p_inv.svg", heatmap(pc.p_inv, labels, f"preconditioner {kind.name}"))
    print(f"wrote sigma.json, p_inv.json, covariance.svg, p_inv.svg to {out_dir}")
    return status


def cmd_trails(conf: cfg.RunConfig, out_dir: Path) -> int:
    cam = _camera(conf.camera)
    p = conf.proxy
    pts = sample_frustum(cam, p.m, p.near, p.far, seed=p.seed)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["kind", "flags", "index", "param", "raw_rms_px", "preconditioned_rms_px"])
    for name in conf.trails_kinds:
        kind = ParamKind.parse(name)
        raw = motion_magnitudes(kind, cam, pts)
        pc = build(covariance(kind, cam, pts), conf.precond.lam, conf.precond.mu, Mode.FULL)
        pre = motion_magnitudes(wrap(kind, cam, pc), None, pts)
        for r, label in enumerate(kind.layout):
            w.writerow([kind.family.value, kind.flags, r, label, repr(float(raw[r])), repr(float(pre[r]))])
    _write(out_dir, "motion_magnitudes.csv", buf.getvalue())
    print(f"wrote motion_magnitudes.csv to {out_dir}")
    return 0


def _run_arm(args):
    conf, kind_name, mode, seed, timing = args
    sc = conf.scene
    t0 = time.perf_counter()
    scene = make_scene(
        sc.n_cameras, sc.n_points, sc.layout, [sc.seed, seed],
        radius=sc.radius, width=sc.width, height=sc.height, focal=sc.focal, k1=sc.k1, k2=sc.k2,
    )
    init = perturb(scene, replace(conf.perturb, seed=[conf.perturb.seed, seed]))
    res = refine(scene, init, kind_name, mode, conf.opt, seed, proxy=conf.proxy, precond=conf.precond)
    wall = (time.perf_counter() - t0) * 1000.0
    kind = ParamKind.parse(kind_name)
    rows = [
        [
            conf.experiment.id, kind.family.value, kind.flags, mode, seed, p.step, repr(p.mse),
            repr(p.rot_err_deg_mean), repr(p.pos_err_mean), repr(p.focal_err_px_mean),
            f"{wall:.1f}" if timing else "",
        ]
        for p in res.trajectory
    ]
    fm = res.final_metrics
    summary = {
        "experiment_id": conf.experiment.id,
        "kind": kind.name,
        "mode": mode,
        "seed": seed,
        "steps": conf.opt.steps,
        "final_step": res.final.step,
        "final": {"mse": res.final.mse, **fm.means()},
        "per_camera": {
            "rotation_err_deg": fm.rotation_err.tolist(),
            "position_err": fm.position_err.tolist(),
            "focal_err_px": fm.focal_err.tolist(),
        },
        "clamp_counts": res.clamp_counts,
        "failed_step": res.failed_step,
        "error": res.error,
    }
    return rows, summary


def cmd_refine(conf: cfg.RunConfig, out_dir: Path, jobs: int, timing: bool = False, strict: bool = False) -> int:
    ex = conf.experiment
    arms = [(conf, k, m, s, timing) for k in ex.kinds for m in ex.modes for s in ex.seeds]
    if jobs > 1 and len(arms) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(arms))) as pool:
            outputs = list(pool.map(_run_arm, arms))
    else:
        outputs = [_run_arm(a) for a in arms]

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULT_COLUMNS)
    for rows, _ in outputs:
        w.writerows(rows)
    _write(out_dir, "results.csv", buf.getvalue())
    failed = 0
    for (_, k, m, s, _), (_, summary) in zip(arms, outputs):
        arm_dir = out_dir / "arms" / f"{ex.id}__{ParamKind.parse(k).name}__{m}__seed{s}"
        _write(arm_dir, "summary.json", _json(summary))
        failed += summary["failed_step"] is not None

    table: dict[tuple[str, str], list[float]] = {}
    for (_, k, m, _, _), (_, summary) in zip(arms, outputs):
        table.setdefault((m, ParamKind.parse(k).name), []).append(summary["final"]["rot_err_deg_mean"])
    ranked = sorted(table.items(), key=lambda kv: (float(np.mean(kv[1])), kv[0]))
    print(f"{'rank':>4}  {'mode':<5} {'kind':<28} {'rot_err_deg':>12} {'seeds':>5}")
    for i, ((m, k), vals) in enumerate(ranked, 1):
        print(f"{i:>4}  {m:<5} {k:<28} {float(np.mean(vals)):>12.4g} {len(vals):>5}")
    if failed:
        print(f"{failed} arm(s) aborted on a numeric error; see summary.json files", file=sys.stderr)
        if strict:
            return 2
    return 0


def selfcheck(strict: bool = False) -> list[tuple[str, bool, str]]:
    """Fast invariant checks; returns ``(name, passed, detail)`` tuples."""
    from .camera import project, undistort
    from .derivatives import analytic_jacobian, fd_jacobian
    from .geometry import exp_se3, exp_so3, log_se3, log_so3, rot6d_to_rotation
    from .parameterizations import Family, all_kinds, apply

    rng = np.random.default_rng(0)
    results = []

    worst = 0.0
    for _ in range(200):
        w = rng.normal(size=3)
        w *= rng.uniform(0.0, math.pi - 1e-2) / np.linalg.norm(w)
        worst = max(worst, float(np.max(np.abs(log_so3(exp_so3(w)) - w))))
        S = np.concatenate([w, rng.normal(size=3)])
        worst = max(worst, float(np.max(np.abs(log_se3(exp_se3(S)) - S))))
    results.append(("exp/log round trip", worst <= 1e-9, f"max err {worst:.2e}"))

    worst = 0.0
    for _ in range(100):
        R = rot6d_to_rotation(rng.normal(size=6))
        worst = max(worst, float(np.max(np.abs(R.T @ R - np.eye(3)))), abs(np.linalg.det(R) - 1.0))
    results.append(("rot6d orthonormality", worst <= 1e-12, f"max err {worst:.2e}"))

    cam = PinholeCamera(600.0, 600.0, 320.0, 240.0, -0.1, 0.05, look_at(np.array([0.3, -0.2, -4.0]), np.zeros(3), WORLD_UP))
    pts = sample_frustum(cam, 200, 1.0, 10.0, seed=1).points
    pix = project(cam, pts)
    X = pts @ cam.pose.rotation.T + cam.pose.translation
    n = X[:, :2] / X[:, 2:]
    nd = undistort(cam, (pix - [cam.u0, cam.v0]) / [cam.fx, cam.fy])
    err = float(np.max(np.abs(nd - n)) * cam.fx)
    results.append(("distortion round trip", err <= 1e-8, f"max err {err:.2e} px"))

    bad = [k.name for k in all_kinds() if apply(k, cam, np.zeros(k.k)).state().tolist() != cam.state().tolist()]
    results.append(("zero-residual identity", not bad, ", ".join(bad) or "all kinds"))

    kind = ParamKind(Family.SE3_FOCAL_INTRINSICS)
    proxy = sample_frustum(cam, 1000, 0.2, 100.0, seed=2)
    pc = build(covariance(kind, cam, proxy), 0.0, 0.0)
    werr = whitening_error(wrap(kind, cam, pc), proxy)
    ok = werr <= WHITENING_TOL or (pc.n_clamped > 0 and not strict)
    results.append(("whitening identity", ok, f"max err {werr:.2e}, clamped {pc.n_clamped}"))

    worst = 0.0
    for fam in Family:
        kind = ParamKind(fam)
        delta = 1e-3 * rng.normal(size=kind.k)
        Ja = analytic_jacobian(kind, cam, delta, pts[:50])
        Jf = fd_jacobian(kind, cam, delta, pts[:50])
        worst = max(worst, float(np.max(np.abs(Ja - Jf) / np.maximum(1.0, np.abs(Jf)))))
    results.append(("FD Jacobian agreement", worst <= 1e-5, f"max scaled err {worst:.2e}"))
    return results


def cmd_selfcheck(strict: bool = False) -> int:
    t0 = time.perf_counter()
    results = selfcheck(strict)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    print(f"selfcheck finished in {time.perf_counter() - t0:.1f} s")
    return 0 if all(ok for _, ok, _ in results) else 2


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        args, extra = _parser().parse_known_args(argv)
        overrides = _split_overrides(extra)
        if args.seed is not None:
            if args.command == "refine":
                overrides["experiment.seeds"] = json.dumps([args.seed])
            else:
                overrides["proxy.seed"] = str(args.seed)
        if args.jobs is not None and args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        conf = cfg.load(args.config, overrides)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    jobs = args.jobs or os.cpu_count() or 1
    try:
        if args.command == "precondition":
            return cmd_precondition(conf, args.out_dir, args.strict)
        if args.command == "trails":
            return cmd_trails(conf, args.out_dir)
        if args.command == "refine":
            return cmd_refine(conf, args.out_dir, jobs, args.timing, args.strict)
        return cmd_selfcheck(args.strict)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except (NumericError, CamPrecondError, np.linalg.LinAlgError) as e:
        print(f"numeric error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
