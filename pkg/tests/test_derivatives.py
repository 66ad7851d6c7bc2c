import numpy as np
import pytest

from camprecond.camera import PinholeCamera, project
from camprecond.derivatives import (
    FD_STEP,
    analytic_jacobian,
    fd_jacobian,
    fd_steps,
    jacobian,
    loss_gradient,
    reprojection_loss,
)
from camprecond.errors import BehindCamera
from camprecond.parameterizations import ParamKind, all_kinds, apply
from camprecond.sampler import sample_frustum
from conftest import realistic_camera


def identity_cam():
    return PinholeCamera(100.0, 100.0, 0.0, 0.0)


def test_on_axis_point_has_no_focal_sensitivity():
    J = jacobian("se3_focal+log", identity_cam(), np.zeros(7), [[0.0, 0.0, 1.0]]).matrix
    assert np.array_equal(J[:, 6], [0.0, 0.0])


def test_translation_column_matches_oracle(frozen):
    J = analytic_jacobian("se3_focal+log", identity_cam(), np.zeros(7), [[0.1, 0.0, 1.0]])
    assert J[0, 3] == pytest.approx(frozen["fd_du_dvx_fx100_point0.1"], abs=1e-6)
    assert J[0, 3] == pytest.approx(100.0, abs=1e-12)


@pytest.mark.parametrize("kind", all_kinds(), ids=str)
def test_analytic_matches_fd(kind):
    cam = realistic_camera(11, k1=0.03, k2=-0.01)
    pts = sample_frustum(cam, 60, 1.0, 10.0, seed=4)
    delta = 1e-3 * np.random.default_rng(2).normal(size=kind.k)
    Ja = analytic_jacobian(kind, cam, delta, pts)
    Jf = fd_jacobian(kind, cam, delta, pts)
    assert np.all(np.abs(Ja - Jf) <= np.maximum(1e-5 * np.abs(Jf), 1e-6))


def test_fd_error_decays_quadratically():
    cam = realistic_camera(4, k1=0.05)
    pts = sample_frustum(cam, 40, 1.0, 10.0, seed=5)
    kind = ParamKind.parse("scnerf")
    delta = 0.01 * np.ones(kind.k)
    Ja = analytic_jacobian(kind, cam, delta, pts)
    e1 = np.max(np.abs(fd_jacobian(kind, cam, delta, pts, step=1e-3) - Ja))
    e2 = np.max(np.abs(fd_jacobian(kind, cam, delta, pts, step=5e-4) - Ja))
    assert 3.0 < e1 / e2 < 5.0


def test_fd_steps_scale_with_magnitude():
    assert np.array_equal(fd_steps(np.array([0.0, -3.0])), [FD_STEP, 3 * FD_STEP])


def test_jacobian_shape_and_unknown_method(camera):
    pj = jacobian("se3", camera, np.zeros(6), np.zeros((3, 3)))
    assert pj.matrix.shape == (6, 6) and pj.m == 3
    with pytest.raises(ValueError):
        jacobian("se3", camera, np.zeros(6), np.zeros((3, 3)), method="magic")


def test_behind_camera_propagates():
    with pytest.raises(BehindCamera):
        analytic_jacobian("se3", identity_cam(), np.zeros(6), [[0.0, 0.0, -1.0]])


def test_zero_residual_observations_give_zero_gradient(camera):
    pts = sample_frustum(camera, 50, 1.0, 10.0, seed=1).points
    delta = 1e-3 * np.arange(11)
    obs = project(apply("se3_focal_intrinsics", camera, delta), pts)
    g = loss_gradient("se3_focal_intrinsics", camera, delta, pts, obs)
    assert np.max(np.abs(g)) <= 1e-10


def test_gradient_equals_two_over_m_jt_r():
    cam = identity_cam()
    x = np.array([[0.2, -0.1, 1.5]])
    obs = np.array([[13.0, -8.0]])
    delta = np.zeros(7)
    J = analytic_jacobian("se3_focal", cam, delta, x)
    r = (project(cam, x) - obs).ravel()
    assert np.allclose(loss_gradient("se3_focal", cam, delta, x, obs), 2.0 * J.T @ r, atol=1e-12, rtol=0)


def test_gradient_matches_scalar_fd():
    cam = realistic_camera(2, k1=0.02)
    pts = sample_frustum(cam, 100, 2.0, 8.0, seed=9).points
    kind = ParamKind.parse("focal_pose_intrinsics")
    rng = np.random.default_rng(0)
    obs = project(cam, pts) + rng.normal(scale=2.0, size=(100, 2))
    delta = 1e-3 * rng.normal(size=kind.k)
    g = loss_gradient(kind, cam, delta, pts, obs)
    fd = np.empty(kind.k)
    for r in range(kind.k):
        e = np.zeros(kind.k)
        e[r] = 1e-6
        fd[r] = (reprojection_loss(kind, cam, delta + e, pts, obs) - reprojection_loss(kind, cam, delta - e, pts, obs)) / 2e-6
    assert np.all(np.abs(g - fd) <= 1e-6 * np.maximum(np.abs(fd), 1.0) + 1e-6 * np.max(np.abs(fd)))
