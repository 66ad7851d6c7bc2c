import math

import numpy as np
import pytest

from camprecond.errors import NonFiniteGradient
from camprecond.optimizer import AdamState, Schedule, SharedWeights, adam_step, lr_at, shared_intrinsics_loss


def test_warmup_start():
    s = Schedule(1e-3, 1e-4, 2500, 1e-8)
    assert lr_at(s, 0, 25000) == pytest.approx(1e-3 * 1e-8, rel=1e-12)


def test_decay_end():
    assert lr_at(Schedule(1e-3, 1e-4, 2500, 1e-8), 25000, 25000) == pytest.approx(1e-4, rel=1e-12)


def test_log_midpoint(frozen):
    assert lr_at(Schedule(1e-3, 1e-4, 0), 50, 100) == pytest.approx(frozen["lr_midpoint_no_warmup"], rel=1e-12)


def test_lr_monotone_after_warmup():
    s = Schedule(1.0, 0.1, 100)
    lrs = [lr_at(s, t, 2000) for t in range(100, 2001)]
    assert all(a >= b for a, b in zip(lrs, lrs[1:]))


def test_lr_bad_step():
    with pytest.raises(ValueError):
        lr_at(Schedule(), 11, 10)
    with pytest.raises(ValueError):
        Schedule(0.0, 1.0)


def test_zero_gradient_keeps_params():
    st = AdamState.zeros(3)
    p = np.array([1.0, -2.0, 3.0])
    assert np.array_equal(adam_step(p, np.zeros(3), st, 0.1), p)


def test_constant_gradient_unit_steps():
    st = AdamState.zeros(1)
    p = np.zeros(1)
    for _ in range(5000):
        new = adam_step(p, np.array([0.7]), st, 0.01)
        step, p = float(p[0] - new[0]), new
    assert step == pytest.approx(0.01, rel=1e-6)


def test_three_step_trace(frozen):
    st = AdamState.zeros(1)
    x = np.zeros(1)
    trace = []
    for _ in range(3):
        x = adam_step(x, 2.0 * (x - 3.0), st, 0.1)
        trace.append(float(x[0]))
    assert np.max(np.abs(np.array(trace) - frozen["adam_quadratic_three_steps"])) <= 1e-12


def test_nonfinite_gradient():
    with pytest.raises(NonFiniteGradient):
        adam_step(np.zeros(2), np.array([1.0, math.nan]), AdamState.zeros(2), 0.1)


def intrinsics(n, rng):
    return np.column_stack([
        rng.normal(600, 5, n), rng.normal(600, 5, n), rng.normal(320, 2, n),
        rng.normal(240, 2, n), rng.normal(0, 0.01, n), rng.normal(0, 0.01, n),
    ])


def test_identical_intrinsics_zero_loss():
    theta = np.tile([600.0, 601.0, 320.0, 240.0, 0.01, -0.02], (5, 1))
    loss, grad = shared_intrinsics_loss(theta)
    assert loss == 0.0 and np.array_equal(grad, np.zeros_like(theta))


def test_two_camera_focal_example(frozen):
    theta = np.array([[100.0, 100.0, 0, 0, 0, 0], [102.0, 102.0, 0, 0, 0, 0]])
    loss, _ = shared_intrinsics_loss(theta, SharedWeights(0.1, 0.01, 0.01))
    assert loss == pytest.approx(frozen["shared_loss_focal_100_102_w0.1"], abs=1e-15)


def test_zero_weights():
    theta = intrinsics(4, np.random.default_rng(0))
    loss, grad = shared_intrinsics_loss(theta, SharedWeights(0.0, 0.0, 0.0))
    assert loss == 0.0 and not grad.any()


def test_gradient_matches_fd():
    theta = intrinsics(6, np.random.default_rng(1))
    _, grad = shared_intrinsics_loss(theta)
    for i in range(6):
        for j in range(6):
            h = 1e-6 * max(1.0, abs(theta[i, j]))
            tp, tm = theta.copy(), theta.copy()
            tp[i, j] += h
            tm[i, j] -= h
            fd = (shared_intrinsics_loss(tp)[0] - shared_intrinsics_loss(tm)[0]) / (2 * h)
            assert abs(fd - grad[i, j]) <= 1e-8 * max(1.0, abs(fd))


def test_order_and_shift_invariance():
    rng = np.random.default_rng(2)
    theta = intrinsics(5, rng)
    loss, _ = shared_intrinsics_loss(theta)
    assert shared_intrinsics_loss(theta[::-1])[0] == pytest.approx(loss, rel=1e-12)
    assert shared_intrinsics_loss(theta + 3.0)[0] == pytest.approx(loss, rel=1e-9)


def test_needs_two_cameras():
    with pytest.raises(ValueError):
        shared_intrinsics_loss(np.zeros((1, 6)))
