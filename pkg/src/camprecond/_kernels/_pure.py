"""Numpy reference kernels.

Points are grouped by camera: camera ``i`` owns rows
``offsets[i]:offsets[i + 1]`` of ``points``.  Each kernel returns the index of
the first point with camera depth ``<= z_min`` (``-1`` when all are valid)
instead of raising, matching the compiled backend.
"""

import numpy as np

from ..camera import FX, FY, K1, K2, U0, V0


def _first_bad(Z, z_min, start):
    bad = ~(Z > z_min)
    if np.any(bad):
        return start + int(np.argmax(bad))
    return -1


def _camera_frame(s, x):
    px, py, pz = x[:, 0], x[:, 1], x[:, 2]
    X = s[0] * px + s[1] * py + s[2] * pz + s[9]
    Y = s[3] * px + s[4] * py + s[5] * pz + s[10]
    Z = s[6] * px + s[7] * py + s[8] * pz + s[11]
    return X, Y, Z


def project(states, points, offsets, z_min):
    M = points.shape[0]
    pix = np.empty((M, 2))
    for i in range(states.shape[0]):
        a, b = offsets[i], offsets[i + 1]
        if a == b:
            continue
        s = states[i]
        X, Y, Z = _camera_frame(s, points[a:b])
        bad = _first_bad(Z, z_min, a)
        if bad >= 0:
            return pix, bad
        nx = X / Z
        ny = Y / Z
        r2 = nx * nx + ny * ny
        D = 1.0 + s[K1] * r2 + s[K2] * (r2 * r2)
        pix[a:b, 0] = s[FX] * (nx * D) + s[U0]
        pix[a:b, 1] = s[FY] * (ny * D) + s[V0]
    return pix, -1


def _point_jacobian(s, ds, x):
    """Pixels ``(m, 2)`` and Jacobian rows ``(m, 2, k)`` for one camera."""
    X, Y, Z = _camera_frame(s, x)
    iz = 1.0 / Z
    nx = X / Z
    ny = Y / Z
    r2 = nx * nx + ny * ny
    D = 1.0 + s[K1] * r2 + s[K2] * (r2 * r2)
    u = s[FX] * (nx * D) + s[U0]
    v = s[FY] * (ny * D) + s[V0]

    g = 2.0 * (s[K1] + 2.0 * s[K2] * r2)
    dxdnx = D + nx * g * nx
    dxdny = nx * g * ny
    dydnx = ny * g * nx
    dydny = D + ny * g * ny
    du_dX = s[FX] * dxdnx * iz
    du_dY = s[FX] * dxdny * iz
    du_dZ = -s[FX] * (dxdnx * nx + dxdny * ny) * iz
    dv_dX = s[FY] * dydnx * iz
    dv_dY = s[FY] * dydny * iz
    dv_dZ = -s[FY] * (dydnx * nx + dydny * ny) * iz

    # d(x_c)/d(delta): rows of dR contracted with the point plus dt.
    px, py, pz = x[:, 0:1], x[:, 1:2], x[:, 2:3]
    dX = px * ds[0] + py * ds[1] + pz * ds[2] + ds[9]
    dY = px * ds[3] + py * ds[4] + pz * ds[5] + ds[10]
    dZ = px * ds[6] + py * ds[7] + pz * ds[8] + ds[11]

    r4 = r2 * r2
    Ju = (
        du_dX[:, None] * dX
        + du_dY[:, None] * dY
        + du_dZ[:, None] * dZ
        + (nx * D)[:, None] * ds[FX]
        + ds[U0]
        + (s[FX] * nx * r2)[:, None] * ds[K1]
        + (s[FX] * nx * r4)[:, None] * ds[K2]
    )
    Jv = (
        dv_dX[:, None] * dX
        + dv_dY[:, None] * dY
        + dv_dZ[:, None] * dZ
        + (ny * D)[:, None] * ds[FY]
        + ds[V0]
        + (s[FY] * ny * r2)[:, None] * ds[K1]
        + (s[FY] * ny * r4)[:, None] * ds[K2]
    )
    return u, v, Ju, Jv


def project_jacobian(states, dstates, points, offsets, z_min):
    M = points.shape[0]
    k = dstates.shape[2]
    pix = np.empty((M, 2))
    J = np.empty((M, 2, k))
    for i in range(states.shape[0]):
        a, b = offsets[i], offsets[i + 1]
        if a == b:
            continue
        x = points[a:b]
        Z = _camera_frame(states[i], x)[2]
        bad = _first_bad(Z, z_min, a)
        if bad >= 0:
            return pix, J, bad
        u, v, Ju, Jv = _point_jacobian(states[i], dstates[i], x)
        pix[a:b, 0] = u
        pix[a:b, 1] = v
        J[a:b, 0] = Ju
        J[a:b, 1] = Jv
    return pix, J, -1


def residual_gradient(states, dstates, points, offsets, observed, z_min):
    n = states.shape[0]
    k = dstates.shape[2]
    sse = np.zeros(n)
    grad = np.zeros((n, k))
    for i in range(n):
        a, b = offsets[i], offsets[i + 1]
        if a == b:
            continue
        x = points[a:b]
        Z = _camera_frame(states[i], x)[2]
        bad = _first_bad(Z, z_min, a)
        if bad >= 0:
            return sse, grad, bad
        u, v, Ju, Jv = _point_jacobian(states[i], dstates[i], x)
        ru = u - observed[a:b, 0]
        rv = v - observed[a:b, 1]
        # cumsum accumulates left to right like the compiled loop, so both
        # backends agree bitwise (np.sum and matmul reorder the additions).
        sse[i] = np.cumsum(ru * ru + rv * rv)[-1]
        grad[i] = np.cumsum(ru[:, None] * Ju + rv[:, None] * Jv, axis=0)[-1]
    return sse, grad, -1
