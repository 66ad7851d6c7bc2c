# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled projection kernels; same contracts as ``_pure``.

Pixel arithmetic follows the exact operation order of ``camera.project`` so
both backends return bitwise identical pixels.  All arrays must be
C-contiguous float64 (offsets int64); the dispatcher in ``__init__`` ensures it.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()

cdef enum:
    FX = 12
    FY = 13
    U0 = 14
    V0 = 15
    K1 = 16
    K2 = 17
    NS = 18


cdef inline double _depth(const double* s, const double* x) noexcept nogil:
    return s[6] * x[0] + s[7] * x[1] + s[8] * x[2] + s[11]


cdef inline void _pixel(const double* s, const double* x, double* u, double* v) noexcept nogil:
    cdef double X = s[0] * x[0] + s[1] * x[1] + s[2] * x[2] + s[9]
    cdef double Y = s[3] * x[0] + s[4] * x[1] + s[5] * x[2] + s[10]
    cdef double Z = s[6] * x[0] + s[7] * x[1] + s[8] * x[2] + s[11]
    cdef double nx = X / Z
    cdef double ny = Y / Z
    cdef double r2 = nx * nx + ny * ny
    cdef double D = 1.0 + s[K1] * r2 + s[K2] * (r2 * r2)
    u[0] = s[FX] * (nx * D) + s[U0]
    v[0] = s[FY] * (ny * D) + s[V0]


cdef inline void _pixel_rows(const double* s, const double* ds, int k, const double* x,
                             double* u, double* v, double* Ju, double* Jv) noexcept nogil:
    # ds is the (18, k) row-major derivative of the camera state.
    cdef double px = x[0], py = x[1], pz = x[2]
    cdef double X = s[0] * px + s[1] * py + s[2] * pz + s[9]
    cdef double Y = s[3] * px + s[4] * py + s[5] * pz + s[10]
    cdef double Z = s[6] * px + s[7] * py + s[8] * pz + s[11]
    cdef double iz = 1.0 / Z
    cdef double nx = X / Z
    cdef double ny = Y / Z
    cdef double r2 = nx * nx + ny * ny
    cdef double D = 1.0 + s[K1] * r2 + s[K2] * (r2 * r2)
    u[0] = s[FX] * (nx * D) + s[U0]
    v[0] = s[FY] * (ny * D) + s[V0]
    cdef double g = 2.0 * (s[K1] + 2.0 * s[K2] * r2)
    cdef double dxdnx = D + nx * g * nx
    cdef double dxdny = nx * g * ny
    cdef double dydnx = ny * g * nx
    cdef double dydny = D + ny * g * ny
    cdef double du_dX = s[FX] * dxdnx * iz
    cdef double du_dY = s[FX] * dxdny * iz
    cdef double du_dZ = -s[FX] * (dxdnx * nx + dxdny * ny) * iz
    cdef double dv_dX = s[FY] * dydnx * iz
    cdef double dv_dY = s[FY] * dydny * iz
    cdef double dv_dZ = -s[FY] * (dydnx * nx + dydny * ny) * iz
    cdef double cu_f = nx * D
    cdef double cv_f = ny * D
    cdef double r4 = r2 * r2
    cdef double cu_k1 = s[FX] * nx * r2
    cdef double cv_k1 = s[FY] * ny * r2
    cdef double cu_k2 = s[FX] * nx * r4
    cdef double cv_k2 = s[FY] * ny * r4
    cdef double dX, dY, dZ
    cdef int r
    for r in range(k):
        dX = px * ds[0 * k + r] + py * ds[1 * k + r] + pz * ds[2 * k + r] + ds[9 * k + r]
        dY = px * ds[3 * k + r] + py * ds[4 * k + r] + pz * ds[5 * k + r] + ds[10 * k + r]
        dZ = px * ds[6 * k + r] + py * ds[7 * k + r] + pz * ds[8 * k + r] + ds[11 * k + r]
        Ju[r] = (du_dX * dX + du_dY * dY + du_dZ * dZ + cu_f * ds[FX * k + r] + ds[U0 * k + r]
                 + cu_k1 * ds[K1 * k + r] + cu_k2 * ds[K2 * k + r])
        Jv[r] = (dv_dX * dX + dv_dY * dY + dv_dZ * dZ + cv_f * ds[FY * k + r] + ds[V0 * k + r]
                 + cv_k1 * ds[K1 * k + r] + cv_k2 * ds[K2 * k + r])


def project(const double[:, ::1] states, const double[:, ::1] points, const cnp.int64_t[::1] offsets,
            double z_min):
    cdef Py_ssize_t M = points.shape[0]
    pix_arr = np.empty((M, 2))
    cdef double[:, ::1] pix = pix_arr
    cdef Py_ssize_t i, j, bad = -1
    with nogil:
        for i in range(states.shape[0]):
            for j in range(offsets[i], offsets[i + 1]):
                if not (_depth(&states[i, 0], &points[j, 0]) > z_min):
                    bad = j
                    break
                _pixel(&states[i, 0], &points[j, 0], &pix[j, 0], &pix[j, 1])
            if bad >= 0:
                break
    return pix_arr, bad


def project_jacobian(const double[:, ::1] states, const double[:, :, ::1] dstates, const double[:, ::1] points,
                     const cnp.int64_t[::1] offsets, double z_min):
    cdef Py_ssize_t M = points.shape[0]
    cdef int k = dstates.shape[2]
    pix_arr = np.empty((M, 2))
    J_arr = np.empty((M, 2, k))
    cdef double[:, ::1] pix = pix_arr
    cdef double[:, :, ::1] J = J_arr
    cdef Py_ssize_t i, j, bad = -1
    if M == 0 or k == 0:
        return pix_arr, J_arr, -1
    with nogil:
        for i in range(states.shape[0]):
            for j in range(offsets[i], offsets[i + 1]):
                if not (_depth(&states[i, 0], &points[j, 0]) > z_min):
                    bad = j
                    break
                _pixel_rows(&states[i, 0], &dstates[i, 0, 0], k, &points[j, 0],
                            &pix[j, 0], &pix[j, 1], &J[j, 0, 0], &J[j, 1, 0])
            if bad >= 0:
                break
    return pix_arr, J_arr, bad


def residual_gradient(const double[:, ::1] states, const double[:, :, ::1] dstates, const double[:, ::1] points,
                      const cnp.int64_t[::1] offsets, const double[:, ::1] observed, double z_min):
    cdef Py_ssize_t n = states.shape[0]
    cdef int k = dstates.shape[2]
    sse_arr = np.zeros(n)
    grad_arr = np.zeros((n, k))
    rows_arr = np.empty((2, max(k, 1)))
    cdef double[::1] sse = sse_arr
    cdef double[:, ::1] grad = grad_arr
    cdef double[:, ::1] rows = rows_arr
    cdef Py_ssize_t i, j, bad = -1
    cdef int r
    cdef double u, v, ru, rv
    if k == 0:
        return sse_arr, grad_arr, -1
    with nogil:
        for i in range(n):
            for j in range(offsets[i], offsets[i + 1]):
                if not (_depth(&states[i, 0], &points[j, 0]) > z_min):
                    bad = j
                    break
                _pixel_rows(&states[i, 0], &dstates[i, 0, 0], k, &points[j, 0],
                            &u, &v, &rows[0, 0], &rows[1, 0])
                ru = u - observed[j, 0]
                rv = v - observed[j, 1]
                sse[i] += ru * ru + rv * rv
                for r in range(k):
                    grad[i, r] += ru * rows[0, r] + rv * rows[1, r]
            if bad >= 0:
                break
    return sse_arr, grad_arr, bad
