# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels; same contracts as _kernels_py."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


def vandermonde(xi, exps):
    cdef const double[:, ::1] x = np.ascontiguousarray(xi, dtype=np.float64)
    cdef const long[:, ::1] e = np.ascontiguousarray(exps, dtype=np.int64)
    cdef Py_ssize_t npts = x.shape[0], dim = x.shape[1], nmon = e.shape[0]
    out_arr = np.ones((npts, nmon))
    cdef double[:, ::1] out = out_arr
    if nmon == 0 or npts == 0:
        return out_arr
    cdef long maxdeg = 0
    cdef Py_ssize_t p, j, d, k
    for j in range(nmon):
        for d in range(dim):
            if e[j, d] > maxdeg:
                maxdeg = e[j, d]
    pw_arr = np.ones((dim, maxdeg + 1))
    cdef double[:, ::1] pw = pw_arr
    cdef double v
    for p in range(npts):
        for d in range(dim):
            for k in range(1, maxdeg + 1):
                pw[d, k] = pw[d, k - 1] * x[p, d]
        for j in range(nmon):
            v = 1.0
            for d in range(dim):
                v *= pw[d, e[j, d]]
            out[p, j] = v
    return out_arr


cdef int EI[6]
cdef int EJ[6]
EI[:] = [0, 0, 0, 1, 1, 2]
EJ[:] = [1, 2, 3, 2, 3, 3]


def whitney_local(coords):
    cdef const double[:, :, ::1] c = np.ascontiguousarray(coords, dtype=np.float64)
    cdef Py_ssize_t m = c.shape[0]
    vol_arr = np.empty(m)
    grads_arr = np.empty((m, 4, 3))
    M0_arr = np.empty((m, 4, 4))
    M1_arr = np.empty((m, 6, 6))
    M2_arr = np.empty((m, 4, 4))
    cdef double[::1] vol = vol_arr
    cdef double[:, :, ::1] g = grads_arr
    cdef double[:, :, ::1] M0 = M0_arr
    cdef double[:, :, ::1] M1 = M1_arr
    cdef double[:, :, ::1] M2 = M2_arr
    cdef double J[3][3]
    cdef double ll[4][4]
    cdef double gg[4][4]
    cdef double dot[4][4]
    cdef double det, v, s
    cdef Py_ssize_t t, a, b, i, j, k, l, d, n
    for a in range(4):
        for b in range(4):
            ll[a][b] = (2.0 if a == b else 1.0) / 20.0
    for t in range(m):
        for a in range(3):
            for d in range(3):
                J[a][d] = c[t, a + 1, d] - c[t, 0, d]
        det = (J[0][0] * (J[1][1] * J[2][2] - J[1][2] * J[2][1])
               - J[0][1] * (J[1][0] * J[2][2] - J[1][2] * J[2][0])
               + J[0][2] * (J[1][0] * J[2][1] - J[1][1] * J[2][0]))
        v = fabs(det) / 6.0
        vol[t] = v
        # rows of the inverse transpose: grad lam_{a+1} = (J^{-T})_a
        g[t, 1, 0] = (J[1][1] * J[2][2] - J[1][2] * J[2][1]) / det
        g[t, 1, 1] = (J[1][2] * J[2][0] - J[1][0] * J[2][2]) / det
        g[t, 1, 2] = (J[1][0] * J[2][1] - J[1][1] * J[2][0]) / det
        g[t, 2, 0] = (J[0][2] * J[2][1] - J[0][1] * J[2][2]) / det
        g[t, 2, 1] = (J[0][0] * J[2][2] - J[0][2] * J[2][0]) / det
        g[t, 2, 2] = (J[0][1] * J[2][0] - J[0][0] * J[2][1]) / det
        g[t, 3, 0] = (J[0][1] * J[1][2] - J[0][2] * J[1][1]) / det
        g[t, 3, 1] = (J[0][2] * J[1][0] - J[0][0] * J[1][2]) / det
        g[t, 3, 2] = (J[0][0] * J[1][1] - J[0][1] * J[1][0]) / det
        for d in range(3):
            g[t, 0, d] = -(g[t, 1, d] + g[t, 2, d] + g[t, 3, d])
        for a in range(4):
            for b in range(4):
                M0[t, a, b] = v * ll[a][b]
                s = 0.0
                for d in range(3):
                    s += g[t, a, d] * g[t, b, d]
                gg[a][b] = s
                s = 0.0
                for d in range(3):
                    s += c[t, a, d] * c[t, b, d]
                dot[a][b] = s
        for a in range(6):
            i = EI[a]
            j = EJ[a]
            for b in range(6):
                k = EI[b]
                l = EJ[b]
                M1[t, a, b] = v * (ll[i][k] * gg[j][l] - ll[i][l] * gg[j][k]
                                   - ll[j][k] * gg[i][l] + ll[j][l] * gg[i][k])
        # (x_i - x_l).(x_j - x_n) = dot[i][j] - dot[i][n] - dot[l][j] + dot[l][n]
        for l in range(4):
            for n in range(4):
                s = 0.0
                for i in range(4):
                    for j in range(4):
                        s += ll[i][j] * (dot[i][j] - dot[i][n] - dot[l][j] + dot[l][n])
                M2[t, l, n] = v * s
    return vol_arr, grads_arr, M0_arr, M1_arr, M2_arr
