# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled RK4 kernel for batches of affine trajectories."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def rk4_affine(A, b, X0, double dt, Py_ssize_t nsteps, Py_ssize_t stride):
    cdef const double[:, ::1] Am = np.ascontiguousarray(A, dtype=np.float64)
    cdef const double[::1] bm = np.ascontiguousarray(b, dtype=np.float64)
    cdef double[:, ::1] X = np.array(X0, dtype=np.float64, order="C")
    cdef Py_ssize_t m = X.shape[0], d = X.shape[1]
    out_arr = np.empty((nsteps // stride + 1, m, d))
    cdef double[:, :, ::1] out = out_arr
    cdef double[::1] x = np.empty(d)
    cdef double[::1] tmp = np.empty(d)
    cdef double[::1] k1 = np.empty(d)
    cdef double[::1] k2 = np.empty(d)
    cdef double[::1] k3 = np.empty(d)
    cdef double[::1] k4 = np.empty(d)
    cdef Py_ssize_t i, j, l, step, rec
    cdef double s, half = 0.5 * dt, sixth = dt / 6.0

    for i in range(m):
        for j in range(d):
            x[j] = X[i, j]
            out[0, i, j] = x[j]
        rec = 1
        for step in range(1, nsteps + 1):
            for j in range(d):
                s = bm[j]
                for l in range(d):
                    s += Am[j, l] * x[l]
                k1[j] = s
            for j in range(d):
                tmp[j] = x[j] + half * k1[j]
            for j in range(d):
                s = bm[j]
                for l in range(d):
                    s += Am[j, l] * tmp[l]
                k2[j] = s
            for j in range(d):
                tmp[j] = x[j] + half * k2[j]
            for j in range(d):
                s = bm[j]
                for l in range(d):
                    s += Am[j, l] * tmp[l]
                k3[j] = s
            for j in range(d):
                tmp[j] = x[j] + dt * k3[j]
            for j in range(d):
                s = bm[j]
                for l in range(d):
                    s += Am[j, l] * tmp[l]
                k4[j] = s
            for j in range(d):
                x[j] = x[j] + sixth * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
            if step % stride == 0:
                for j in range(d):
                    out[rec, i, j] = x[j]
                rec += 1
    return out_arr
