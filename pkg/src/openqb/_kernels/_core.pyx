# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled trajectory-stepping kernels.

Mirrors openqb._kernels.pyref exactly (same formulas, same bisection
schedule, same return values); matvecs go through BLAS zgemv and the
elementwise updates are plain C loops, so a step costs a few microseconds
instead of tens.
"""

from libc.math cimport fabs, sqrt

from scipy.linalg.cython_blas cimport zgemv

DEF BISECT_REL_TOL = 1e-13
DEF BISECT_MAX_ITER = 64
DEF HD_NORM_GUARD = 0.1

BACKEND = "compiled"


cdef inline void _matvec(double complex[:, ::1] a, double complex* x,
                         double complex* y) noexcept nogil:
    # a is C-contiguous; Fortran sees its buffer as a^T, so trans='T' gives y = a x
    cdef int n = <int> a.shape[0]
    cdef int inc = 1
    cdef double complex one = 1.0
    cdef double complex zero = 0.0
    zgemv('T', &n, &n, &one, &a[0, 0], &n, x, &inc, &zero, y, &inc)


cdef inline double _norm2(double complex[::1] v) noexcept nogil:
    cdef Py_ssize_t i
    cdef double s = 0.0
    for i in range(v.shape[0]):
        s += v[i].real * v[i].real + v[i].imag * v[i].imag
    return s


cdef void _rk4_step(double complex[:, ::1] a, double complex[::1] src,
                    double h, double complex[::1] dst,
                    double complex[::1] k1, double complex[::1] k2,
                    double complex[::1] k3, double complex[::1] k4,
                    double complex[::1] tmp) noexcept nogil:
    cdef Py_ssize_t i, n = src.shape[0]
    cdef double hh = 0.5 * h
    cdef double h6 = h / 6.0
    _matvec(a, &src[0], &k1[0])
    for i in range(n):
        tmp[i] = src[i] + hh * k1[i]
    _matvec(a, &tmp[0], &k2[0])
    for i in range(n):
        tmp[i] = src[i] + hh * k2[i]
    _matvec(a, &tmp[0], &k3[0])
    for i in range(n):
        tmp[i] = src[i] + h * k3[i]
    _matvec(a, &tmp[0], &k4[0])
    for i in range(n):
        dst[i] = src[i] + h6 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])


def pd_interval(double complex[:, ::1] a, double complex[::1] psi, double h,
                Py_ssize_t n_steps, double r, double complex[:, ::1] scratch):
    """See pyref.pd_interval: returns (n_done, s_frac, jumped)."""
    cdef Py_ssize_t n = psi.shape[0]
    if a.shape[0] != n or a.shape[1] != n:
        raise ValueError("generator/state dimension mismatch")
    if scratch.shape[0] < 6 or scratch.shape[1] != n:
        raise ValueError("scratch must be at least (6, dim)")
    cdef double complex[::1] k1 = scratch[0]
    cdef double complex[::1] k2 = scratch[1]
    cdef double complex[::1] k3 = scratch[2]
    cdef double complex[::1] k4 = scratch[3]
    cdef double complex[::1] tmp = scratch[4]
    cdef double complex[::1] prev = scratch[5]
    cdef Py_ssize_t step = 0, i, it
    cdef bint jumped = False
    cdef double lo, hi, mid, s = 0.0

    with nogil:
        while step < n_steps:
            for i in range(n):
                prev[i] = psi[i]
            _rk4_step(a, prev, h, psi, k1, k2, k3, k4, tmp)
            if r >= 0.0 and _norm2(psi) <= r:
                jumped = True
                lo = 0.0
                hi = h
                s = h
                for it in range(BISECT_MAX_ITER):
                    mid = 0.5 * (lo + hi)
                    _rk4_step(a, prev, mid, psi, k1, k2, k3, k4, tmp)
                    s = mid
                    if _norm2(psi) > r:
                        lo = mid
                    else:
                        hi = mid
                    if hi - lo <= BISECT_REL_TOL * h:
                        break
                break
            step += 1

    if jumped:
        return step, s / h, True
    return n_steps, 0.0, False


def hd_interval(double complex[:, ::1] a, double complex[:, ::1] c,
                double complex[::1] psi, double h,
                double[::1] dw, double[::1] dy_out,
                double complex[:, ::1] scratch):
    """See pyref.hd_interval: returns (bad_step, max_dev)."""
    cdef Py_ssize_t n = psi.shape[0]
    cdef Py_ssize_t m = dw.shape[0]
    if a.shape[0] != n or a.shape[1] != n or c.shape[0] != n or c.shape[1] != n:
        raise ValueError("operator/state dimension mismatch")
    if dy_out.shape[0] < m:
        raise ValueError("dy_out shorter than dw")
    if scratch.shape[0] < 2 or scratch.shape[1] != n:
        raise ValueError("scratch must be at least (2, dim)")
    cdef double complex[::1] cpsi = scratch[0]
    cdef double complex[::1] drift = scratch[1]
    cdef Py_ssize_t i, j
    cdef Py_ssize_t bad = -1
    cdef double x, nrm, dev, inv, dwi
    cdef double max_dev = 0.0

    with nogil:
        for i in range(m):
            _matvec(c, &psi[0], &cpsi[0])
            x = 0.0
            for j in range(n):
                # Re(conj(psi_j) cpsi_j)
                x += psi[j].real * cpsi[j].real + psi[j].imag * cpsi[j].imag
            x *= 2.0
            _matvec(a, &psi[0], &drift[0])
            dwi = dw[i]
            for j in range(n):
                psi[j] = psi[j] + h * (drift[j] + (0.5 * x) * cpsi[j]
                                       - (0.125 * x * x) * psi[j]) \
                         + dwi * (cpsi[j] - (0.5 * x) * psi[j])
            nrm = sqrt(_norm2(psi))
            dev = fabs(nrm - 1.0)
            if dev > max_dev:
                max_dev = dev
            if dev > HD_NORM_GUARD:
                bad = i
                break
            inv = 1.0 / nrm
            for j in range(n):
                psi[j] = psi[j] * inv
            dy_out[i] = x * h + dwi

    return bad, max_dev
