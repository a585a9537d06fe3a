"""Pure-numpy reference implementation of the trajectory-stepping kernels.

Semantics are the contract shared with the compiled backend
(``openqb._kernels._core``): same update formulas, same step/bisection
schedule, same return values.  The compiled module only removes per-step
Python overhead; both backends agree to floating-point rounding.

Kernel-level state vectors are raw complex128 arrays, modified in place.
``scratch`` is a (>= 6, d) complex workspace so drivers can amortize
allocations; this backend uses numpy temporaries where convenient.
"""

from __future__ import annotations

import math

import numpy as np

BACKEND = "python"

# bisection localizes a jump to this fraction of a step
_BISECT_REL_TOL = 1e-13
_BISECT_MAX_ITER = 64

# one Euler-Maruyama step moving the norm by more than this means dt is too large
HD_NORM_GUARD = 0.1


def _rk4_step(a: np.ndarray, src: np.ndarray, h: float, out: np.ndarray) -> None:
    k1 = a @ src
    k2 = a @ (src + (0.5 * h) * k1)
    k3 = a @ (src + (0.5 * h) * k2)
    k4 = a @ (src + h * k3)
    out[:] = src + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def pd_interval(a, psi, h, n_steps, r, scratch=None):
    """RK4-advance d|psi>/dt = A|psi> by up to ``n_steps`` steps of size ``h``,
    watching for the squared norm to cross the jump threshold ``r``.

    Returns (n_done, s_frac, jumped):
      * jumped False: all steps taken, psi advanced by n_steps*h;
      * jumped True: n_done full steps were taken, then the crossing was
        localized by bisection at s_frac*h into the next step; psi holds the
        (unnormalized) pre-collapse state at the jump time.
    ``r < 0`` disables jump monitoring (plain RK4 advance).
    """
    prev = scratch[5] if scratch is not None else np.empty_like(psi)
    for step in range(n_steps):
        prev[:] = psi
        _rk4_step(a, prev, h, psi)
        if r >= 0.0 and np.vdot(psi, psi).real <= r:
            lo, hi = 0.0, h
            s = h
            for _ in range(_BISECT_MAX_ITER):
                mid = 0.5 * (lo + hi)
                _rk4_step(a, prev, mid, psi)
                s = mid
                if np.vdot(psi, psi).real > r:
                    lo = mid
                else:
                    hi = mid
                if hi - lo <= _BISECT_REL_TOL * h:
                    break
            return step, s / h, True
    return n_steps, 0.0, False


def hd_interval(a, c, psi, h, dw, dy_out, scratch=None):
    """Euler-Maruyama steps of the normalized homodyne SSE.

    ``a`` must be -iH - c†c/2 (the measurement-independent drift), ``c`` the
    phase-rotated jump operator e^{-i theta} c.  One step per entry of ``dw``;
    the photocurrent increment <c+c†> h + dw is written to ``dy_out``.  The
    state is renormalized after every step.

    Returns (bad_step, max_dev): bad_step = -1 on success, otherwise the step
    at which the pre-renormalization norm deviated by more than HD_NORM_GUARD
    (psi is left unnormalized there for diagnostics).
    """
    max_dev = 0.0
    for i in range(dw.shape[0]):
        cpsi = c @ psi
        x = 2.0 * np.vdot(psi, cpsi).real
        drift = a @ psi
        drift += (0.5 * x) * cpsi
        drift -= (0.125 * x * x) * psi
        noise = cpsi - (0.5 * x) * psi
        psi += h * drift + dw[i] * noise
        nrm = math.sqrt(np.vdot(psi, psi).real)
        dev = abs(nrm - 1.0)
        if dev > max_dev:
            max_dev = dev
        if dev > HD_NORM_GUARD:
            return i, max_dev
        psi /= nrm
        dy_out[i] = x * h + dw[i]
    return -1, max_dev
