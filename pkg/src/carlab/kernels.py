"""Hot numeric kernels.

The backward Riccati integration is a scalar recurrence over the radial grid
and cannot be vectorized, so it is the one kernel compiled with numba. A pure
Python twin of the same source is kept for environments without numba and for
benchmarking; set CARLAB_DISABLE_NUMBA=1 to force the fallback path.
"""

import math
import os

import numpy as np

# profile selectors for the inline psi evaluation (see the kernel docstring)
PSI_PIECEWISE = 0
PSI_CONSTANT = 1
PSI_ZERO = 2


def numba_disabled() -> bool:
    return os.environ.get("CARLAB_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes"}


def _riccati_backward_impl(r, h, substep, kind, a0, a1, a2, a3, a4, a5):
    """Integrate u' = (u^2 - psi(r))/h backward from u(r[-1]) = 0.

    r must be strictly increasing; substep bounds the internal RK4 step.
    The profile psi is evaluated inline from its parameters so substep
    abscissae see exact values, never interpolants:

      kind 0 (piecewise): a0=B, a1=R0, a2=R1, a3=delta, a4=plateau, a5=E/4
                          psi = plateau on [0,R0], B/(1-(1+r)^-delta) - E/4
                          on (R0,R1), 0 beyond R1
      kind 1 (constant):  a0=k, a1=R: psi = k on [0,R], 0 beyond
      kind 2 (zero)

    Returns u sampled at the nodes of r.
    """
    n = r.shape[0]
    u = np.zeros(n)
    uu = 0.0
    for i in range(n - 1, 0, -1):
        ra = r[i]
        rb = r[i - 1]
        span = ra - rb
        m = int(math.ceil(span / substep))
        if m < 1:
            m = 1
        dt = -span / m
        rr = ra
        for _ in range(m):
            # inline psi at the three RK4 abscissae
            rm = rr + 0.5 * dt
            re = rr + dt
            if kind == 0:
                pa = a4 if rr <= a1 else (0.0 if rr >= a2 else a0 / (1.0 - (1.0 + rr) ** (-a3)) - a5)
                pm = a4 if rm <= a1 else (0.0 if rm >= a2 else a0 / (1.0 - (1.0 + rm) ** (-a3)) - a5)
                pe = a4 if re <= a1 else (0.0 if re >= a2 else a0 / (1.0 - (1.0 + re) ** (-a3)) - a5)
            elif kind == 1:
                pa = a0 if rr <= a1 else 0.0
                pm = a0 if rm <= a1 else 0.0
                pe = a0 if re <= a1 else 0.0
            else:
                pa = 0.0
                pm = 0.0
                pe = 0.0
            k1 = (uu * uu - pa) / h
            v2 = uu + 0.5 * dt * k1
            k2 = (v2 * v2 - pm) / h
            v3 = uu + 0.5 * dt * k2
            k3 = (v3 * v3 - pm) / h
            v4 = uu + dt * k3
            k4 = (v4 * v4 - pe) / h
            uu = uu + dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
            rr = re
        u[i - 1] = uu
    return u


riccati_backward_py = _riccati_backward_impl

if numba_disabled():
    riccati_backward = _riccati_backward_impl
else:
    try:
        from numba import njit

        riccati_backward = njit(cache=True)(_riccati_backward_impl)
    except ImportError:  # pragma: no cover - numba is a declared dependency
        riccati_backward = _riccati_backward_impl


def using_numba() -> bool:
    return riccati_backward is not riccati_backward_py
