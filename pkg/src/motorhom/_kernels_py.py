"""Pure numpy/scipy Strang stepper used when the compiled extension is unavailable."""

from __future__ import annotations

import numpy as np


def strang_advance(n1, n2, nsteps, plan) -> None:
    """Advance ``(n1, n2)`` in place by ``nsteps`` steps of ``plan``."""
    lu = plan.splu()
    a1, a2 = n1.copy(), n2.copy()
    for _ in range(int(nsteps)):
        a1, a2 = plan.c11 * a1 + plan.c12 * a2, plan.c21 * a1 + plan.c22 * a2
        if plan.drift1:
            f = plan.ap1 * a1 + plan.am1 * np.roll(a1, -1)
            a1 = a1 - (f - np.roll(f, 1))
        if plan.drift2:
            f = plan.ap2 * a2 + plan.am2 * np.roll(a2, -1)
            a2 = a2 - (f - np.roll(f, 1))
        a1 = _diffuse(a1, lu, plan.r)
        a2 = _diffuse(a2, lu, plan.r)
        a1, a2 = plan.c11 * a1 + plan.c12 * a2, plan.c21 * a1 + plan.c22 * a2
    n1[:] = a1
    n2[:] = a2


def _diffuse(n, lu, r):
    # flux-form update from the implicit values keeps the mass exact
    x = lu.solve(n)
    return n + r * ((np.roll(x, -1) - x) - (x - np.roll(x, 1)))


def cyclic_solve(x, lower, inv_beta, gamma, side, last, last_diag) -> None:
    """Loop reference for the bordered cyclic substitution (small sizes only)."""
    n = x.shape[0] - 1
    for i in range(1, n):
        x[i] -= lower[i - 1] * x[i - 1]
    acc = x[n] - float(np.dot(last, x[:n]))
    xl = acc / last_diag
    x[n] = xl
    x[n - 1] = (x[n - 1] - side[n - 1] * xl) * inv_beta[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = (x[i] - gamma[i] * x[i + 1] - side[i] * xl) * inv_beta[i]
