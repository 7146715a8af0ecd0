"""Backend selection and the per-run step plan shared by both backends.

``BACKEND`` is ``"compiled"`` when the Cython extension imports, else ``"python"``.
Setting ``MOTORHOM_BACKEND=python`` forces the fallback.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _kernels_py as python_backend

compiled_backend = None
if os.environ.get("MOTORHOM_BACKEND", "").lower() != "python":
    try:
        from . import _kernels as compiled_backend  # type: ignore[no-redef]
    except ImportError:
        compiled_backend = None

BACKEND = "compiled" if compiled_backend is not None else "python"

# below this magnitude bordered-factor entries are flushed to zero (avoids subnormals)
_FLUSH = 1e-280


@dataclass(frozen=True)
class CyclicFactor:
    """LU factors of a cyclic tridiagonal matrix, bordered on the last row/column.

    Rows ``0..J-2`` carry ``beta`` on the diagonal, ``gamma`` on the super-diagonal and
    ``side`` in the last column; ``lower`` holds the body multipliers and ``last`` the
    multipliers that eliminate the last row.
    """

    lower: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    side: np.ndarray
    last: np.ndarray
    last_diag: float

    @property
    def inv_beta(self) -> np.ndarray:
        return 1.0 / self.beta

    @property
    def size(self) -> int:
        return self.beta.shape[0] + 1


def cyclic_factor(sub, diag, sup) -> CyclicFactor:
    """Factor the cyclic matrix with ``A[i,i-1]=sub[i]``, ``A[i,i]=diag[i]``, ``A[i,i+1]=sup[i]``.

    Indices wrap, so ``sub[0]`` sits in the last column of row 0 and ``sup[J-1]`` in
    column 0 of the last row.  No pivoting: intended for diagonally dominant M-matrices.
    """
    a = np.asarray(sub, dtype=float)
    b = np.asarray(diag, dtype=float)
    c = np.asarray(sup, dtype=float)
    J = b.shape[0]
    if J < 4:
        raise ValueError("cyclic factorization needs at least 4 unknowns")
    n = J - 1
    beta = np.zeros(n)
    gamma = np.zeros(n)
    side = np.zeros(n)
    lower = np.zeros(max(n - 1, 1))
    gamma[: n - 1] = c[: n - 1]
    beta[0] = b[0]
    side[0] = a[0]
    for i in range(n - 1):
        li = a[i + 1] / beta[i]
        lower[i] = li
        beta[i + 1] = b[i + 1] - li * gamma[i]
        s = c[n - 1] if i + 1 == n - 1 else 0.0
        side[i + 1] = s - li * side[i]
        if abs(side[i + 1]) < _FLUSH:
            side[i + 1] = 0.0
    last = np.zeros(n)
    r = c[n]
    d = b[n]
    for i in range(n):
        mi = r / beta[i]
        if abs(mi) < _FLUSH:
            mi = 0.0
        last[i] = mi
        d -= mi * side[i]
        if i + 1 <= n - 1:
            r = (a[n] if i + 1 == n - 1 else 0.0) - mi * gamma[i]
    return CyclicFactor(lower, beta, gamma, side, last, float(d))


@dataclass
class StepPlan:
    """Everything one Strang step needs, precomputed for a fixed ``dt``."""

    dt: float
    c11: np.ndarray
    c12: np.ndarray
    c21: np.ndarray
    c22: np.ndarray
    ap1: np.ndarray
    am1: np.ndarray
    ap2: np.ndarray
    am2: np.ndarray
    drift1: bool
    drift2: bool
    r: float
    factor: CyclicFactor
    _lu: object = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return self.c11.shape[0]

    def diffusion_matrix(self) -> sp.csc_matrix:
        J = self.size
        r = self.r
        main = np.full(J, 1.0 + 2.0 * r)
        off = np.full(J, -r)
        m = sp.diags([off[:-1], main, off[:-1]], [-1, 0, 1], shape=(J, J), format="lil")
        m[0, J - 1] = -r
        m[J - 1, 0] = -r
        return m.tocsc()

    def splu(self):
        if self._lu is None:
            # natural ordering and no pivoting keep the factors sign-structured
            self._lu = spla.splu(self.diffusion_matrix(), permc_spec="NATURAL",
                                 diag_pivot_thresh=0.0, options={"SymmetricMode": True})
        return self._lu


def make_plan(dt: float, eps: float, h: float, nu1, nu2, a1, a2=None) -> StepPlan:
    """Build a plan from cell rates ``nu1, nu2`` and face velocities ``a1`` (``a2``)."""
    nu1 = np.asarray(nu1, dtype=float)
    nu2 = np.asarray(nu2, dtype=float)
    tot = nu1 + nu2
    e = np.exp(-tot * (0.5 * dt / eps))
    q1 = nu1 / tot
    q2 = nu2 / tot
    om = -np.expm1(-tot * (0.5 * dt / eps))
    lam = dt / h
    a1 = np.asarray(a1, dtype=float)
    zero = np.zeros_like(a1)
    if a2 is None:
        a2 = zero
        drift2 = False
    else:
        a2 = np.asarray(a2, dtype=float)
        drift2 = bool(np.any(a2 != 0.0))
    r = eps * dt / h**2
    J = a1.shape[0]
    off = np.full(J, -r)
    factor = cyclic_factor(off, np.full(J, 1.0 + 2.0 * r), off)
    return StepPlan(
        dt=dt,
        c11=e + q2 * om,
        c12=q2 * om,
        c21=q1 * om,
        c22=e + q1 * om,
        ap1=lam * np.maximum(a1, 0.0),
        am1=lam * np.minimum(a1, 0.0),
        ap2=lam * np.maximum(a2, 0.0),
        am2=lam * np.minimum(a2, 0.0),
        drift1=bool(np.any(a1 != 0.0)),
        drift2=drift2,
        r=r,
        factor=factor,
    )


def advance(n1: np.ndarray, n2: np.ndarray, nsteps: int, plan: StepPlan, backend: str | None = None) -> None:
    """Advance contiguous float arrays in place."""
    name = backend or BACKEND
    if name == "compiled":
        if compiled_backend is None:
            raise RuntimeError("compiled backend not available")
        f = plan.factor
        compiled_backend.strang_advance(
            n1, n2, int(nsteps), plan.c11, plan.c12, plan.c21, plan.c22,
            plan.ap1, plan.am1, plan.ap2, plan.am2, plan.drift1, plan.drift2, plan.r,
            f.lower, f.inv_beta, f.gamma, f.side, f.last, f.last_diag,
            np.empty_like(n1), np.empty_like(n1),
        )
    elif name == "python":
        python_backend.strang_advance(n1, n2, nsteps, plan)
    else:
        raise ValueError(f"unknown backend {name!r}")


def available_backends() -> list[str]:
    return ["compiled", "python"] if compiled_backend is not None else ["python"]
