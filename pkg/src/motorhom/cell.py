"""Discrete cell problem: the principal eigenpair of the periodic two-species operator.

For a momentum ``p`` the unknowns are the periodic pair ``w = (w1, w2)`` solving

    -lap w1 + 2 p.D w1 - div(D psi1 w1) + (-|p|^2 + p.D psi1 + nu1) w1 - nu2 w2 = -H w1
    -lap w2 + 2 p.D w2 [- div(D psi2 w2) + p.D psi2 w2] + (-|p|^2 + nu2) w2 - nu1 w1 = -H w2

(bracketed terms only when the second conformation has its own potential).  The
effective Hamiltonian ``H(p)`` is minus the eigenvalue of this operator that owns a
positive eigenvector.  Space is discretized with second-order central differences on
the periodic grid, the conservative drift in flux form with face values of ``D psi``
taken from the spectral interpolant and ``w`` averaged across the face.

``A = -L`` has nonnegative off-diagonal entries as long as the grid Peclet number
stays below 2, so ``(s I - A)^{-1}`` is entrywise nonnegative for any shift ``s`` above
the Perron root.  :func:`principal_eigenpair` exploits this: shifted inverse
iteration where the shift is driven down towards the Perron root by the
Collatz-Wielandt upper bound ``max_i (A x)_i / x_i`` but never below it, so every
iterate stays positive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .defaults import CELL_GRID, EIG_MAX_ITER, EIG_TOL
from .errors import (
    DegeneratePairing,
    EigenvalueMismatch,
    InvalidGrid,
    NoConvergence,
    NonPositiveEigenvector,
    PecletViolation,
)
from .model import MotorModel, PeriodicField, differentiate, gradient


def _as_momentum(p, d: int) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(p, dtype=float))
    if arr.shape != (d,):
        raise InvalidGrid(f"momentum must have {d} component(s), got shape {arr.shape}")
    return arr


def _shift_1d(n: int) -> sp.csr_matrix:
    """Periodic forward shift: ``(S w)_k = w_{k+1}``."""
    cols = (np.arange(n) + 1) % n
    return sp.csr_matrix((np.ones(n), (np.arange(n), cols)), shape=(n, n))


def _axis_op(op1: sp.spmatrix, axis: int, d: int, n: int) -> sp.csr_matrix:
    if d == 1:
        return sp.csr_matrix(op1)
    eye = sp.identity(n, format="csr")
    return sp.csr_matrix(sp.kron(op1, eye) if axis == 0 else sp.kron(eye, op1))


def central_diff(w: np.ndarray, axis: int = 0) -> np.ndarray:
    """Second-order periodic central difference on the unit cell."""
    n = w.shape[axis]
    return (np.roll(w, -1, axis=axis) - np.roll(w, 1, axis=axis)) * (n / 2.0)


def _species_drifts(model: MotorModel):
    """Per species: (node gradient components, face gradient components) or None."""
    out = []
    for psi in model.potentials:
        if psi is None:
            out.append(None)
            continue
        grads = gradient(psi)
        nodes = [g.samples for g in grads]
        faces = [g.shifted(axis=ax, shift=0.5) for ax, g in enumerate(grads)]
        out.append((nodes, faces))
    return out


def required_grid(model: MotorModel, p) -> int:
    """Smallest even grid (>= 16) meeting the central-difference Peclet bound at ``p``."""
    p = _as_momentum(p, model.d)
    worst = 0.0
    for drift in _species_drifts(model):
        for ax in range(model.d):
            if drift is None:
                worst = max(worst, abs(2 * p[ax]))
            else:
                nodes, faces = drift
                worst = max(worst, np.max(np.abs(2 * p[ax] - nodes[ax])), np.max(np.abs(2 * p[ax] - faces[ax])))
    n = int(np.floor(worst / 2.0)) + 1
    n += n % 2
    return max(16, n)


@dataclass(frozen=True, eq=False)
class DiscreteCellOperator:
    """Sparse matrix ``L`` acting on stacked ``(w1, w2)`` (each flattened, C order)."""

    p: np.ndarray
    n: int
    d: int
    matrix: sp.csc_matrix
    model: MotorModel
    peclet: float

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def h(self) -> float:
        return 1.0 / self.n

    def apply(self, w: np.ndarray) -> np.ndarray:
        return self.matrix @ w

    def split(self, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        m = self.n**self.d
        shape = (self.n,) * self.d
        return w[:m].reshape(shape), w[m:].reshape(shape)


def assemble(model: MotorModel, p, n: int = CELL_GRID) -> DiscreteCellOperator:
    if n % 2 or n < 16:
        raise InvalidGrid(f"cell grid must be even and >= 16, got {n}")
    model = model.resample(n)
    d = model.d
    p = _as_momentum(p, d)
    h = 1.0 / n

    need = required_grid(model, p)
    drifts = _species_drifts(model)
    worst = 0.0
    for drift in drifts:
        for ax in range(d):
            vals = [abs(2 * p[ax])] if drift is None else [
                np.max(np.abs(2 * p[ax] - drift[0][ax])),
                np.max(np.abs(2 * p[ax] - drift[1][ax])),
            ]
            worst = max(worst, *vals)
    peclet = worst * h
    if peclet >= 2.0:
        raise PecletViolation(need, peclet, n)

    m = n**d
    eye1 = sp.identity(n, format="csr")
    s1 = _shift_1d(n)
    lap = sp.csr_matrix((m, m))
    grad_ops = []
    shifts = []
    for ax in range(d):
        s_ax = _axis_op(s1, ax, d, n)
        shifts.append(s_ax)
        lap = lap + _axis_op((s1 - 2 * eye1 + s1.T) / h**2, ax, d, n)
        grad_ops.append(_axis_op((s1 - s1.T) / (2 * h), ax, d, n))
    eye = sp.identity(m, format="csr")

    rates = (model.nu1.samples.ravel(), model.nu2.samples.ravel())
    blocks = []
    for i, drift in enumerate(drifts):
        op = -lap
        zeroth = -float(p @ p) * np.ones(m) + rates[i]
        for ax in range(d):
            op = op + 2 * p[ax] * grad_ops[ax]
        if drift is not None:
            nodes, faces = drift
            for ax in range(d):
                flux = sp.diags(faces[ax].ravel()) @ (eye + shifts[ax]) / 2
                op = op - (eye - shifts[ax].T) @ flux / h
                zeroth = zeroth + p[ax] * nodes[ax].ravel()
        blocks.append(op + sp.diags(zeroth))
    matrix = sp.bmat(
        [[blocks[0], -sp.diags(rates[1])], [-sp.diags(rates[0]), blocks[1]]],
        format="csc",
    )
    return DiscreteCellOperator(p=p, n=n, d=d, matrix=matrix, model=model, peclet=peclet)


def _perron(a: sp.csc_matrix, tol: float, max_iter: int) -> tuple[float, np.ndarray]:
    """Perron root and positive vector of the Metzler matrix ``a``."""
    size = a.shape[0]
    norm = float(np.max(np.abs(a).sum(axis=1)))
    eye = sp.identity(size, format="csc")
    floor = max(1e4 * np.finfo(float).eps * norm, 1e-9)
    shift = 1.0 + norm
    x = np.full(size, 1.0 / np.sqrt(size))
    lu = None
    mu_prev = np.inf
    for it in range(1, max_iter + 1):
        if lu is None:
            lu = spla.splu(sp.csc_matrix(shift * eye - a))
        y = lu.solve(x)
        theta = float(x @ y)
        mu = shift - 1.0 / theta
        x = y / np.linalg.norm(y)
        if np.all(x > 0):
            ratio = (a @ x) / x
            upper, lower = float(ratio.max()), float(ratio.min())
            target = upper + max(floor * (1.0 + abs(upper)), upper - lower)
            # refactor only when the shift moves meaningfully closer to the bound
            if target < shift and (shift - target) > 0.25 * (shift - upper):
                shift = target
                lu = None
        if abs(mu - mu_prev) < tol and it > 2:
            return mu, x
        mu_prev = mu
    raise NoConvergence(max_iter, f"last eigenvalue change {abs(mu - mu_prev):.3g}")


def _normalization_weights(p: np.ndarray, n: int) -> np.ndarray:
    """Trapezoid weights on the unit cell for ``chi = exp(-p.y) w`` (twisted end values)."""
    d = len(p)
    w = np.ones((n,) * d)
    for ax in range(d):
        a = np.ones(n)
        a[0] = 0.5 * (1.0 + np.exp(-p[ax]))
        shape = [1] * d
        shape[ax] = n
        w = w * a.reshape(shape)
    return w / n**d


def _exp_twist(p: np.ndarray, n: int) -> np.ndarray:
    d = len(p)
    y = np.arange(n) / n
    grids = np.meshgrid(*([y] * d), indexing="ij")
    return np.exp(-sum(p[ax] * grids[ax] for ax in range(d)))


def chi_integral(op: DiscreteCellOperator, w: np.ndarray) -> float:
    w1, w2 = op.split(w)
    twist = _exp_twist(op.p, op.n)
    weights = _normalization_weights(op.p, op.n)
    return float(np.sum(weights * twist * (w1 + w2)))


def principal_eigenpair(
    op: DiscreteCellOperator, tol: float = EIG_TOL, max_iter: int = EIG_MAX_ITER
) -> tuple[float, np.ndarray]:
    """Eigenvalue of ``L`` with a positive eigenvector; ``H(p) = -lambda``.

    The eigenvector is normalized so that the integral of ``chi1 + chi2`` over the
    unit cell is one.
    """
    mu, x = _perron(-op.matrix, tol, max_iter)
    if not np.all(x > 0):
        raise NonPositiveEigenvector(
            f"principal eigenvector has {int(np.sum(x <= 0))} non-positive entries at p={op.p}"
        )
    x = x / chi_integral(op, x)
    return -mu, x


def adjoint_eigenpair(
    op: DiscreteCellOperator,
    tol: float = EIG_TOL,
    max_iter: int = EIG_MAX_ITER,
    primal: tuple[float, np.ndarray] | None = None,
) -> tuple[float, np.ndarray]:
    """Positive eigenvector of ``L^T`` paired to one against the primal eigenvector."""
    lam, w = primal if primal is not None else principal_eigenpair(op, tol, max_iter)
    mu, x = _perron(-sp.csc_matrix(op.matrix.T), tol, max_iter)
    if not np.all(x > 0):
        raise NonPositiveEigenvector(f"adjoint eigenvector not positive at p={op.p}")
    lam_adj = -mu
    if abs(lam_adj - lam) > 10 * tol * max(1.0, abs(lam)):
        raise EigenvalueMismatch(f"primal {lam!r} vs adjoint {lam_adj!r} at p={op.p}")
    pairing = float(x @ w) / op.n**op.d
    return lam_adj, x / pairing


@dataclass(frozen=True, eq=False)
class CellSolution:
    p: np.ndarray
    hbar: float
    w1: np.ndarray
    w2: np.ndarray
    w1_adj: np.ndarray
    w2_adj: np.ndarray
    phi1: np.ndarray
    phi2: np.ndarray
    chi1: np.ndarray
    chi2: np.ndarray
    residual: float
    n: int
    lambda_adj: float
    model: MotorModel

    @property
    def d(self) -> int:
        return len(self.p)


def _spectral(f: np.ndarray) -> PeriodicField:
    return PeriodicField(f)


def _cell_residual(model: MotorModel, p: np.ndarray, phi1, phi2, hbar: float) -> float:
    d = len(p)
    res = []
    pairs = ((phi1, phi2, model.psi1, model.nu1, model.nu2), (phi2, phi1, model.psi2, model.nu2, model.nu1))
    for phi, other, psi, own_rate, other_rate in pairs:
        f = _spectral(phi)
        grads = [g.samples + p[ax] for ax, g in enumerate(gradient(f))]
        e = -differentiate(f, 2).samples + sum(g**2 for g in grads)
        if psi is not None:
            dpsi = gradient(psi)
            e = e - sum(dpsi[ax].samples * grads[ax] for ax in range(d)) + differentiate(psi, 2).samples
        e = e + other_rate.samples * np.exp(phi - other) - own_rate.samples - hbar
        res.append(np.max(np.abs(e)))
    return float(max(res))


def solve_cell(model: MotorModel, p, n: int = CELL_GRID, tol: float = EIG_TOL) -> CellSolution:
    op = assemble(model, p, n)
    lam, w = principal_eigenpair(op, tol)
    lam_adj, w_adj = adjoint_eigenpair(op, tol, primal=(lam, w))
    w1, w2 = op.split(w)
    a1, a2 = op.split(w_adj)
    hbar = -lam
    phi1, phi2 = -np.log(w1), -np.log(w2)
    twist = _exp_twist(op.p, n)
    return CellSolution(
        p=op.p,
        hbar=hbar,
        w1=w1,
        w2=w2,
        w1_adj=a1,
        w2_adj=a2,
        phi1=phi1,
        phi2=phi2,
        chi1=twist * w1,
        chi2=twist * w2,
        residual=_cell_residual(op.model, op.p, phi1, phi2, hbar),
        n=n,
        lambda_adj=lam_adj,
        model=op.model,
    )


def dhbar(sol: CellSolution, model: MotorModel | None = None, derivative: str = "discrete") -> np.ndarray:
    """Gradient of the effective Hamiltonian from the primal/adjoint pairing.

        DH(p) = 2p - [2<w1*, D w1> + 2<w2*, D w2> + <D psi1 w1, w1*> (+ <D psi2 w2, w2*>)]
                     / (<w1, w1*> + <w2, w2*>)

    With ``derivative="discrete"`` the derivatives of ``w`` use the same central
    differences as the assembled operator, which makes the result the exact
    derivative of the discrete eigenvalue.  ``"spectral"`` differentiates the grid
    functions spectrally instead (same limit, different O(h^2) error).
    """
    model = (model or sol.model).resample(sol.n)
    d = sol.d
    denom = float(np.mean(sol.w1 * sol.w1_adj) + np.mean(sol.w2 * sol.w2_adj))
    if denom < 1e-14:
        raise DegeneratePairing(f"primal/adjoint pairing {denom:.3g} at p={sol.p}")

    def deriv(w, ax):
        if derivative == "discrete":
            return central_diff(w, ax)
        if derivative == "spectral":
            return differentiate(PeriodicField(w), 1, axis=ax).samples
        raise ValueError(f"unknown derivative mode {derivative!r}")

    out = np.empty(d)
    for ax in range(d):
        num = 2 * np.mean(sol.w1_adj * deriv(sol.w1, ax)) + 2 * np.mean(sol.w2_adj * deriv(sol.w2, ax))
        for psi, w, w_adj in ((model.psi1, sol.w1, sol.w1_adj), (model.psi2, sol.w2, sol.w2_adj)):
            if psi is not None:
                num += np.mean(differentiate(psi, 1, axis=ax).samples * w * w_adj)
        out[ax] = 2 * sol.p[ax] - num / denom
    return out


def ss_residual(sol: CellSolution, model: MotorModel | None = None) -> float:
    """Max residual of the periodic (w-form) system with spectral derivatives."""
    model = (model or sol.model).resample(sol.n)
    return float(np.max(np.abs(np.concatenate([r.ravel() for r in _w_form_terms(sol, model)]))))


def _w_form_terms(sol: CellSolution, model: MotorModel):
    p = sol.p
    d = len(p)
    pairs = ((sol.w1, sol.w2, model.psi1, model.nu1, model.nu2), (sol.w2, sol.w1, model.psi2, model.nu2, model.nu1))
    out = []
    for w, other, psi, own_rate, other_rate in pairs:
        f = PeriodicField(w)
        grads = gradient(f)
        r = -differentiate(f, 2).samples + 2 * sum(p[ax] * grads[ax].samples for ax in range(d))
        zeroth = -float(p @ p) + own_rate.samples
        if psi is not None:
            dpsi = gradient(psi)
            for ax in range(d):
                r = r - differentiate(PeriodicField(dpsi[ax].samples * w), 1, axis=ax).samples
                zeroth = zeroth + p[ax] * dpsi[ax].samples
        r = r + zeroth * w - other_rate.samples * other + sol.hbar * w
        out.append(r)
    return out


def chi_residual(sol: CellSolution, model: MotorModel | None = None) -> float:
    """Max residual of the original (non-periodic) chi-form discretized directly.

    Central differences are applied to ``chi`` itself, with ghost values supplied by
    the twisted periodicity ``chi(y + e_k) = exp(-p_k) chi(y)``.  Only 1-D is supported.
    """
    if sol.d != 1:
        raise NotImplementedError("chi_residual is 1-D only")
    model = (model or sol.model).resample(sol.n)
    n = sol.n
    h = 1.0 / n
    p = float(sol.p[0])
    pairs = ((sol.chi1, sol.chi2, model.psi1, model.nu1, model.nu2), (sol.chi2, sol.chi1, model.psi2, model.nu2, model.nu1))
    out = []
    for chi, other, psi, own_rate, other_rate in pairs:
        right = np.append(chi[1:], np.exp(-p) * chi[0])
        left = np.insert(chi[:-1], 0, np.exp(p) * chi[-1])
        r = -(right - 2 * chi + left) / h**2
        if psi is not None:
            face = differentiate(psi, 1).shifted(0, 0.5)
            face_left = np.roll(face, 1)
            r = r - (face * (chi + right) / 2 - face_left * (left + chi) / 2) / h
        r = r + own_rate.samples * chi - other_rate.samples * other + sol.hbar * chi
        out.append(r)
    return float(np.max(np.abs(np.concatenate(out))))
