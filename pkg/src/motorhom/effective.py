"""The effective Hamiltonian over momentum space and its convex conjugate."""

from __future__ import annotations

import csv
import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .cell import dhbar, solve_cell
from .defaults import CELL_GRID, EIG_TOL, LEGENDRE_P_CAP, LEGENDRE_TOL
from .errors import BracketFailure, MotorhomError, ValidationError
from .io import atomic_write_text
from .model import MotorModel


class EffectiveHamiltonian:
    """Memoized ``p -> (H(p), DH(p))`` for one model and cell grid."""

    def __init__(self, model: MotorModel, n: int = CELL_GRID, tol: float = EIG_TOL):
        self.model = model.resample(n)
        self.n = n
        self.tol = tol
        self._cache: dict[tuple[float, ...], tuple[float, np.ndarray]] = {}

    def evaluate(self, p) -> tuple[float, np.ndarray]:
        key = tuple(np.atleast_1d(np.asarray(p, dtype=float)).tolist())
        if key not in self._cache:
            try:
                sol = solve_cell(self.model, key, self.n, self.tol)
            except MotorhomError as exc:
                _annotate(exc, key)
                raise
            self._cache[key] = (sol.hbar, dhbar(sol, self.model))
        return self._cache[key]

    def __call__(self, p) -> float:
        return self.evaluate(p)[0]

    def gradient(self, p) -> np.ndarray:
        return self.evaluate(p)[1]


def _annotate(exc: Exception, p) -> None:
    if getattr(exc, "p", None) is None:
        exc.p = p
        if exc.args:
            exc.args = (f"at p={list(p) if len(p) > 1 else p[0]}: {exc.args[0]}",) + exc.args[1:]


def _as_hamiltonian(model, n, tol=EIG_TOL) -> EffectiveHamiltonian:
    if isinstance(model, EffectiveHamiltonian):
        return model
    return EffectiveHamiltonian(model, n, tol)


@dataclass(frozen=True, eq=False)
class HbarTable:
    """Sampled ``H`` and ``DH``.

    ``p_grid`` has shape ``(K,)`` for a 1-D sweep or ``(K, K, 2)`` for a tensor sweep;
    ``dhbar`` has the matching trailing dimension.
    """

    p_grid: np.ndarray
    hbar: np.ndarray
    dhbar: np.ndarray
    fingerprint: str
    n: int
    tol: float = EIG_TOL
    model_name: str = ""

    @property
    def d(self) -> int:
        return 1 if self.p_grid.ndim == 1 else self.p_grid.shape[-1]

    def momenta(self) -> np.ndarray:
        """All momenta as rows of shape ``(M, d)``."""
        return self.p_grid.reshape(-1, self.d)

    def values(self) -> np.ndarray:
        return self.hbar.ravel()

    def to_csv(self, path: str | Path) -> None:
        path = Path(path)
        if self.d == 1:
            header = ["p", "hbar", "dhbar"]
            rows = zip(self.p_grid, self.hbar, self.dhbar)
        else:
            header = ["p1", "p2", "hbar", "dhbar1", "dhbar2"]
            rows = (
                (*pp, hh, *gg)
                for pp, hh, gg in zip(self.momenta(), self.values(), self.dhbar.reshape(-1, 2))
            )
        lines = [",".join(header)] + [",".join(repr(float(v)) for v in row) for row in rows]
        atomic_write_text(path, "\n".join(lines) + "\n")
        atomic_write_text(path.with_suffix(".json"), json.dumps(self.metadata(), indent=2, sort_keys=True) + "\n")

    def metadata(self) -> dict:
        return {
            "model_fingerprint": self.fingerprint,
            "model_name": self.model_name,
            "N": self.n,
            "eigen_tol": self.tol,
            "count": int(self.hbar.size),
            "dimension": self.d,
        }

    @classmethod
    def from_csv(cls, path: str | Path) -> "HbarTable":
        path = Path(path)
        with path.open() as fh:
            rows = list(csv.DictReader(fh))
        meta_path = path.with_suffix(".json")
        meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
        if "p" in rows[0]:
            p = np.array([float(r["p"]) for r in rows])
            h = np.array([float(r["hbar"]) for r in rows])
            g = np.array([float(r["dhbar"]) for r in rows])
        else:
            k = int(round(math.sqrt(len(rows))))
            p = np.array([[float(r["p1"]), float(r["p2"])] for r in rows]).reshape(k, k, 2)
            h = np.array([float(r["hbar"]) for r in rows]).reshape(k, k)
            g = np.array([[float(r["dhbar1"]), float(r["dhbar2"])] for r in rows]).reshape(k, k, 2)
        return cls(
            p_grid=p,
            hbar=h,
            dhbar=g,
            fingerprint=meta.get("model_fingerprint", ""),
            n=int(meta.get("N", 0)),
            tol=float(meta.get("eigen_tol", EIG_TOL)),
            model_name=meta.get("model_name", ""),
        )


def _solve_point(args):
    model, p, n, tol = args
    ham = EffectiveHamiltonian(model, n, tol)
    h, g = ham.evaluate(p)
    return h, g


def sweep(
    model: MotorModel,
    p_min: float,
    p_max: float,
    count: int,
    n: int = CELL_GRID,
    tol: float = EIG_TOL,
    workers: int = 1,
) -> HbarTable:
    """Tabulate ``H`` and ``DH`` on ``count`` uniformly spaced momenta.

    For a 2-D model the grid is the tensor product of the same 1-D spacing.
    """
    if count < 3:
        raise ValidationError("sweep needs at least 3 momenta")
    if not p_min < p_max:
        raise ValidationError("p_min must be smaller than p_max")
    axis = np.linspace(p_min, p_max, count)
    if model.d == 1:
        points = [(float(p),) for p in axis]
    else:
        points = [tuple(map(float, pp)) for pp in itertools.product(axis, repeat=model.d)]
    jobs = [(model, p, n, tol) for p in points]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_solve_point, jobs))
    else:
        results = [_solve_point(job) for job in jobs]
    h = np.array([r[0] for r in results])
    g = np.array([r[1] for r in results])
    if model.d == 1:
        p_grid, h, g = axis, h, g[:, 0]
    else:
        shape = (count,) * model.d
        p_grid = np.array(points).reshape(*shape, model.d)
        h = h.reshape(shape)
        g = g.reshape(*shape, model.d)
    return HbarTable(p_grid=p_grid, hbar=h, dhbar=g, fingerprint=model.fingerprint, n=n, tol=tol, model_name=model.name)


@dataclass
class ConvexityReport:
    passed: bool
    margin: float
    checked: int
    violations: list[tuple] = field(default_factory=list)

    def summary(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"convexity {verdict}: {self.checked} midpoint triples, min margin {self.margin:.6g}"


def check_convexity(table: HbarTable, slack: float = 1e-10) -> ConvexityReport:
    """Strict midpoint convexity over all grid pairs whose midpoint is a grid node.

    A triple counts as violated when ``(H_i + H_j)/2 - H_mid <= 0``.  Pairs closer
    than ``slack`` are treated as equal points and skipped.
    """
    h = np.asarray(table.hbar)
    shape = h.shape
    if h.size < 3:
        raise ValidationError("convexity needs at least 3 points")
    p = table.momenta()
    idx = list(itertools.product(*(range(s) for s in shape)))
    margin = np.inf
    violations = []
    checked = 0
    for a, b in itertools.combinations(idx, 2):
        if any((i + j) % 2 for i, j in zip(a, b)):
            continue
        mid = tuple((i + j) // 2 for i, j in zip(a, b))
        ia, ib = np.ravel_multi_index(a, shape), np.ravel_multi_index(b, shape)
        if np.linalg.norm(p[ia] - p[ib]) <= slack:
            continue
        gap = 0.5 * (h[a] + h[b]) - h[mid]
        checked += 1
        margin = min(margin, gap)
        if gap <= 0:
            violations.append((a, mid, b, float(gap)))
    return ConvexityReport(passed=not violations and checked > 0, margin=float(margin), checked=checked, violations=violations)


@dataclass
class CoercivityReport:
    passed: bool
    min_slack: float
    constants: dict
    violations: list[tuple] = field(default_factory=list)

    def summary(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"coercivity {verdict}: min slack of H >= |p|^2 - C(p) is {self.min_slack:.6g}"


def coercivity_constants(model: MotorModel) -> dict:
    """Sup norms entering ``C(p) = |lap psi| + |p| |D psi| + |nu|``.

    The rate term takes the larger of the two rates: the maximum-principle argument
    bounds ``H`` through ``nu1`` or ``nu2`` depending on which corrector is larger.
    """
    return {
        "lap_psi": model.laplacian_bound(),
        "grad_psi": model.drift_bound(),
        "nu": max(model.nu1.max_abs(), model.nu2.max_abs()),
    }


def coercivity_bound(constants: dict, p) -> float:
    pn = float(np.linalg.norm(np.atleast_1d(p)))
    return constants["lap_psi"] + pn * constants["grad_psi"] + constants["nu"]


def coercivity_check(model: MotorModel, table: HbarTable) -> CoercivityReport:
    consts = coercivity_constants(model)
    slack_min = np.inf
    violations = []
    for p, h in zip(table.momenta(), table.values()):
        slack = h - (float(p @ p) - coercivity_bound(consts, p))
        slack_min = min(slack_min, slack)
        if slack < 0:
            violations.append((p.tolist(), float(h), float(slack)))
    return CoercivityReport(passed=not violations, min_slack=float(slack_min), constants=consts, violations=violations)


def maximizer_radius(model: MotorModel, q: float) -> float:
    """Radius containing the maximizer of ``q p - H(p)`` (from the coercivity bound)."""
    c = coercivity_constants(model)
    b = abs(q) + c["grad_psi"]
    k = c["lap_psi"] + c["nu"]
    return 0.5 * (b + math.sqrt(b * b + 4 * k))


@dataclass(frozen=True)
class ConjugatePoint:
    q: float
    value: float
    p_star: float
    stationarity: float


def legendre_point(
    model: MotorModel | EffectiveHamiltonian,
    q: float,
    n: int = CELL_GRID,
    tol: float = LEGENDRE_TOL,
    p_cap: float = LEGENDRE_P_CAP,
) -> ConjugatePoint:
    """Conjugate ``H*(q)`` together with its maximizer ``p*`` (where ``DH(p*) = q``).

    ``q p - H(p)`` is strictly concave, so ``p*`` is the unique root of
    ``DH(p) - q``.  The root is bracketed between 0 and the coercivity radius (grown
    by doubling if needed, up to ``p_cap``) and refined with Brent's method.
    """
    ham = _as_hamiltonian(model, n)
    if ham.model.d != 1:
        raise NotImplementedError("the conjugate is computed for 1-D models only")
    q = float(q)

    def f(p: float) -> float:
        return float(ham.gradient(p)[0]) - q

    f0 = f(0.0)
    if abs(f0) < tol:
        p_star = 0.0
    else:
        direction = 1.0 if f0 < 0 else -1.0
        radius = min(maximizer_radius(ham.model, q), p_cap)
        while f(direction * radius) * direction < 0:
            if radius >= p_cap:
                raise BracketFailure(f"no sign change of DH(p) - {q} within |p| <= {p_cap}")
            radius = min(2 * radius, p_cap)
        lo, hi = sorted((0.0, direction * radius))
        p_star = brentq(f, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=200)
    resid = f(p_star)
    if abs(resid) >= tol:
        raise BracketFailure(f"stationarity residual {resid:.3g} above {tol:g} at q={q}")
    return ConjugatePoint(q=q, value=float(q * p_star - ham(p_star)), p_star=float(p_star), stationarity=float(abs(resid)))


def legendre(model, q: float, n: int = CELL_GRID, **kwargs) -> float:
    return legendre_point(model, q, n, **kwargs).value


@dataclass(frozen=True)
class VelocityReport:
    v_bar: float
    hstar_at_vbar: float
    coercivity_constant: float
    hbar_at_zero: float
    n: int

    def as_dict(self) -> dict:
        return {
            "v_bar": self.v_bar,
            "hstar_at_vbar": self.hstar_at_vbar,
            "coercivity_constant": self.coercivity_constant,
            "hbar_at_zero": self.hbar_at_zero,
            "N": self.n,
        }


def velocity(model: MotorModel | EffectiveHamiltonian, n: int = CELL_GRID) -> VelocityReport:
    ham = _as_hamiltonian(model, n)
    h0, g0 = ham.evaluate(0.0)
    v = float(g0[0]) if ham.model.d == 1 else g0
    hstar = float(legendre(ham, v)) if ham.model.d == 1 else float("nan")
    c0 = coercivity_bound(coercivity_constants(ham.model), 0.0)
    return VelocityReport(v_bar=v, hstar_at_vbar=hstar, coercivity_constant=c0, hbar_at_zero=h0, n=ham.n)


def hopf_lax_profile(model, t: float, x_grid, n: int = CELL_GRID) -> np.ndarray:
    """``t H*(x/t)``: the rate function of mass started as a point at the origin."""
    if t <= 0:
        raise ValidationError("t must be positive")
    ham = _as_hamiltonian(model, n)
    x = np.asarray(x_grid, dtype=float)
    return np.array([t * legendre(ham, xi / t) for xi in x.ravel()]).reshape(x.shape)
