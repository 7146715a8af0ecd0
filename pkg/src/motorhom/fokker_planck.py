"""Mass-conservative simulator of the two-species motor system on a 1-D torus.

Species 1 obeys ``n_t - eps*n_xx - (n*psi'(x/eps))_x + nu1*n/eps = nu2*m/eps`` and species
2 the mirrored equation (drifted by ``psi2`` when the model has one).  Time stepping is
Strang splitting: exact pointwise reaction half steps, explicit upwind drift and
implicit cyclic diffusion.  The stepping loop lives in :mod:`motorhom.kernels`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import kernels
from .defaults import CELLS_PER_PERIOD, CFL_MAX, CFL_TARGET, ENVELOPE_A, SNAPSHOTS
from .errors import CflViolation, DomainTooSmall, InvalidGrid, InvalidMass, NonFiniteState, ValidationError
from .io import write_csv, write_json
from .model import MotorModel, differentiate

DEFAULT_LENGTH = 8.0
# minimum number of steps per eps time unit (accuracy floor when there is no drift)
MIN_STEPS_PER_EPS = 8


@dataclass(frozen=True)
class Domain:
    """Torus ``[-L/2, L/2)`` holding ``periods`` potential periods of width ``eps``.

    Give either ``length`` (rounded up to an even number of periods) or ``periods``.
    """

    length: float | None = None
    periods: int | None = None
    cells_per_period: int = CELLS_PER_PERIOD

    def resolve(self, epsilon: float) -> tuple[int, int]:
        m = int(self.cells_per_period)
        if m < 4 or m != self.cells_per_period:
            raise InvalidGrid(f"cells_per_period must be an integer >= 4, got {self.cells_per_period}")
        if self.periods is not None:
            M = int(self.periods)
            if M != self.periods or M < 2 or M % 2:
                raise InvalidGrid(f"periods must be an even integer >= 2, got {self.periods}")
        else:
            L = DEFAULT_LENGTH if self.length is None else float(self.length)
            if not (math.isfinite(L) and L > 0):
                raise InvalidGrid(f"domain length must be positive, got {self.length}")
            M = 2 * math.ceil(L / (2.0 * epsilon) - 1e-9)
            M = max(M, 2)
        return M, m


@dataclass
class SimState:
    """One simulation state; ``n1``/``n2`` are cell averages on a uniform torus grid."""

    model: MotorModel
    epsilon: float
    periods: int
    m: int
    x: np.ndarray
    n1: np.ndarray
    n2: np.ndarray
    t: float
    I0: float
    A: float
    B: float
    centers: tuple[float, ...]
    masses: tuple[float, ...]
    origin: float
    v_bar: float = 0.0
    nu1: np.ndarray = field(default=None, repr=False)
    nu2: np.ndarray = field(default=None, repr=False)
    a1: np.ndarray = field(default=None, repr=False)
    a2: np.ndarray | None = field(default=None, repr=False)

    @property
    def length(self) -> float:
        return self.periods * self.epsilon

    @property
    def h(self) -> float:
        return self.epsilon / self.m

    @property
    def size(self) -> int:
        return self.x.shape[0]

    def total_mass(self) -> float:
        return float(self.h * (self.n1.sum() + self.n2.sum()))

    def max_speed(self) -> float:
        s = float(np.max(np.abs(self.a1)))
        if self.a2 is not None:
            s = max(s, float(np.max(np.abs(self.a2))))
        return s

    def dt_max(self) -> float:
        s = self.max_speed()
        return math.inf if s == 0.0 else CFL_MAX * self.h / s

    def default_dt(self, cfl: float = CFL_TARGET) -> float:
        """``eps/k`` with the smallest ``k`` meeting ``cfl``, so times ``t0 + eps`` land on steps."""
        k = math.ceil(self.m * self.max_speed() / cfl - 1e-12)
        return self.epsilon / max(k, MIN_STEPS_PER_EPS)

    def copy(self) -> "SimState":
        return replace(self, n1=self.n1.copy(), n2=self.n2.copy())


def torus_distance(x: np.ndarray, c: float, length: float) -> np.ndarray:
    d = np.abs(x - c) % length
    return np.minimum(d, length - d)


def wrap(dx: np.ndarray, length: float) -> np.ndarray:
    """Map displacements into ``[-L/2, L/2)``."""
    return (dx + 0.5 * length) % length - 0.5 * length


def _coefficients(model: MotorModel, m: int, periods: int):
    if model.d != 1:
        raise ValidationError("the simulator is one-dimensional; got a %d-D model" % model.d)
    yc = (np.arange(m) + 0.5) / m
    yf = (np.arange(m) + 1.0) / m
    nu1 = np.tile(np.asarray(model.nu1(yc), dtype=float), periods)
    nu2 = np.tile(np.asarray(model.nu2(yc), dtype=float), periods)
    a1 = -np.tile(np.asarray(differentiate(model.psi1, 1)(yf), dtype=float), periods)
    a2 = None
    if model.psi2 is not None:
        a2 = -np.tile(np.asarray(differentiate(model.psi2, 1)(yf), dtype=float), periods)
    if np.min(nu1) <= 0 or np.min(nu2) <= 0:
        raise ValidationError("switching rates must stay positive at simulator cell centers")
    return nu1, nu2, a1, a2


def init_state(
    model: MotorModel,
    epsilon: float,
    bumps: Sequence[tuple[float, float]] = ((0.0, 1.0),),
    A: float = ENVELOPE_A,
    domain: Domain | None = None,
    v_bar: float = 0.0,
) -> SimState:
    """Sum of normalized ``exp(-A|x - x_j|/eps)`` bumps, split evenly between the species."""
    if not (math.isfinite(epsilon) and epsilon > 0):
        raise ValidationError(f"epsilon must be positive, got {epsilon}")
    if not (math.isfinite(A) and A > 0):
        raise ValidationError(f"envelope rate A must be positive, got {A}")
    bumps = [(float(c), float(w)) for c, w in bumps]
    if not bumps:
        raise InvalidMass("at least one bump is required")
    masses = np.array([w for _, w in bumps])
    if not np.all(np.isfinite(masses)) or np.any(masses < 0) or masses.sum() <= 0:
        raise InvalidMass(f"bump masses must be nonnegative with positive sum, got {masses.tolist()}")
    M, m = (domain or Domain()).resolve(epsilon)
    L = M * epsilon
    h = epsilon / m
    for c, _ in bumps:
        if not math.isfinite(c) or abs(c) >= 0.5 * L:
            raise DomainTooSmall(f"bump center {c} lies outside the torus [-{L / 2:g}, {L / 2:g})")
        if 0.5 * L - abs(c) < 10.0 * epsilon:
            raise DomainTooSmall(f"bump center {c} is within 10*eps of the torus seam at +-{L / 2:g}")
    x = -0.5 * L + (np.arange(M * m) + 0.5) * h
    n = np.zeros_like(x)
    dmin = np.full_like(x, np.inf)
    for c, w in bumps:
        d = torus_distance(x, c, L)
        dmin = np.minimum(dmin, d)
        if w == 0.0:
            continue
        shape = np.exp(-A * d / epsilon)
        n += (0.5 * w / (h * shape.sum())) * shape
    with np.errstate(divide="ignore"):
        B = float(np.max(epsilon * np.log(n) + A * dmin))
    nu1, nu2, a1, a2 = _coefficients(model, m, M)
    origin = float(np.dot(masses, [c for c, _ in bumps]) / masses.sum())
    state = SimState(
        model=model, epsilon=float(epsilon), periods=M, m=m, x=x, n1=n.copy(), n2=n.copy(),
        t=0.0, I0=0.0, A=float(A), B=B, centers=tuple(c for c, _ in bumps),
        masses=tuple(masses.tolist()), origin=origin, v_bar=float(v_bar),
        nu1=nu1, nu2=nu2, a1=a1, a2=a2,
    )
    state.I0 = state.total_mass()
    return state


def make_plan(state: SimState, dt: float) -> kernels.StepPlan:
    if not (math.isfinite(dt) and dt > 0):
        raise ValidationError(f"dt must be positive, got {dt}")
    dt_max = state.dt_max()
    if dt > dt_max * (1 + 1e-12):
        raise CflViolation(dt, dt_max)
    return kernels.make_plan(dt, state.epsilon, state.h, state.nu1, state.nu2, state.a1, state.a2)


def _check(state: SimState) -> None:
    if not (np.all(np.isfinite(state.n1)) and np.all(np.isfinite(state.n2))):
        raise NonFiniteState(f"non-finite density at t={state.t:.6g}")
    if state.n1.min() < 0 or state.n2.min() < 0:
        raise NonFiniteState(f"negative density at t={state.t:.6g}")


def step(state: SimState, dt: float, backend: str | None = None) -> SimState:
    """Return the state after one Strang step of size ``dt``."""
    plan = make_plan(state, dt)
    new = state.copy()
    kernels.advance(new.n1, new.n2, 1, plan, backend)
    new.t = state.t + dt
    _check(new)
    return new


@dataclass(frozen=True)
class Diagnostics:
    t: float
    mass1: float
    mass2: float
    total: float
    com: float
    spread: float
    argmin_r: float
    outside_fraction: float
    window_half_width: float
    envelope_excess: float
    r1: np.ndarray | None = field(default=None, repr=False)
    r2: np.ndarray | None = field(default=None, repr=False)
    n1: np.ndarray | None = field(default=None, repr=False)
    n2: np.ndarray | None = field(default=None, repr=False)

    def scalars(self) -> dict:
        return {
            "t": self.t, "mass1": self.mass1, "mass2": self.mass2, "total": self.total,
            "com": self.com, "spread": self.spread, "argmin_r": self.argmin_r,
            "outside_fraction": self.outside_fraction, "window_half_width": self.window_half_width,
            "envelope_excess": self.envelope_excess,
        }


def envelope_rate(model: MotorModel, A: float) -> float:
    """Growth rate ``D`` of the barrier ``exp((-A d + B + D t)/eps)``."""
    drift = model.drift_bound()
    curv = max(differentiate(p, 2).max_abs() for p in model.potentials if p is not None)
    return A * A + A * drift + curv + model.nu1.max_abs() + model.nu2.max_abs()


def rate_field(n: np.ndarray, epsilon: float) -> np.ndarray:
    """``-eps*ln(n)``; ``inf`` where ``n`` underflowed to zero."""
    with np.errstate(divide="ignore"):
        return -epsilon * np.log(n)


def diagnostics(state: SimState, keep_fields: bool = True, half_width: float | None = None) -> Diagnostics:
    h, L, eps = state.h, state.length, state.epsilon
    rho = state.n1 + state.n2
    mass1 = float(h * state.n1.sum())
    mass2 = float(h * state.n2.sum())
    total = mass1 + mass2
    u = wrap(state.x - state.origin, L)
    com_rel = float(np.dot(u, rho) * h / total)
    v = wrap(u - com_rel, L)
    spread = float(math.sqrt(max(np.dot(v * v, rho) * h / total, 0.0)))
    com = state.origin + com_rel
    r1 = rate_field(state.n1, eps)
    r2 = rate_field(state.n2, eps)
    argmin_r = float(state.x[int(np.argmin(np.minimum(r1, r2)))])
    if half_width is None:
        half_width = 3.0 * max(1.0, abs(state.v_bar) * state.t)
    outside = np.abs(v) > half_width
    outside_fraction = float(rho[outside].sum() * h / total)
    dmin = np.min([torus_distance(state.x, c, L) for c in state.centers], axis=0)
    D = envelope_rate(state.model, state.A)
    with np.errstate(divide="ignore"):
        top = eps * np.log(np.maximum(state.n1, state.n2))
    excess = float(np.max(top + state.A * dmin) - state.B - D * state.t)
    return Diagnostics(
        t=float(state.t), mass1=mass1, mass2=mass2, total=total, com=com, spread=spread,
        argmin_r=argmin_r, outside_fraction=outside_fraction, window_half_width=float(half_width),
        envelope_excess=excess,
        r1=r1 if keep_fields else None, r2=r2 if keep_fields else None,
        n1=state.n1.copy() if keep_fields else None, n2=state.n2.copy() if keep_fields else None,
    )


@dataclass
class RunResult:
    state: SimState
    snapshots: list[Diagnostics]
    dt: float
    steps: int
    backend: str
    max_mass_error: float


def simulate(
    state: SimState,
    T: float,
    dt: float | None = None,
    snapshot_every: int | None = None,
    keep_fields: bool = True,
    backend: str | None = None,
) -> RunResult:
    """Advance a copy of ``state`` by ``T``, recording diagnostics every ``snapshot_every`` steps.

    When ``dt`` does not divide ``T`` it is reduced to ``T/ceil(T/dt)``.  The final time
    is always recorded.
    """
    if not (math.isfinite(T) and T >= 0):
        raise ValidationError(f"T must be nonnegative, got {T}")
    cur = state.copy()
    backend = backend or kernels.BACKEND
    if T == 0:
        return RunResult(cur, [diagnostics(cur, keep_fields)], 0.0, 0, backend, 0.0)
    dt = state.default_dt() if dt is None else float(dt)
    if not (math.isfinite(dt) and dt > 0):
        raise ValidationError(f"dt must be positive, got {dt}")
    nsteps = max(1, math.ceil(T / dt - 1e-9))
    dt = T / nsteps
    plan = make_plan(cur, dt)
    if snapshot_every is None:
        snapshot_every = max(1, nsteps // SNAPSHOTS)
    snapshot_every = int(snapshot_every)
    if snapshot_every < 1:
        raise ValidationError("snapshot_every must be >= 1")
    t0 = cur.t
    snaps = [diagnostics(cur, keep_fields)]
    worst = 0.0
    done = 0
    while done < nsteps:
        k = min(snapshot_every, nsteps - done)
        kernels.advance(cur.n1, cur.n2, k, plan, backend)
        done += k
        cur.t = t0 + done * dt
        _check(cur)
        d = diagnostics(cur, keep_fields)
        worst = max(worst, abs(d.total - cur.I0) / cur.I0)
        snaps.append(d)
    return RunResult(cur, snaps, dt, nsteps, backend, worst)


def run(state: SimState, T: float, dt: float | None = None, snapshot_every: int | None = None,
        **kwargs) -> list[Diagnostics]:
    return simulate(state, T, dt, snapshot_every, **kwargs).snapshots


def write_snapshots(out_dir: str | Path, result: RunResult) -> Path:
    """One CSV per snapshot (x, n1, n2, r1, r2) plus ``manifest.json``; returns the manifest path."""
    out = Path(out_dir)
    st = result.state
    files = []
    for i, d in enumerate(result.snapshots):
        if d.n1 is None:
            continue
        name = f"snapshot_{i:04d}.csv"
        write_csv(out / name, {"x": st.x, "n1": d.n1, "n2": d.n2, "r1": d.r1, "r2": d.r2})
        files.append({"file": name, "t": d.t})
    manifest = {
        "model": st.model.name,
        "fingerprint": st.model.fingerprint,
        "epsilon": st.epsilon,
        "h": st.h,
        "dt": result.dt,
        "steps": result.steps,
        "length": st.length,
        "cells": st.size,
        "A": st.A,
        "B": st.B,
        "envelope_D": envelope_rate(st.model, st.A),
        "bumps": [[c, w] for c, w in zip(st.centers, st.masses)],
        "initial_mass": st.I0,
        "max_relative_mass_error": result.max_mass_error,
        "mass_conserved": bool(result.max_mass_error < 1e-11),
        "backend": result.backend,
        "snapshots": files,
        "diagnostics": [d.scalars() for d in result.snapshots],
    }
    path = out / "manifest.json"
    write_json(path, manifest)
    return path
