"""End-to-end checks tying the cell solver to the simulator.

* :func:`transport` measures the centre-of-mass velocity and compares it with ``v_bar``.
* :func:`multimass` follows several bumps and checks that each keeps its mass.
* :func:`profile_compare` compares ``-eps ln n`` with the Hopf-Lax profile ``t H*(x/t)``.
* :func:`harnack_diag` computes the empirical Harnack constant.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .defaults import CELL_GRID, CELLS_PER_PERIOD, CFL_TARGET, ENVELOPE_A, FINAL_TIME, SNAPSHOTS
from .effective import EffectiveHamiltonian, legendre, velocity
from .errors import DomainTooSmall, InconclusiveFit, SnapshotMissing, ValidationError, WindowOverlap
from .fokker_planck import Diagnostics, Domain, SimState, init_state, simulate, torus_distance, wrap
from .model import MotorModel

# a measured velocity counts as zero when |v_bar| is below this
ZERO_VELOCITY = 1e-8
# outside-window mass above this means the torus is too short for the run
SEAM_MASS_LIMIT = 1e-6


@dataclass(frozen=True)
class Resolution:
    """Simulator resolution: cells per eps-period, upwind CFL target, torus length."""

    cells_per_period: int = CELLS_PER_PERIOD
    cfl: float = CFL_TARGET
    length: float | None = None
    A: float = ENVELOPE_A
    snapshots: int = SNAPSHOTS

    def domain(self, v_bar: float, T: float) -> Domain:
        length = self.length
        if length is None:
            length = 2.0 * (3.0 * max(1.0, abs(v_bar) * T) + 1.0)
        return Domain(length=length, cells_per_period=self.cells_per_period)


def _v_bar(model: MotorModel, v_bar: float | None, n: int) -> float:
    return float(velocity(model, n).v_bar) if v_bar is None else float(v_bar)


def _advance(state: SimState, T: float, res: Resolution, keep_fields: bool):
    dt = state.default_dt(res.cfl)
    steps = max(1, math.ceil(T / dt - 1e-9))
    return simulate(state, T, dt, max(1, steps // res.snapshots), keep_fields=keep_fields)


# ---------------------------------------------------------------- transport


@dataclass(frozen=True)
class TransportRow:
    epsilon: float
    h: float
    dt: float
    v_meas: float
    error: float
    spread: float
    outside_fraction: float
    max_mass_error: float
    snapshots_fitted: int
    times: tuple[float, ...] = field(repr=False, default=())
    com: tuple[float, ...] = field(repr=False, default=())


@dataclass(frozen=True)
class TransportReport:
    model: str
    fingerprint: str
    v_bar: float
    T: float
    rows: tuple[TransportRow, ...]
    strictly_decreasing: bool
    decreasing_within_noise: bool
    final_error: float
    tolerance: float
    passed: bool
    verdict: str

    def as_dict(self) -> dict:
        d = asdict(self)
        d["rows"] = [{k: v for k, v in asdict(r).items() if k not in ("times", "com")} for r in self.rows]
        return d

    def to_text(self) -> str:
        lines = [
            f"transport  model={self.model}  fingerprint={self.fingerprint}",
            f"v_bar = {self.v_bar:.6g}   T = {self.T:g}",
            f"{'eps':>10} {'h':>11} {'v_meas':>12} {'|error|':>11} {'spread':>9} {'outside':>10}",
        ]
        for r in self.rows:
            lines.append(
                f"{r.epsilon:10.6g} {r.h:11.4e} {r.v_meas:12.6g} {r.error:11.4e} {r.spread:9.4g} {r.outside_fraction:10.3e}"
            )
        lines.append(f"verdict: {self.verdict}")
        return "\n".join(lines) + "\n"


def fit_velocity(times: Sequence[float], com: Sequence[float], T: float, t_start: float = 0.0) -> tuple[float, int]:
    """Least-squares slope of ``com(t)`` over the second half of ``[t_start, t_start + T]``."""
    t = np.asarray(times, dtype=float)
    c = np.asarray(com, dtype=float)
    sel = t >= t_start + 0.5 * T - 1e-12
    count = int(sel.sum())
    if count < 10:
        raise InconclusiveFit(f"only {count} snapshots in the fit window; need at least 10")
    return float(np.polyfit(t[sel], c[sel], 1)[0]), count


def _transport_one(args) -> TransportRow:
    model, eps, T, res, v_bar = args
    state = init_state(model, eps, [(0.0, 1.0)], A=res.A, domain=res.domain(v_bar, T), v_bar=v_bar)
    out = _advance(state, T, res, keep_fields=False)
    snaps = out.snapshots
    worst = max(s.outside_fraction for s in snaps)
    if worst > SEAM_MASS_LIMIT:
        raise DomainTooSmall(f"mass fraction {worst:.3g} left the tracking window; lengthen the torus")
    times = [s.t for s in snaps]
    com = [s.com for s in snaps]
    v_meas, count = fit_velocity(times, com, T)
    return TransportRow(
        epsilon=eps, h=state.h, dt=out.dt, v_meas=v_meas, error=abs(v_meas - v_bar),
        spread=snaps[-1].spread, outside_fraction=snaps[-1].outside_fraction,
        max_mass_error=out.max_mass_error, snapshots_fitted=count,
        times=tuple(times), com=tuple(com),
    )


def transport(
    model: MotorModel,
    eps_list: Sequence[float],
    T: float = FINAL_TIME,
    resolution: Resolution | None = None,
    v_bar: float | None = None,
    n: int = CELL_GRID,
    workers: int = 1,
) -> TransportReport:
    """Single unit bump at 0 per eps; compare fitted velocities with ``v_bar``.

    Zero-velocity models pass when every ``|v_meas| <= 3h/T``.  Otherwise the errors
    must strictly decrease as eps decreases and the smallest-eps error must be below
    10% of ``|v_bar|`` (0.02 absolute when ``|v_bar| < 0.2``).  Whether the errors stay
    within the ``2h/T`` noise floor of each other is reported separately.
    """
    eps_list = [float(e) for e in eps_list]
    if not eps_list or any(e <= 0 for e in eps_list):
        raise ValidationError("eps_list must hold positive values")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValidationError("eps_list must be strictly decreasing")
    if not (math.isfinite(T) and T > 0):
        raise ValidationError(f"T must be positive, got {T}")
    res = resolution or Resolution()
    vb = _v_bar(model, v_bar, n)
    jobs = [(model, e, T, res, vb) for e in eps_list]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_transport_one, jobs))
    else:
        rows = [_transport_one(j) for j in jobs]
    errs = [r.error for r in rows]
    strict = all(b < a for a, b in zip(errs, errs[1:]))
    noisy = all(b <= a + 2.0 * r.h / T for a, b, r in zip(errs, errs[1:], rows[1:]))
    if abs(vb) < ZERO_VELOCITY:
        tol = 3.0 * rows[-1].h / T
        passed = all(abs(r.v_meas) <= 3.0 * r.h / T for r in rows)
        verdict = ("PASS" if passed else "FAIL") + ": zero-velocity control, |v_meas| <= 3h/T"
    else:
        tol = 0.02 if abs(vb) < 0.2 else 0.1 * abs(vb)
        passed = strict and errs[-1] < tol
        trend = "strictly decreasing" if strict else ("not strictly decreasing, within the 2h/T noise floor" if noisy else "increasing")
        verdict = (
            f"{'PASS' if passed else 'FAIL'}: errors {trend}; "
            f"smallest-eps error {errs[-1]:.3g} vs tolerance {tol:.3g}"
        )
    return TransportReport(
        model=model.name, fingerprint=model.fingerprint, v_bar=vb, T=float(T), rows=tuple(rows),
        strictly_decreasing=strict, decreasing_within_noise=noisy, final_error=errs[-1],
        tolerance=tol, passed=passed, verdict=verdict,
    )


# ---------------------------------------------------------------- multimass


@dataclass(frozen=True)
class MultimassReport:
    model: str
    epsilon: float
    T: float
    v_bar: float
    centers: tuple[float, ...]
    masses: tuple[float, ...]
    window_centers: tuple[float, ...]
    half_width: float
    window_masses: tuple[float, ...]
    relative_errors: tuple[float, ...]
    inside_fraction: float
    passed: bool

    def as_dict(self) -> dict:
        return asdict(self)

    def to_text(self) -> str:
        lines = [
            f"multimass  model={self.model}  eps={self.epsilon:g}  T={self.T:g}  v_bar={self.v_bar:.6g}",
            f"window half-width {self.half_width:.4g}; mass inside windows {self.inside_fraction:.8f}",
            f"{'center':>9} {'window':>9} {'mass0':>9} {'mass(T)':>11} {'rel.err':>10}",
        ]
        for c, w, m0, m1, e in zip(self.centers, self.window_centers, self.masses, self.window_masses,
                                   self.relative_errors):
            lines.append(f"{c:9.4g} {w:9.4g} {m0:9.4g} {m1:11.6g} {e:10.3e}")
        lines.append(f"verdict: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines) + "\n"


def multimass(
    model: MotorModel,
    epsilon: float,
    bumps: Sequence[tuple[float, float]],
    T: float = FINAL_TIME,
    resolution: Resolution | None = None,
    v_bar: float | None = None,
    n: int = CELL_GRID,
) -> MultimassReport:
    """Run several bumps together; each must stay in its window translated by ``T v_bar``."""
    if not (math.isfinite(T) and T > 0):
        raise ValidationError(f"T must be positive, got {T}")
    res = resolution or Resolution()
    vb = _v_bar(model, v_bar, n)
    bumps = [(float(c), float(w)) for c, w in bumps]
    domain = res.domain(vb, T)
    state = init_state(model, epsilon, bumps, A=res.A, domain=domain, v_bar=vb)
    L = state.length
    sep = 4.0 * max(1.0, abs(vb)) * T
    for i in range(len(bumps)):
        for j in range(i + 1, len(bumps)):
            if float(torus_distance(np.array(bumps[i][0]), bumps[j][0], L)) < sep:
                raise ValidationError(
                    f"bumps at {bumps[i][0]} and {bumps[j][0]} are closer than {sep:g} = 4 max(1,|v_bar|) T"
                )
    out = _advance(state, T, res, keep_fields=True)
    final = out.snapshots[-1]
    rho = final.n1 + final.n2
    x = state.x
    h = state.h
    targets = np.array([c + T * vb for c, _ in bumps])
    dist = np.array([torus_distance(x, c, L) for c in targets])
    owner = np.argmin(dist, axis=0)
    spreads = []
    for k, c in enumerate(targets):
        sel = owner == k
        mass = rho[sel].sum()
        if mass <= 0:
            spreads.append(0.0)
            continue
        u = wrap(x[sel] - c, L)
        mean = np.dot(u, rho[sel]) / mass
        spreads.append(float(math.sqrt(np.dot((u - mean) ** 2, rho[sel]) / mass)))
    w = 5.0 * max(spreads)
    for i in range(len(targets)):
        for j in range(i + 1, len(targets)):
            if float(torus_distance(np.array(targets[i]), targets[j], L)) <= 2.0 * w:
                raise WindowOverlap(f"windows around {targets[i]:.4g} and {targets[j]:.4g} intersect (w={w:.4g})")
    masses = np.array([m for _, m in bumps])
    total = rho.sum() * h
    win = np.array([rho[dist[k] <= w].sum() * h for k in range(len(targets))])
    expected = masses / masses.sum() * state.I0
    rel = np.abs(win - expected) / expected
    inside = float(win.sum() / total)
    passed = inside >= 1.0 - 1e-3 and bool(np.all(rel <= 0.05))
    return MultimassReport(
        model=model.name, epsilon=float(epsilon), T=float(T), v_bar=vb,
        centers=tuple(c for c, _ in bumps), masses=tuple(masses.tolist()),
        window_centers=tuple(float(wrap(np.array(c), L)) for c in targets), half_width=w,
        window_masses=tuple(win.tolist()), relative_errors=tuple(rel.tolist()),
        inside_fraction=inside, passed=passed,
    )


# ---------------------------------------------------------------- profile


@dataclass(frozen=True)
class ProfileReport:
    model: str
    epsilon: float
    t: float
    v_bar: float
    h: float
    half_window: float
    x: tuple[float, ...]
    r_eps: tuple[float, ...]
    hopf_lax: tuple[float, ...]
    sup_gap: float
    argmin_r: float
    argmin_distance: float
    argmin_tolerance: float
    hopf_lax_min: float
    hopf_lax_at_vbar: float
    passed: bool

    def as_dict(self) -> dict:
        return asdict(self)

    def to_text(self) -> str:
        return (
            f"profile  model={self.model}  eps={self.epsilon:g}  t={self.t:g}  v_bar={self.v_bar:.6g}\n"
            f"sup |R_eps - t H*(x/t)| on |x - t v_bar| <= {self.half_window:g}: {self.sup_gap:.4g}\n"
            f"argmin R_eps = {self.argmin_r:.6g}; distance to t v_bar = {self.argmin_distance:.4g}"
            f" (tolerance 5h + 2 eps = {self.argmin_tolerance:.4g})\n"
            f"verdict: {'PASS' if self.passed else 'FAIL'}\n"
        )


def profile_compare(
    model: MotorModel,
    epsilon: float,
    t_eval: float = FINAL_TIME,
    resolution: Resolution | None = None,
    half_window: float = 1.0,
    points: int = 41,
    n: int = CELL_GRID,
    v_bar: float | None = None,
) -> ProfileReport:
    """Compare min-shifted ``min(-eps ln n1, -eps ln n2)`` with ``t H*(x/t)``.

    The Hopf-Lax profile is evaluated at the simulator nodes nearest to ``points``
    equispaced query positions in the window ``|x - t v_bar| <= half_window``.
    ``passed`` refers to the argmin criterion ``|argmin R - t v_bar| <= 5h + 2 eps``.
    """
    if not (math.isfinite(t_eval) and t_eval > 0):
        raise ValidationError(f"t_eval must be positive, got {t_eval}")
    res = resolution or Resolution()
    ham = EffectiveHamiltonian(model, n)
    vb = _v_bar(ham.model, v_bar, n)
    state = init_state(model, epsilon, [(0.0, 1.0)], A=res.A, domain=res.domain(vb, t_eval), v_bar=vb)
    final = _advance(state, t_eval, res, keep_fields=True).snapshots[-1]
    R = np.minimum(final.r1, final.r2)
    R = R - R.min()
    centre = t_eval * vb
    q = np.linspace(centre - half_window, centre + half_window, points)
    idx = np.unique(np.clip(np.round((q - state.x[0]) / state.h).astype(int), 0, state.size - 1))
    xs = state.x[idx]
    hl = np.array([t_eval * legendre(ham, xi / t_eval) for xi in xs])
    gap = float(np.max(np.abs(R[idx] - hl)))
    argmin = float(state.x[int(np.argmin(R))])
    dist = abs(float(wrap(np.array(argmin - centre), state.length)))
    tol = 5.0 * state.h + 2.0 * epsilon
    return ProfileReport(
        model=model.name, epsilon=float(epsilon), t=float(t_eval), v_bar=vb, h=state.h,
        half_window=float(half_window), x=tuple(xs.tolist()), r_eps=tuple(R[idx].tolist()),
        hopf_lax=tuple(hl.tolist()), sup_gap=gap, argmin_r=argmin, argmin_distance=dist,
        argmin_tolerance=tol, hopf_lax_min=float(hl.min()),
        hopf_lax_at_vbar=float(t_eval * legendre(ham, vb)), passed=dist <= tol,
    )


# ---------------------------------------------------------------- harnack


@dataclass(frozen=True)
class HarnackReport:
    model: str
    epsilon: float
    t0: float
    c_hat: float

    def as_dict(self) -> dict:
        return asdict(self)

    def to_text(self) -> str:
        return f"harnack  model={self.model}  eps={self.epsilon:g}  t0={self.t0:g}  C_hat={self.c_hat:.6g}\n"


def harnack_constant(before: Diagnostics, after: Diagnostics, epsilon: float, h: float) -> float:
    """``max (R^j(z', t0+eps) - R^i(z, t0)) / eps`` over species and grid pairs ``|z - z'| <= eps``."""
    if before.r1 is None or after.r1 is None:
        raise SnapshotMissing("snapshots carry no rate fields")
    if abs((after.t - before.t) - epsilon) > 1e-9 * max(1.0, after.t):
        raise SnapshotMissing(f"snapshots at t={before.t:g} and t={after.t:g} are not eps={epsilon:g} apart")
    low = np.minimum(before.r1, before.r2)
    high = np.maximum(after.r1, after.r2)
    reach = int(math.floor(epsilon / h + 1e-9))
    best = -math.inf
    for k in range(-reach, reach + 1):
        best = max(best, float(np.max(np.roll(high, -k) - low)))
    return best / epsilon


def harnack_diag(
    model: MotorModel,
    epsilon: float,
    t0: float = 0.25,
    delta: float = 1.0,
    resolution: Resolution | None = None,
    state: SimState | None = None,
) -> HarnackReport:
    """Empirical Harnack constant from snapshots at ``t0`` and ``t0 + eps``."""
    if not (t0 >= epsilon * delta and delta > 0):
        raise ValidationError(f"need t0 >= eps*delta, got t0={t0}, eps={epsilon}, delta={delta}")
    res = resolution or Resolution()
    if state is None:
        state = init_state(model, epsilon, [(0.0, 1.0)], A=res.A, domain=res.domain(0.0, t0 + epsilon))
    dt = state.default_dt(res.cfl)
    first = simulate(state, t0, dt, snapshot_every=10**9)
    second = simulate(first.state, epsilon, dt, snapshot_every=10**9)
    c = harnack_constant(first.snapshots[-1], second.snapshots[-1], epsilon, state.h)
    return HarnackReport(model=model.name, epsilon=float(epsilon), t0=float(t0), c_hat=c)
