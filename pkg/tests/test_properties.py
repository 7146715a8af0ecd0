from __future__ import annotations

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from motorhom import fokker_planck as fp
from motorhom import kernels
from motorhom.cell import solve_cell
from motorhom.effective import EffectiveHamiltonian, legendre_point
from motorhom.model import PeriodicField, build_model

FLAT = build_model("flat")
ASYM = build_model("asymmetric-ratchet")
HAM = EffectiveHamiltonian(ASYM, 64)

finite = st.floats(-50, 50, allow_nan=False)
fast = settings(max_examples=25, deadline=None)


@fast
@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=16, max_size=16), st.floats(-3, 3, allow_nan=False))
def test_interpolant_reproduces_nodes_and_period(vals, y):
    f = PeriodicField(np.array(vals))
    assert np.allclose(f(f.nodes), vals, atol=1e-10)
    assert abs(f(y + 1.0) - f(y)) < 1e-9 * (1 + f.max_abs())


@fast
@given(finite, finite, st.floats(0.5, 20))
def test_torus_distance_symmetric_and_bounded(a, b, L):
    d = float(fp.torus_distance(np.array(a), b, L))
    assert 0 <= d <= L / 2 + 1e-12
    assert abs(d - float(fp.torus_distance(np.array(b), a, L))) < 1e-9


@fast
@given(finite, st.floats(0.5, 20))
def test_wrap_range(dx, L):
    w = float(fp.wrap(np.array(dx), L))
    assert -L / 2 - 1e-12 <= w < L / 2 + 1e-12


@fast
@given(st.integers(4, 60), st.floats(1e-3, 1e3), st.integers(0, 2**31))
def test_diffusion_factor_positive_solution(J, r, seed):
    off = np.full(J, -r)
    f = kernels.cyclic_factor(off, np.full(J, 1 + 2 * r), off)
    rhs = np.random.default_rng(seed).random(J) + 1e-3
    x = rhs.copy()
    from motorhom._kernels_py import cyclic_solve

    cyclic_solve(x, f.lower, f.inv_beta, f.gamma, f.side, f.last, f.last_diag)
    assert np.all(x > 0)
    # row sums of I - r lap are one, so the solve preserves the total
    assert abs(x.sum() - rhs.sum()) < 1e-9 * rhs.sum() * (1 + r)


@settings(max_examples=10, deadline=None)
@given(st.lists(st.tuples(st.floats(-2.5, 2.5), st.floats(0.05, 1.0)), min_size=1, max_size=3),
       st.integers(1, 40))
def test_simulation_mass_and_positivity(bumps, steps):
    s = fp.init_state(ASYM, 1 / 8, bumps, domain=fp.Domain(length=8.0, cells_per_period=16))
    dt = s.default_dt()
    out = fp.simulate(s, steps * dt, dt, keep_fields=False)
    assert out.max_mass_error < 1e-12
    assert min(out.state.n1.min(), out.state.n2.min()) >= 0


@settings(max_examples=12, deadline=None)
@given(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5), st.floats(0.0, 1.0))
def test_hbar_midpoint_convex(p, q, lam):
    mid = lam * p + (1 - lam) * q
    lhs = HAM(mid)
    rhs = lam * HAM(p) + (1 - lam) * HAM(q)
    assert lhs <= rhs + 1e-9


@settings(max_examples=6, deadline=None)
@given(st.floats(-0.5, 0.5), st.floats(-1.5, 1.5))
def test_fenchel_inequality(q, p):
    pt = legendre_point(HAM, q)
    assert pt.value + HAM(p) >= q * p - 1e-9


@settings(max_examples=8, deadline=None)
@given(st.floats(-2, 2))
def test_flat_cell_is_square(p):
    assert abs(solve_cell(FLAT, p, 32).hbar - p * p) < 1e-9
