from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from motorhom.effective import (
    EffectiveHamiltonian,
    HbarTable,
    check_convexity,
    coercivity_check,
    hopf_lax_profile,
    legendre,
    legendre_point,
    sweep,
    velocity,
)
from motorhom.errors import BracketFailure, PecletViolation, ValidationError
from motorhom.model import build_model

GOLDEN = json.loads((Path(__file__).parent / "data" / "vbar_golden.json").read_text())


def test_flat_sweep_is_square(flat):
    t = sweep(flat, -2, 2, 41)
    assert np.max(np.abs(t.hbar - t.p_grid**2)) < 1e-7
    assert np.max(np.abs(t.dhbar - 2 * t.p_grid)) < 1e-7


def test_ratchet_sweep_zero_entry(asym):
    t = sweep(asym, -2, 2, 41)
    assert np.all(np.isfinite(t.hbar))
    assert abs(t.hbar[20]) < 1e-8


def test_symmetric_sweep_even(symmetric):
    t = sweep(symmetric, -1, 1, 21)
    assert np.max(np.abs(t.hbar - t.hbar[::-1])) < 1e-8


def test_sweep_workers_identical(asym):
    a = sweep(asym, -1, 1, 5)
    b = sweep(asym, -1, 1, 5, workers=2)
    assert np.array_equal(a.hbar, b.hbar) and np.array_equal(a.dhbar, b.dhbar)


def test_sweep_validation(flat):
    with pytest.raises(ValidationError):
        sweep(flat, 1, -1, 5)
    with pytest.raises(ValidationError):
        sweep(flat, -1, 1, 2)


def test_sweep_annotates_momentum(asym):
    with pytest.raises(PecletViolation) as info:
        sweep(asym, 38, 40, 3, n=16)
    assert info.value.p is not None


def test_table_csv_round_trip(tmp_path, asym):
    t = sweep(asym, -1, 1, 5)
    t.to_csv(tmp_path / "t.csv")
    back = HbarTable.from_csv(tmp_path / "t.csv")
    assert np.array_equal(back.hbar, t.hbar) and back.fingerprint == asym.fingerprint and back.n == t.n


def test_convexity_reports(flat, asym):
    sq = sweep(flat, -2, 2, 21)
    rep = check_convexity(sq)
    assert rep.passed and rep.margin > 0
    # closest pairs give (H(p-dp) + H(p+dp))/2 - H(p) = dp^2
    assert abs(rep.margin - 0.2**2) < 1e-8
    assert check_convexity(sweep(asym, -2, 2, 21)).passed


def test_convexity_detects_lowered_entry(flat):
    sq = sweep(flat, -2, 2, 21)
    h = sq.hbar.copy()
    h[10] -= 1.0
    rep = check_convexity(HbarTable(sq.p_grid, h, sq.dhbar, sq.fingerprint, sq.n))
    assert not rep.passed
    # the lowered value drags chords that end on it below their midpoints
    assert ((8,), (9,), (10,)) in [v[:3] for v in rep.violations]
    assert all((10,) in (v[0], v[2]) for v in rep.violations)


def test_coercivity(flat, asym, symmetric):
    rep = coercivity_check(flat, sweep(flat, -2, 2, 21))
    assert rep.passed and abs(rep.min_slack - 1.0) < 1e-8
    assert coercivity_check(asym, sweep(asym, -2, 2, 21)).passed
    assert coercivity_check(symmetric, sweep(symmetric, -3, 3, 13)).passed


def test_legendre_of_square(flat):
    assert abs(legendre(flat, 2.0) - 1.0) < 1e-6


@pytest.mark.parametrize("name", ["flat", "symmetric", "asymmetric-ratchet", "two-potential"])
def test_conjugate_vanishes_at_velocity(name):
    model = build_model(name)
    rep = velocity(model)
    assert abs(rep.hstar_at_vbar) < 1e-6
    assert legendre(model, rep.v_bar + 0.5) > 0
    assert legendre(model, rep.v_bar - 0.5) > 0


def test_velocity_values(symmetric, flat):
    assert abs(velocity(symmetric).v_bar) < 1e-7
    assert abs(velocity(flat).v_bar) < 1e-10


@pytest.mark.parametrize("name", ["asymmetric-ratchet", "two-potential", "symmetric"])
def test_velocity_golden(name):
    g = GOLDEN["presets"][name]
    model = build_model(name, GOLDEN["N"])
    assert model.fingerprint == g["fingerprint"]
    v = velocity(model, GOLDEN["N"]).v_bar
    assert abs(v - g["v_bar_solver"]) < 1e-9
    # spectral-Galerkin oracle: second-order discretization error at N = 256
    assert abs(v - g["v_bar_oracle"]) < 1e-5


def test_velocity_nonzero_for_ratchet(asym):
    v = velocity(asym).v_bar
    assert abs(v) > 1e-3


def test_bracket_failure(asym):
    with pytest.raises(BracketFailure):
        legendre_point(asym, 500.0, p_cap=5.0)


def test_fenchel_inequality(asym):
    ham = EffectiveHamiltonian(asym)
    ps = np.linspace(-1.5, 1.5, 13)
    hs = [ham(p) for p in ps]
    for q in np.linspace(-1.0, 1.0, 9):
        hstar = legendre(ham, q)
        for p, h in zip(ps, hs):
            assert hstar >= p * q - h - 1e-9


def test_conjugate_positive_away_from_velocity(asym):
    ham = EffectiveHamiltonian(asym)
    v = velocity(ham).v_bar
    qs = np.linspace(-1.5, 1.5, 31)
    qs = qs[np.abs(qs - v) > 1e-3]
    assert min(legendre(ham, q) for q in qs) > 0


def test_biconjugate(asym):
    # sup_q (p q - H*(q)) is attained at q = DH(p); a fine q grid around it suffices
    ham = EffectiveHamiltonian(asym)
    for p in (-0.8, 0.0, 0.6):
        q0 = float(ham.gradient(p)[0])
        qs = q0 + np.linspace(-0.05, 0.05, 21)
        hstar = np.array([legendre(ham, q) for q in qs])
        assert abs(np.max(p * qs - hstar) - ham(p)) < 1e-4


def test_hopf_lax(flat, asym):
    assert abs(hopf_lax_profile(flat, 1.0, [2.0])[0] - 1.0) < 1e-6
    ham = EffectiveHamiltonian(asym)
    v = velocity(ham).v_bar
    assert abs(hopf_lax_profile(ham, 1.0, [v])[0]) < 1e-6
    x = np.linspace(-2, 2, 101)
    prof = hopf_lax_profile(ham, 1.0, x)  # 101 conjugates
    assert np.all(prof >= -1e-9)
    i = int(np.argmin(prof))
    assert abs(x[i] - v) <= 0.04 / 2 + 1e-12
    assert np.sum(prof < 1e-6) == 0 or np.all(np.abs(x[prof < 1e-6] - v) < 0.04)
