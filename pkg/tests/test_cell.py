from __future__ import annotations

import numpy as np
import pytest

from motorhom.cell import (
    adjoint_eigenpair,
    assemble,
    chi_integral,
    chi_residual,
    dhbar,
    principal_eigenpair,
    required_grid,
    solve_cell,
)
from motorhom.errors import InvalidGrid, PecletViolation
from motorhom.model import build_model

from oracles import galerkin_hbar

TWO_PI = 2 * np.pi


def test_flat_operator_annihilates_constants(flat):
    op = assemble(flat, 0.0, 32)
    assert np.max(np.abs(op.apply(np.ones(op.size)))) == 0.0


def test_reaction_columns_cancel(asym):
    # at p = 0 every column of the operator sums to zero: the constant pair is a left null vector
    op = assemble(asym, 0.0, 64)
    assert np.max(np.abs(np.asarray(op.matrix.sum(axis=0)))) < 1e-9


def test_offdiagonal_signs(asym):
    a = -assemble(asym, 0.7, 64).matrix.tocoo()
    off = a.row != a.col
    assert np.all(a.data[off] >= 0)


def test_peclet_guard(asym):
    assemble(asym, 0.0, 64)
    with pytest.raises(PecletViolation) as info:
        assemble(asym, 40.0, 16)
    n_req = info.value.n_required
    assert n_req % 2 == 0 and n_req == required_grid(asym, 40.0)
    assemble(asym, 40.0, n_req)


def test_grid_validation(flat):
    with pytest.raises(InvalidGrid):
        assemble(flat, 0.0, 15)


def test_flat_eigenvalues(flat):
    lam, w = principal_eigenpair(assemble(flat, 0.0, 32), 1e-11)
    assert abs(lam) < 1e-12
    assert np.ptp(w) < 1e-12
    assert abs(solve_cell(flat, 0.5).hbar - 0.25) < 1e-8


def test_flat_unit_momentum(flat):
    sol = solve_cell(flat, 1.0)
    assert abs(sol.hbar - 1.0) < 1e-8
    assert sol.residual < 1e-8
    assert np.ptp(sol.phi1) < 1e-8 and np.ptp(sol.phi2) < 1e-8


@pytest.mark.parametrize("name", ["flat", "symmetric", "asymmetric-ratchet", "two-potential"])
def test_hbar_vanishes_at_zero(name):
    sol = solve_cell(build_model(name), 0.0)
    assert abs(sol.hbar) < 1e-8
    adj = np.concatenate([sol.w1_adj, sol.w2_adj])
    assert np.max(np.abs(adj - 1.0)) < 1e-8


def test_adjoint_matches_primal_flat(flat):
    for p in (-0.8, 0.3, 1.7):
        op = assemble(flat, p, 32)
        lam, w = principal_eigenpair(op, 1e-11)
        lam_a, _ = adjoint_eigenpair(op, 1e-11)
        assert abs(lam - lam_a) < 1e-9


def test_adjoint_positive_and_paired(asym):
    sol = solve_cell(asym, 0.3)
    for f in (sol.w1, sol.w2, sol.w1_adj, sol.w2_adj):
        assert np.all(f > 0)
    pairing = np.mean(sol.w1 * sol.w1_adj + sol.w2 * sol.w2_adj)
    assert abs(pairing - 1.0) < 1e-10


def test_normalization(asym):
    op = assemble(asym, 0.6, 128)
    _, w = principal_eigenpair(op, 1e-11)
    assert abs(chi_integral(op, w) - 1.0) < 1e-10


def test_residual_second_order(asym):
    r64 = solve_cell(asym, 0.0, 64).residual
    r128 = solve_cell(asym, 0.0, 128).residual
    assert r64 / r128 >= 4.0


def test_symmetric_even(symmetric):
    assert abs(solve_cell(symmetric, 0.7).hbar - solve_cell(symmetric, -0.7).hbar) < 1e-8
    assert abs(dhbar(solve_cell(symmetric, 0.0))[0]) < 1e-7


def test_dhbar_flat(flat):
    assert abs(dhbar(solve_cell(flat, 0.5))[0] - 1.0) < 1e-8


@pytest.mark.parametrize("name", ["symmetric", "asymmetric-ratchet", "two-potential"])
def test_dhbar_matches_finite_differences(name):
    model = build_model(name)
    d = 1e-4
    for p in (-1.3, 0.0, 0.45, 1.9):
        fd = (solve_cell(model, p + d).hbar - solve_cell(model, p - d).hbar) / (2 * d)
        assert abs(dhbar(solve_cell(model, p))[0] - fd) < 1e-5


def test_chi_form_consistent(asym):
    for p in (-0.5, 0.8):
        sol = solve_cell(asym, p)
        assert chi_residual(sol) < 10 * sol.residual


def test_grid_convergence_second_order(asym):
    h = [solve_cell(asym, 0.9, n).hbar for n in (32, 64, 128)]
    e1, e2 = abs(h[0] - h[1]), abs(h[1] - h[2])
    assert e1 / e2 > 3.5


def test_matches_spectral_oracle():
    psi = lambda y: 0.7 * np.sin(TWO_PI * y) + 0.35 * np.sin(2 * TWO_PI * y)  # noqa: E731
    nu1 = lambda y: 1.5 + np.cos(TWO_PI * y)  # noqa: E731
    nu2 = lambda y: 1.5 - np.cos(TWO_PI * y)  # noqa: E731
    model = build_model("asymmetric-ratchet")
    for p in (-1.0, 0.5, 1.5):
        ref = galerkin_hbar(psi, nu1, nu2, p)
        assert abs(solve_cell(model, p, 256).hbar - ref) < 2e-5


def test_two_dimensional_flat():
    flat2 = build_model({"psi": {"samples": np.zeros((16, 16))}, "nu1": {"samples": np.ones((16, 16))},
                         "nu2": {"samples": np.ones((16, 16))}})
    sol = solve_cell(flat2, np.array([0.3, -0.4]), 32)
    assert abs(sol.hbar - 0.25) < 1e-8
    assert np.allclose(dhbar(sol), [0.6, -0.8], atol=1e-8)


def test_two_dimensional_separable(asym):
    n = 32
    y = np.arange(n) / n
    y1, _ = np.meshgrid(y, y, indexing="ij")
    m2 = build_model({
        "psi": {"samples": 0.7 * np.sin(TWO_PI * y1) + 0.35 * np.sin(2 * TWO_PI * y1)},
        "nu1": {"samples": 1.5 + np.cos(TWO_PI * y1)},
        "nu2": {"samples": 1.5 - np.cos(TWO_PI * y1)},
    })
    p = np.array([0.4, 0.5])
    h2 = solve_cell(m2, p, n).hbar
    h1 = solve_cell(asym, 0.4, n).hbar
    assert abs(h2 - (h1 + 0.25)) < 1e-9
