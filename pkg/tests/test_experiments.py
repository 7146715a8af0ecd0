from __future__ import annotations

import math

import numpy as np
import pytest
from oracles import heat_bump_log_density

from motorhom import experiments as ex
from motorhom import fokker_planck as fp
from motorhom.errors import InconclusiveFit, SnapshotMissing, ValidationError, WindowOverlap


def test_fit_velocity_exact_line():
    t = np.linspace(0, 1, 41)
    v, count = ex.fit_velocity(t, 0.3 + 0.25 * t, 1.0)
    assert v == pytest.approx(0.25, abs=1e-12)
    assert count == 21


def test_fit_velocity_needs_points():
    t = np.linspace(0, 1, 11)
    with pytest.raises(InconclusiveFit):
        ex.fit_velocity(t, t, 1.0)


def test_transport_validation(asym):
    with pytest.raises(ValidationError):
        ex.transport(asym, [1 / 32, 1 / 16])
    with pytest.raises(ValidationError):
        ex.transport(asym, [1 / 16], T=0.0)


def test_transport_flat_zero_velocity(flat):
    rep = ex.transport(flat, [1 / 16], T=0.5)
    assert rep.passed
    assert abs(rep.rows[0].v_meas) < 1e-10
    assert "PASS" in rep.to_text()


def test_multimass_separation_check(asym):
    with pytest.raises(ValidationError):
        ex.multimass(asym, 1 / 16, [(-0.5, 0.5), (0.5, 0.5)], T=0.5)


def test_multimass_overlap(flat):
    # wide bumps on a tight torus: windows of five spreads meet
    res = ex.Resolution(A=0.05)
    with pytest.raises(WindowOverlap):
        ex.multimass(flat, 1 / 16, [(-1.0, 0.5), (1.0, 0.5)], T=0.25, resolution=res)


def test_multimass_flat_split(flat):
    rep = ex.multimass(flat, 1 / 16, [(-2.0, 0.25), (2.0, 0.75)], T=0.5)
    assert rep.passed
    assert rep.window_masses[1] / rep.window_masses[0] == pytest.approx(3.0, rel=1e-4)


def test_harnack_uniform_state_is_flat(flat):
    s = fp.init_state(flat, 1 / 16)
    s.n1[:] = 0.5
    s.n2[:] = 0.5
    s.I0 = s.total_mass()
    rep = ex.harnack_diag(flat, 1 / 16, t0=0.125, state=s)
    assert abs(rep.c_hat) < 1e-10


def test_harnack_needs_fields(flat):
    s = fp.init_state(flat, 1 / 16)
    a = fp.diagnostics(s, keep_fields=False)
    with pytest.raises(SnapshotMissing):
        ex.harnack_constant(a, a, 1 / 16, s.h)


def test_harnack_validation(flat):
    with pytest.raises(ValidationError):
        ex.harnack_diag(flat, 1 / 16, t0=0.01)


def test_flat_harnack_matches_heat_kernel(flat):
    eps, t0 = 1 / 16, 0.25
    res = ex.Resolution()
    rep = ex.harnack_diag(flat, eps, t0, resolution=res)
    s = fp.init_state(flat, eps, A=res.A, domain=res.domain(0.0, t0 + eps))
    r0 = -eps * heat_bump_log_density(s.x, t0, eps, res.A, s.length)
    r1 = -eps * heat_bump_log_density(s.x, t0 + eps, eps, res.A, s.length)
    reach = int(math.floor(eps / s.h + 1e-9))
    c = max(float(np.max(np.roll(r1, -k) - r0)) for k in range(-reach, reach + 1)) / eps
    assert rep.c_hat == pytest.approx(c, rel=0.02)


def test_profile_flat_parabola(flat):
    rep = ex.profile_compare(flat, 1 / 32, 1.0, half_window=0.5, points=11)
    assert rep.passed
    assert rep.sup_gap < 0.15
    assert rep.hopf_lax_at_vbar == pytest.approx(0.0, abs=1e-9)


def test_report_dicts_roundtrip(flat):
    import json

    rep = ex.transport(flat, [1 / 16], T=0.25)
    json.dumps(rep.as_dict())


def test_profile_gap_does_not_grow(asym):
    coarse = ex.profile_compare(asym, 1 / 16, 1.0)
    fine = ex.profile_compare(asym, 1 / 32, 1.0)
    assert fine.sup_gap <= coarse.sup_gap


def test_transport_bias_fixed_by_cells_per_period(asym):
    # with h tied to eps the stepper is scale invariant, so the upwind bias does not move
    rep = ex.transport(asym, [1 / 16, 1 / 32], T=1.0)
    a, b = rep.rows
    assert abs(a.error - b.error) < 1e-12
    assert b.error < rep.tolerance
    assert rep.decreasing_within_noise and not rep.strictly_decreasing
    assert not rep.passed
