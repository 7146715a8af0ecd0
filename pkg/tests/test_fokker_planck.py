from __future__ import annotations

import math

import numpy as np
import pytest

from motorhom import fokker_planck as fp
from motorhom import kernels
from motorhom.errors import CflViolation, DomainTooSmall, InvalidGrid, InvalidMass, NonFiniteState, ValidationError
from motorhom.model import build_model


def test_single_bump_mass_and_split(flat):
    s = fp.init_state(flat, 1 / 32)
    assert abs(s.total_mass() - 1.0) < 1e-12
    assert np.array_equal(s.n1, s.n2)


def test_two_bumps_per_bump_mass(asym):
    L = 8.0
    s = fp.init_state(asym, 1 / 32, [(-L / 4, 0.3), (L / 4, 0.7)], domain=fp.Domain(length=L))
    assert abs(s.total_mass() - 1.0) < 1e-12
    left = s.x < 0
    assert abs(s.h * (s.n1[left] + s.n2[left]).sum() - 0.3) < 1e-10
    assert abs(s.h * (s.n1[~left] + s.n2[~left]).sum() - 0.7) < 1e-10


def test_initial_rate_profile(flat):
    eps, A = 1 / 16, 2.0
    s = fp.init_state(flat, eps, A=A)
    shape = np.exp(-A * np.abs(s.x) / eps)
    c = 1.0 / (s.h * shape.sum())
    j = int(np.argmin(np.abs(np.abs(s.x) - 0.5)))
    r = -eps * np.log(s.n1[j])
    assert abs(r - (A * abs(s.x[j]) - eps * math.log(c / 2))) < 1e-8


def test_envelope_holds_initially(asym):
    s = fp.init_state(asym, 1 / 32, [(-2.0, 0.4), (1.0, 0.6)])
    d = fp.diagnostics(s)
    assert d.envelope_excess <= 1e-12


def test_init_validation(flat):
    with pytest.raises(DomainTooSmall):
        fp.init_state(flat, 1 / 16, [(3.9, 1.0)], domain=fp.Domain(length=8.0))
    with pytest.raises(DomainTooSmall):
        fp.init_state(flat, 1 / 16, [(5.0, 1.0)], domain=fp.Domain(length=8.0))
    with pytest.raises(InvalidMass):
        fp.init_state(flat, 1 / 16, [(0.0, -1.0)])
    with pytest.raises(InvalidMass):
        fp.init_state(flat, 1 / 16, [(0.0, 0.0)])
    with pytest.raises(ValidationError):
        fp.init_state(flat, 1 / 16, A=0.0)
    with pytest.raises(ValidationError):
        fp.init_state(flat, -1.0)
    with pytest.raises(InvalidGrid):
        fp.init_state(flat, 1 / 16, domain=fp.Domain(periods=7))


def test_domain_rounds_to_even_periods():
    M, m = fp.Domain(length=1.0).resolve(0.3)
    assert M % 2 == 0 and M * 0.3 >= 1.0


def _uniform(model, eps, a, b):
    s = fp.init_state(model, eps)
    s.n1[:] = a
    s.n2[:] = b
    s.I0 = s.total_mass()
    return s


def test_reaction_on_uniform_state(flat):
    eps = 1 / 16
    s = _uniform(flat, eps, 2.0, 0.0)
    dt = s.default_dt()
    out = fp.step(s, dt)
    assert np.max(np.abs(out.n1 + out.n2 - 2.0)) < 1e-12
    assert np.max(np.abs((out.n1 - out.n2) - 2.0 * math.exp(-2 * dt / eps))) < 1e-12


def test_step_conserves_mass(asym, twopot):
    for model in (asym, twopot):
        s = fp.init_state(model, 1 / 32)
        dt = s.default_dt()
        for _ in range(5):
            new = fp.step(s, dt)
            assert abs(new.total_mass() - s.total_mass()) <= 1e-13 * s.total_mass()
            s = new
        assert min(s.n1.min(), s.n2.min()) > 0


def test_cfl_violation(asym):
    s = fp.init_state(asym, 1 / 16)
    with pytest.raises(CflViolation) as info:
        fp.step(s, 2 * s.dt_max())
    assert info.value.dt_max == pytest.approx(s.dt_max())


def test_nonfinite_state(asym):
    s = fp.init_state(asym, 1 / 16)
    s.n1[3] = np.nan
    with pytest.raises(NonFiniteState):
        fp.step(s, s.default_dt())


def test_heat_kernel_variance(flat):
    eps = 1 / 32
    s = fp.init_state(flat, eps)
    var0 = fp.diagnostics(s).spread ** 2
    dt = eps / 8
    out = fp.simulate(s, 100 * dt, dt)
    var = out.snapshots[-1].spread ** 2
    t = out.state.t
    assert abs((var - var0) - 2 * eps * t) < 0.05 * 2 * eps * t


def test_run_zero_time(asym):
    snaps = fp.run(fp.init_state(asym, 1 / 16), 0.0)
    assert len(snaps) == 1 and snaps[0].t == 0.0


def test_run_ratchet_monotone_and_conservative(asym):
    s = fp.init_state(asym, 1 / 32)
    out = fp.simulate(s, 1.0, keep_fields=False)
    ts = [d.t for d in out.snapshots]
    assert all(b > a for a, b in zip(ts, ts[1:]))
    assert abs(ts[-1] - 1.0) < 1e-12
    assert out.max_mass_error < 1e-11
    assert all(d.envelope_excess <= 1e-9 for d in out.snapshots)


def test_symmetric_no_drift(symmetric):
    s = fp.init_state(symmetric, 1 / 16)
    snaps = fp.run(s, 1.0, keep_fields=False)
    assert max(abs(d.com) for d in snaps) <= 3 * s.h


def test_run_deterministic(asym):
    s = fp.init_state(asym, 1 / 16)
    a = fp.run(s, 0.1)
    b = fp.run(s, 0.1)
    assert np.array_equal(a[-1].n1, b[-1].n1) and np.array_equal(a[-1].n2, b[-1].n2)


def test_diagnostics_basic(flat):
    s = fp.init_state(flat, 1 / 32)
    d = fp.diagnostics(s)
    assert abs(d.com) < s.h
    assert np.array_equal(d.r1, d.r2)
    assert d.total == d.mass1 + d.mass2


def test_outside_fraction_shrinks_with_eps(asym):
    fr = []
    for eps in (1 / 32, 1 / 64):
        s = fp.init_state(asym, eps, v_bar=0.053)
        fr.append(fp.run(s, 0.5, keep_fields=False)[-1].outside_fraction)
    assert fr[1] < fr[0]


def test_snapshot_files(tmp_path, asym):
    import json

    s = fp.init_state(asym, 1 / 16)
    out = fp.simulate(s, 0.05, snapshot_every=200)
    manifest = fp.write_snapshots(tmp_path, out)
    data = json.loads(manifest.read_text())
    assert data["mass_conserved"] and data["fingerprint"] == asym.fingerprint
    first = np.loadtxt(tmp_path / data["snapshots"][0]["file"], delimiter=",", skiprows=1)
    assert first.shape == (s.size, 5)
    assert np.allclose(first[:, 1], s.n1)


@pytest.mark.skipif(kernels.compiled_backend is None, reason="extension not built")
def test_simulate_backend_choice(asym):
    s = fp.init_state(asym, 1 / 16)
    a = fp.simulate(s, 0.02, backend="compiled").state
    b = fp.simulate(s, 0.02, backend="python").state
    assert np.max(np.abs(a.n1 - b.n1)) <= 1e-12 * a.n1.max()
