import csv
import math

import numpy as np
import pytest

from amlab.dirac import commensurate_momentum, scenario
from amlab.grid import Grid3, PhysicalParams, SpinorField, integrate_array
from amlab.scf import HISTORY_COLUMNS, ScfParams, dirac_residual, scf_iterate, self_fields, write_history_csv

FREE = PhysicalParams(e=0.0)
WEAK = PhysicalParams(e=-0.1)


def _monotone(history):
    res = [row["residual"] for row in history]
    return all(b <= a for a, b in zip(res, res[1:]))


@pytest.mark.parametrize("bad", [dict(mix=0.0), dict(mix=1.5), dict(step=0.0), dict(max_iter=-1), dict(tol=-1.0)])
def test_params_validated(bad):
    with pytest.raises(ValueError):
        ScfParams(**bad)


def test_self_fields_uncoupled_are_zero():
    g = Grid3.cube(16, 8.0)
    em = self_fields(scenario("gaussian-spin-up", g, FREE), FREE)
    assert not any(f.data.any() for f in (em.phi, em.A, em.E_long, em.B))


def test_self_fields_magnetic_pattern():
    g = Grid3.cube(32, 8.0)
    params = PhysicalParams(e=-1.0)
    up = self_fields(scenario("gaussian-spin-up", g, params), params)
    down = self_fields(scenario("gaussian-spin-down", g, params), params)
    Bint = integrate_array(up.B.data, g)
    assert abs(Bint[2]) > 0 and np.max(np.abs(Bint[:2])) <= 1e-12 * abs(Bint[2])
    assert np.max(np.abs(down.B.data + up.B.data)) <= 1e-12 * np.max(np.abs(up.B.data))
    assert np.max(np.abs(down.phi.data - up.phi.data)) <= 1e-12 * np.max(np.abs(up.phi.data))


def test_residual_dispersion_and_negative_control():
    g = Grid3.cube(16, 4.0)
    pw = scenario("plane-wave", g, FREE, mode=(0, 0, 1))
    p = commensurate_momentum(g, (0, 0, 1))
    energy, res = dirac_residual(pw, self_fields(pw, FREE), FREE, "spectral")
    assert res <= 1e-10 and abs(energy - math.sqrt(1 + p @ p)) <= 1e-12
    gp = Grid3.cube(24, 8.0)
    packet = scenario("gaussian-spin-up", gp, FREE)
    assert dirac_residual(packet, self_fields(packet, FREE), FREE)[1] > 1e-3


def test_residual_phase_invariant():
    g = Grid3.cube(24, 8.0)
    psi = scenario("torus-m1-spin-up", g, WEAK)
    em = self_fields(psi, WEAK)
    a = dirac_residual(psi, em, WEAK)
    b = dirac_residual(SpinorField(g, psi.data * np.exp(0.7j)), em, WEAK)
    assert abs(a[0] - b[0]) <= 1e-13 and abs(a[1] - b[1]) <= 1e-13


def test_plane_wave_is_fixed_point():
    g = Grid3.cube(16, 4.0)
    pw = scenario("plane-wave", g, FREE, mode=(1, 0, 0))
    state, history = scf_iterate(pw, ScfParams(tol=1e-10), FREE, "spectral")
    assert state.converged and state.iteration == 0 and len(history) == 1
    assert history[0]["residual"] <= 1e-10


@pytest.fixture(scope="module")
def weak_run():
    g = Grid3.cube(24, 8.0)
    psi0 = scenario("gaussian-spin-up", g, WEAK)
    return psi0, scf_iterate(psi0, ScfParams(max_iter=50), WEAK)


def test_weak_coupling_run_descends(weak_run):
    _, (state, history) = weak_run
    assert _monotone(history)
    assert history[-1]["residual"] <= 0.5 * history[0]["residual"]
    assert abs(state.psi.norm2() - 1) <= 1e-12
    assert state.residual >= 0


def test_history_bitwise_reproducible(weak_run):
    psi0, (_, history) = weak_run
    _, again = scf_iterate(psi0, ScfParams(max_iter=5), WEAK)
    assert again == history[:6]


def test_mixing_shares_first_fields():
    g = Grid3.cube(24, 8.0)
    psi0 = scenario("gaussian-spin-up", g, WEAK)
    s1, h1 = scf_iterate(psi0, ScfParams(mix=1.0, max_iter=6), WEAK)
    s2, h2 = scf_iterate(psi0, ScfParams(mix=0.3, max_iter=6), WEAK)
    first = self_fields(psi0.normalized(), WEAK)
    assert h1[0]["residual"] == h2[0]["residual"] and h1[0]["energy"] == h2[0]["energy"]
    energy, res = dirac_residual(psi0.normalized(), first, WEAK)
    assert abs(energy - h1[0]["energy"]) <= 1e-14 and abs(res - h1[0]["residual"]) <= 1e-14
    assert _monotone(h1) and _monotone(h2)
    assert [r["residual"] for r in h1[1:]] != [r["residual"] for r in h2[1:]]


def test_stagnation_is_reported_not_raised():
    g = Grid3.cube(24, 8.0)
    psi0 = scenario("gaussian-spin-up", g, WEAK)
    state, history = scf_iterate(psi0, ScfParams(max_iter=3, step=1e-14, min_step=1e-12), WEAK)
    assert state.stagnated and state.notes and len(history) == 1


def test_history_csv(tmp_path, weak_run):
    _, (_, history) = weak_run
    path = tmp_path / "h.csv"
    write_history_csv(history, path)
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    assert tuple(rows[0]) == HISTORY_COLUMNS
    assert [float(r["residual"]) for r in rows] == [r["residual"] for r in history]
