from __future__ import annotations

import numpy as np
import pytest

from fbpde.dynamics import SolverConfig, Trajectory, integrate
from fbpde.grid import GridDomain, grid_integral
from fbpde.measures import (
    coarsening_indicator,
    coarsening_report,
    decompose,
    default_cutoff,
    default_window,
    two_phase_check,
    young_histogram,
)
from fbpde.nonlinearity import BranchId, branch_inverse


def test_defaults():
    assert default_cutoff(64, 1.0) == 8.0
    assert default_cutoff(16, 0.59) == 4.0
    assert default_window(16) == 3
    assert default_window(64) == 5
    assert default_window(128) == 9
    assert default_window(512) == 33


class TestHistogram:
    def test_constant_state(self):
        u = GridDomain(16).constant(0.7)
        for h in young_histogram(u, 5, 8, cutoff=4.0):
            assert h.weights.sum() == pytest.approx(1.0)
            assert np.count_nonzero(h.weights) == 1
            k = int(np.argmax(h.weights))
            assert h.edges[k] <= 0.7 <= h.edges[k + 1]
            assert h.deficit == 0.0

    def test_checkerboard(self, cubic_phi):
        c = 0.5
        w1, w3 = branch_inverse(cubic_phi, BranchId.S1, c), branch_inverse(cubic_phi, BranchId.S3, c)
        d = GridDomain(16)
        u = d.function([w1 if i % 2 == 0 else w3 for i in range(17)])
        edges = np.array([0.0, 1.0, 2.0])
        for h in young_histogram(u, 5, 2, cutoff=4.0, edges=edges)[2:-2]:
            assert sorted(h.weights.tolist()) == pytest.approx([0.4, 0.6])

    def test_two_phase_blocks_are_dirac_inside(self):
        u = GridDomain(16).function([0.3] * 8 + [1.8] * 9)
        hs = young_histogram(u, 3, 4, cutoff=4.0)
        assert hs[3].weights.max() == 1.0 and hs[12].weights.max() == 1.0

    def test_deficit_and_normalisation(self, rng):
        u = GridDomain(32).function(rng.uniform(0, 10, 33))
        for h in young_histogram(u, 7, 10, cutoff=5.0):
            assert np.all(h.weights >= 0)
            assert h.weights.sum() + h.deficit == pytest.approx(1.0, abs=1e-12)
        assert "deficit" in young_histogram(u, 7, 10, cutoff=5.0)[0].to_json()

    def test_bad_arguments(self):
        u = GridDomain(8).constant(1.0)
        with pytest.raises(ValueError):
            young_histogram(u, 4, 8, 2.0)
        with pytest.raises(ValueError):
            young_histogram(u, 3, 1, 2.0)


class TestDecompose:
    def test_bounded_state(self, rng):
        u = GridDomain(16).function(rng.uniform(0, 1, 17))
        dec = decompose(u, grid_integral(u), cutoff=4.0)
        assert dec.singular_mass == 0.0
        assert dec.singular_sites.size == 0
        np.testing.assert_array_equal(dec.regular_part.values, u.values)

    def test_single_spike(self):
        v = np.zeros(17)
        v[5] = 50.0
        u = GridDomain(16).function(v)
        dec = decompose(u, grid_integral(u), cutoff=4.0)
        assert dec.singular_sites.tolist() == [5]
        assert dec.mu_tilde.tolist() == [1.0]
        assert dec.singular_mass == pytest.approx(50.0 / 16)
        assert dec.to_json()["sites"] == [5]

    def test_mass_split_and_disintegration(self, rng):
        u = GridDomain(64).function(rng.uniform(0, 1, 65) + 30.0 * (rng.random(65) < 0.1))
        m = grid_integral(u)
        dec = decompose(u, m, cutoff=8.0)
        assert dec.regular_mass + dec.singular_mass == pytest.approx(m, rel=1e-12)
        assert dec.mu_tilde.sum() == pytest.approx(1.0, abs=1e-12)
        assert dec.disintegration_factor == pytest.approx(dec.singular_mass, rel=1e-10)

    def test_cutoff_positive(self):
        with pytest.raises(ValueError):
            decompose(GridDomain(4).constant(1.0), 1.25, 0.0)


class TestCoarsening:
    def test_bounded_trajectory(self, cubic_phi, rng):
        u = GridDomain(16).function(rng.uniform(0, 1.5, 17))
        traj = integrate(cubic_phi, u, SolverConfig(t_end=0.1, record_every=0.01))
        assert np.all(coarsening_indicator(traj, float(traj.masses[0]), 4.0) == 0.0)

    def test_spike_growth_at_n64(self, pm_phi):
        d = GridDomain(64)
        rng = np.random.Generator(np.random.PCG64(7))
        u = d.function(np.clip(rng.uniform(1.0, 3.0, 65), 0, None))
        traj = integrate(pm_phi, u, SolverConfig(t_end=20.0, record_every=0.1))
        m0 = float(traj.masses[0])
        s = coarsening_indicator(traj, m0, default_cutoff(64, 1.0))
        assert s[-1] > s[0] and s[-1] >= 0.5
        assert np.all(s <= 1 + 1e-10)
        rep = coarsening_report(pm_phi, traj, m0, default_cutoff(64, 1.0))
        assert rep.label in ("CONJECTURE-CONSISTENT", "CONJECTURE-INCONSISTENT")

    def test_report_labels(self, pm_phi):
        d = GridDomain(4)
        states = np.array([[1.0, 1.0, 1.0, 1.0, 1.0], [0.5, 0.5, 4.0, 0.5, 0.5]])
        traj = Trajectory(d, [0.0, 1.0], states, dt=1.0)
        rep = coarsening_report(pm_phi, traj, 1.25, cutoff=2.0)
        assert rep.consistent and rep.label == "CONJECTURE-CONSISTENT"
        rep = coarsening_report(pm_phi, Trajectory(d, [0.0, 1.0], states[::-1], dt=1.0), 1.25, 2.0)
        assert not rep.consistent


def test_two_phase_check(cubic_phi):
    c = 0.5
    w1, w3 = branch_inverse(cubic_phi, BranchId.S1, c), branch_inverse(cubic_phi, BranchId.S3, c)
    d = GridDomain(6)
    assert two_phase_check(cubic_phi, d.function([w1] * 4 + [w3] * 3))
    assert two_phase_check(cubic_phi, d.constant(0.3))
    assert not two_phase_check(cubic_phi, d.function([w1] * 4 + [w3 + 0.01] * 3))
