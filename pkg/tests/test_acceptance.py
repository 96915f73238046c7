"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v``; the verdicts are printed in the
"acceptance criteria" section of the terminal summary.
"""

from __future__ import annotations

import time
from pathlib import Path

import numpy as np
import pytest

from fbpde.cli import main as cli_main
from fbpde.diagnostics import (
    TestFunction,
    diagnostic_scale,
    first_order_ratio,
    is_nonincreasing,
    lyapunov_series,
    product_rule_residual,
    weak_residual,
)
from fbpde.dynamics import InvariantSetSpec, SolverConfig, check_invariant_set, integrate, rhs
from fbpde.grid import GridDomain
from fbpde.measures import coarsening_report, default_cutoff
from fbpde.nonlinearity import BranchId
from fbpde.riemann import (
    RiemannData,
    make_piecewise,
    make_riemann,
    no_transition_predicate,
    run_riemann,
)
from fbpde.steady_states import (
    SteadyState,
    Verdict,
    check_bound,
    enumerate_steady_states,
    homogeneous_state,
    stability_eigen_oracle,
    stability_recursion,
)

pytestmark = [
    pytest.mark.acceptance,
    pytest.mark.filterwarnings("ignore:.*one-parameter family:UserWarning"),
]

ENUMERATION_MEANS = {"cubic": (0.4, 1.0, 1.6), "perona-malik": (0.5, 2.0)}


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


# 1. discrete product rule


def test_product_rule_identity(acceptance):
    rng = np.random.default_rng(1)

    def run():
        worst = 0.0
        for N in (8, 64, 512):
            d = GridDomain(N)
            for _ in range(100):
                f = d.function(rng.uniform(0.0, 3.0, N + 1))
                g = np.polynomial.Polynomial(rng.uniform(-2.0, 2.0, rng.integers(1, 5)))
                worst = max(worst, product_rule_residual(f, g, relative=True))
        return worst

    worst, secs = _timed(run)
    ok = worst <= 1e-11 and secs < 1.0
    acceptance.record(1, ok, f"max relative residual {worst:.2e} (tol 1e-11), {secs:.2f} s")
    assert worst <= 1e-11
    assert secs < 1.0


# 2. mass conservation


@pytest.mark.parametrize("phi", ["cubic", "perona-malik"])
def test_mass_conservation(acceptance, phi, request):
    n = request.getfixturevalue("cubic_phi" if phi == "cubic" else "pm_phi")
    d = GridDomain(128)
    rng = np.random.default_rng(2)
    u0 = d.function(rng.uniform(0.2, 1.8 if phi == "cubic" else 3.0, 129))
    steps = 100_000

    def run():
        dt = integrate(n, u0, SolverConfig(t_end=0.0)).dt
        T = steps * dt
        return integrate(n, u0, SolverConfig(t_end=T, record_every=T, stop_on_convergence=False))

    traj, secs = _timed(run)
    m = traj.masses
    drift = abs(m[-1] - m[0]) / m[0]
    ok = traj.n_steps == steps and drift <= 1e-10 and secs < 10.0
    _merge(acceptance, 2, phi, ok, f"{phi}: drift {drift:.1e} over {traj.n_steps} steps, {secs:.1f} s")
    assert traj.n_steps == steps
    assert drift <= 1e-10
    assert secs < 10.0


_PARTIAL: dict[int, dict[str, tuple[bool, str]]] = {}


def _merge(acceptance, criterion, key, ok, detail):
    """Combine several parametrised cases into one verdict line."""
    parts = _PARTIAL.setdefault(criterion, {})
    parts[key] = (ok, detail)
    acceptance.record(
        criterion, all(v[0] for v in parts.values()), "; ".join(v[1] for v in parts.values())
    )


# 3. invariant set, and the runs reused by criterion 4


@pytest.fixture(scope="module")
def random_suite(cubic_phi, pm_phi):
    rng = np.random.default_rng(3)
    runs = []
    t0 = time.perf_counter()
    for n in (cubic_phi, pm_phi):
        for _ in range(20):
            N = int(rng.choice([16, 32, 64]))
            if n.has_third_branch:
                mean, amp = rng.uniform(0.2, 2.2), rng.uniform(0.05, 1.0)
            else:
                mean, amp = rng.uniform(0.3, 3.0), rng.uniform(0.05, 1.5)
            u0 = GridDomain(N).function(np.clip(rng.uniform(mean - amp, mean + amp, N + 1), 0, None))
            traj = integrate(n, u0, SolverConfig(t_end=0.5, stop_on_convergence=False))
            runs.append((n, u0, traj))
    return runs, time.perf_counter() - t0


def test_invariant_set(acceptance, random_suite):
    runs, secs = random_suite
    bad = 0
    for n, u0, traj in runs:
        if not check_invariant_set(traj, InvariantSetSpec.for_data(n, u0), rel_tol=1e-9).ok:
            bad += 1
    ok = bad == 0 and secs < 30.0
    acceptance.record(3, ok, f"{bad} of {len(runs)} runs leave the invariant set, {secs:.1f} s")
    assert bad == 0
    assert secs < 30.0


# 5 and 6. steady-state classification over the enumeration


@pytest.fixture(scope="module")
def enumeration(cubic_phi, pm_phi):
    t0 = time.perf_counter()
    states = []
    for n in (cubic_phi, pm_phi):
        for mean in ENUMERATION_MEANS[n.name]:
            for N in range(2, 13):
                for s in enumerate_steady_states(n, N, mean):
                    rec = stability_recursion(n, s).verdict
                    ora = stability_eigen_oracle(n, s).verdict
                    states.append((n, s, rec, ora))
    return states, time.perf_counter() - t0


def test_recursion_matches_oracle(acceptance, enumeration):
    states, secs = enumeration
    compared = [(n, s, r, o) for n, s, r, o in states if o is not Verdict.UNDETERMINED]
    disagree = sum(1 for _, _, r, o in compared if r is not o)
    ok = disagree == 0 and len(compared) > 0 and secs < 10.0
    acceptance.record(
        5, ok, f"{disagree} disagreements over {len(compared)} of {len(states)} states, {secs:.1f} s"
    )
    assert disagree == 0
    assert secs < 10.0


def test_stability_structure(acceptance, enumeration):
    states, _ = enumeration
    problems = []
    n_many = n_zero = n_bound = 0
    for n, s, _, ora in states:
        if s.counts[1] >= 2:
            n_many += 1
            if ora is not Verdict.UNSTABLE:
                problems.append(("n2>=2", s.counts, ora))
        if n.has_third_branch and s.counts[1] == 0:
            n_zero += 1
            if ora is not Verdict.STABLE:
                problems.append(("n2=0", s.counts, ora))
        if ora is Verdict.STABLE and not s.is_homogeneous:
            n_bound += 1
            if not check_bound(n, s):
                problems.append(("bound", s.counts, ora))
    ok = not problems and n_many > 0 and n_zero > 0
    acceptance.record(
        6,
        ok,
        f"{len(problems)} violations; checked {n_many} n2>=2, {n_zero} n2=0, {n_bound} bound cases",
    )
    assert not problems, problems[:5]
    assert n_many > 0 and n_zero > 0


# 7. homogeneous dichotomy and the perturbed run


def _as_steady_state(n, u) -> SteadyState:
    """Wrap a converged grid state as a steady state for the eigen-oracle."""
    config = tuple(int(n.branch_of(float(x)).value) for x in u.values)
    omegas = []
    for k in (1, 2, 3):
        on = [x for x, b in zip(u.values, config) if b == k]
        omegas.append(float(np.mean(on)) if on else None)
    counts = tuple(config.count(k) for k in (1, 2, 3))
    level = float(np.mean(n.phi(u.values)))
    mean = float(np.mean(u.values))
    return SteadyState(level, tuple(omegas), counts, config, mean)


def test_homogeneous_dichotomy(acceptance, cubic_phi, pm_phi):
    wrong = []
    for n, hi in ((cubic_phi, 3.0), (pm_phi, 4.0)):
        for mean in np.linspace(0.05, hi, 20):
            s = homogeneous_state(n, 12, float(mean))
            expect = Verdict.UNSTABLE if n.u_minus < mean < n.u_plus else Verdict.STABLE
            for v in (stability_recursion(n, s).verdict, stability_eigen_oracle(n, s).verdict):
                if v is not expect:
                    wrong.append((n.name, float(mean), v))

    detail = []
    perturbed_ok = True
    rng = np.random.default_rng(7)
    for n, mean in ((cubic_phi, 1.2), (pm_phi, 1.5)):
        d = GridDomain(16)
        u0 = d.function(mean + 1e-3 * rng.standard_normal(17))
        traj = integrate(n, u0, SolverConfig(t_end=200.0, record_every=1.0, convergence_tol=1e-10))
        res = float(np.max(np.abs(rhs(n, traj.final).values)))
        ss = _as_steady_state(n, traj.final)
        verdict = stability_eigen_oracle(n, ss).verdict
        branches = {n.branch_of(float(x)) for x in traj.final.values}
        if n.has_third_branch:
            # literal criterion: every final value on S1 or S3
            good = branches <= {BranchId.S1, BranchId.S3} and len(branches) == 2
        else:
            # without S3 the limit keeps spikes on S2; ask for a stable mixed state instead
            good = not ss.is_homogeneous and verdict is Verdict.STABLE
        run_ok = traj.converged and res <= 1e-9 and good
        perturbed_ok &= run_ok
        detail.append(f"{n.name} mean {mean}: |rhs| {res:.1e}, counts {ss.counts}, {verdict.value}")

    ok = not wrong and perturbed_ok
    acceptance.record(7, ok, f"{len(wrong)} misclassified means; " + "; ".join(detail))
    assert not wrong, wrong
    assert perturbed_ok, detail


# 8 and 9. Riemann grid


OMEGA1 = np.linspace(0.1, 0.58, 5)
OMEGA3 = np.linspace(1.42, 2.0, 5)


@pytest.fixture(scope="module")
def riemann_grid(cubic_phi):
    t0 = time.perf_counter()
    cells = []
    cfg = SolverConfig(t_end=5.0, record_every=0.05)
    for w1 in OMEGA1:
        for w3 in OMEGA3:
            data = RiemannData(float(w1), float(w3), 32)
            traj, mon = run_riemann(cubic_phi, make_riemann(cubic_phi, data, 64), cfg)
            cells.append((data, traj, mon))
    return cells, time.perf_counter() - t0


def test_interface_thinness(acceptance, cubic_phi, riemann_grid):
    cells, secs = riemann_grid
    width = max(mon.max_interface for _, _, mon in cells)
    u0 = make_piecewise(64, [0.58, 2.0, 0.58], [20, 44])
    _, mon2 = run_riemann(cubic_phi, u0, SolverConfig(t_end=5.0, record_every=0.05))
    ok = width <= 1 and mon2.max_interface <= 2 and secs < 60.0
    acceptance.record(
        8,
        ok,
        f"max width {width} on 5x5 grid, {mon2.max_interface} with two jumps "
        f"({len(mon2.events)} events), {secs:.1f} s",
    )
    assert width <= 1
    assert mon2.max_interface <= 2
    assert secs < 60.0


def test_no_transition_corollary(acceptance, cubic_phi, riemann_grid):
    cells, _ = riemann_grid
    quiet = [mon for data, _, mon in cells if no_transition_predicate(cubic_phi, data)]
    noisy = sum(1 for mon in quiet if mon.events)
    events = [e for _, _, mon in cells for e in mon.events]
    failed = sum(1 for e in events if not e.trigger_holds)
    ok = noisy == 0 and failed == 0 and len(quiet) > 0 and len(events) > 0
    acceptance.record(
        9,
        ok,
        f"{noisy} of {len(quiet)} predicate-true cells emit events; "
        f"{failed} of {len(events)} events break their trigger",
    )
    assert noisy == 0 and failed == 0
    assert quiet and events


# 10. coarsening report


@pytest.fixture(scope="module")
def coarsening_runs(pm_phi):
    t0 = time.perf_counter()
    runs = []
    N, T = 64, 40.0
    for seed in range(10):
        rng = np.random.Generator(np.random.PCG64(seed))
        u0 = GridDomain(N).function(rng.uniform(1.0, 3.0, N + 1))
        traj = integrate(pm_phi, u0, SolverConfig(t_end=T, record_every=T / 200))
        runs.append((u0, traj))
    return runs, time.perf_counter() - t0


def test_coarsening_report(acceptance, pm_phi, coarsening_runs):
    runs, secs = coarsening_runs
    cutoff = default_cutoff(64, pm_phi.u_minus)
    reports = [coarsening_report(pm_phi, traj, float(traj.masses[0]), cutoff) for _, traj in runs]
    grew = sum(r.s_final > r.s_initial for r in reports)
    collapsed = sum(r.max_regular_final <= r.regular_bound for r in reports)
    consistent = grew >= 9 and collapsed >= 9
    label = "CONJECTURE-CONSISTENT" if consistent else "CONJECTURE-INCONSISTENT"
    acceptance.record(
        10,
        consistent,
        f"{label}: s grew in {grew}/10, regular part <= u_minus + 1e-3 in {collapsed}/10, {secs:.1f} s",
    )
    # an inconsistent report is a finding about the conjecture, not a test failure
    assert secs < 300.0


# 4. Lyapunov monotonicity along the standard suite


def test_lyapunov_monotone(acceptance, random_suite, riemann_grid, coarsening_runs, cubic_phi, pm_phi):
    series = [(n, u0, traj) for n, u0, traj in random_suite[0]]
    series += [(cubic_phi, traj.initial, traj) for _, traj, _ in riemann_grid[0]]
    series += [(pm_phi, u0, traj) for u0, traj in coarsening_runs[0]]
    bad = 0
    for n, u0, traj in series:
        if not is_nonincreasing(lyapunov_series(n, traj), 1e-10 * diagnostic_scale(u0)):
            bad += 1
    acceptance.record(4, bad == 0, f"{bad} of {len(series)} runs increase L")
    assert bad == 0


# 11. first-order weak residual


@pytest.mark.parametrize("phi", ["cubic", "perona-malik"])
def test_weak_residual_first_order(acceptance, phi, request):
    n = request.getfixturevalue("cubic_phi" if phi == "cubic" else "pm_phi")
    d = GridDomain(32)
    u0 = d.sample(lambda x: 0.5 + 0.3 * np.cos(np.pi * x))
    T = 0.05
    psi = TestFunction.smooth_bump(T)
    res = [
        weak_residual(n, integrate(n, u0, SolverConfig(t_end=T, safety=s, stop_on_convergence=False)), psi)
        for s in (0.8, 0.4)
    ]
    ratio = first_order_ratio(*res)
    ok = 1.6 <= ratio <= 2.4
    _merge(acceptance, 11, phi, ok, f"{phi}: ratio {ratio:.3f} (2 +- 20%)")
    assert ok


# 12. determinism


def test_determinism(acceptance, tmp_path: Path):
    base = ["--phi", "perona-malik", "--N", "32", "--initial", "random:2,1", "--t-end", "0.5"]
    for tag in ("a", "b"):
        assert cli_main(["simulate", *base, "--seed", "11", "--out", str(tmp_path / tag)]) == 0
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    same = [(tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes() for f in files]

    grid = ["--grid", "seed=0,1,2,3", "--grid", "N=16,24"]
    for w in ("1", "4"):
        assert cli_main(["sweep", *base, *grid, "--workers", w, "--out", str(tmp_path / f"w{w}")]) == 0
    sweep_same = (tmp_path / "w1" / "summary.csv").read_bytes() == (
        tmp_path / "w4" / "summary.csv"
    ).read_bytes()
    cells_same = all(
        (tmp_path / "w1" / p.relative_to(tmp_path / "w4")).read_bytes() == p.read_bytes()
        for p in (tmp_path / "w4" / "cells").rglob("*")
        if p.is_file()
    )
    ok = all(same) and sweep_same and cells_same
    acceptance.record(
        12, ok, f"{sum(same)}/{len(files)} files identical on rerun; sweep workers 1 vs 4 identical: {sweep_same and cells_same}"
    )
    assert all(same)
    assert sweep_same and cells_same
