"""Grid calculus on [0, 1]: difference operators, summation by parts, mass.

    python demos/grid_calculus.py
"""

from __future__ import annotations

import numpy as np

from fbpde import GridDomain, cubic
from fbpde.diagnostics import product_rule_residual
from fbpde.dynamics import SolverConfig, integrate
from fbpde.grid import backward_diff, forward_diff, inner_product, laplacian_neumann


def main() -> None:
    d = GridDomain(64)
    f = d.sample(lambda x: np.cos(np.pi * x) + 2.0)
    g = d.sample(lambda x: x * x)

    lap = laplacian_neumann(f)
    exact = -np.pi**2 * np.cos(np.pi * d.nodes)
    print(f"Laplacian error at interior nodes: {np.max(np.abs(lap.values - exact)[1:-1]):.2e}")

    # <Lap f, g> = -<D+f, D+g> on the interval grid
    lhs = inner_product(lap, g)
    rhs = -float(np.sum(forward_diff(f).values[:-1] * forward_diff(g).values[:-1]) * d.spacing)
    print(f"summation by parts: {lhs:.12f} vs {rhs:.12f}")
    print(f"backward difference at x=1: {backward_diff(f).values[-1]:.6f}")

    res = product_rule_residual(f, lambda s: s**3 - s, relative=True)
    print(f"product rule relative residual: {res:.1e}")

    n = cubic()
    u0 = d.function(np.random.default_rng(0).uniform(0.2, 1.8, d.n_nodes))
    traj = integrate(n, u0, SolverConfig(t_end=0.5, record_every=0.05))
    m = traj.masses
    print(f"mass drift over {traj.n_steps} steps: {abs(m[-1] - m[0]):.1e}")


if __name__ == "__main__":
    main()
