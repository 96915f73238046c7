"""Phase transitions from Riemann data and a hysteresis loop at one node.

    python demos/riemann_hysteresis.py
"""

from __future__ import annotations

from fbpde import cubic
from fbpde.dynamics import SolverConfig
from fbpde.riemann import (
    RiemannData,
    hysteresis_trace,
    make_piecewise,
    make_riemann,
    no_transition_predicate,
    run_riemann,
)


def main() -> None:
    n = cubic()
    for w1, w3 in ((0.5, 1.5), (0.58, 2.0), (0.1, 1.42)):
        data = RiemannData(w1, w3, 16)
        traj, mon = run_riemann(n, make_riemann(n, data, 32), SolverConfig(t_end=3.0, record_every=0.05))
        print(
            f"omega=({w1}, {w3}) predicate={no_transition_predicate(n, data)} "
            f"events={mon.counts()} width={mon.max_interface} converged={traj.converged}"
        )
        for e in mon.events[:3]:
            print("   ", e.to_json())

    # a tall block drives node 2 up; the empty region later pulls it back down
    u0 = make_piecewise(16, [2.5, 0.5, 0.0], [1, 4])
    traj, mon = run_riemann(n, u0, SolverConfig(t_end=3.0))
    h = hysteresis_trace(n, traj, 2)
    print(f"node 2 jumps: {h.jumps}")
    print(f"closed={h.closed} signed area={h.signed_area:.4f} (negative: clockwise)")


if __name__ == "__main__":
    main()
