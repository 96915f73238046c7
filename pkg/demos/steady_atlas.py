"""Steady states at a fixed mean and their stability verdicts.

    python demos/steady_atlas.py --N 6 --mean 1.2
"""

from __future__ import annotations

import argparse
import warnings
from collections import Counter

from fbpde import get_nonlinearity
from fbpde.steady_states import enumerate_steady_states, stability_eigen_oracle, stability_recursion


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--phi", default="cubic")
    p.add_argument("--N", type=int, default=6)
    p.add_argument("--mean", type=float, default=1.2)
    args = p.parse_args()

    n = get_nonlinearity(args.phi)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        states = enumerate_steady_states(n, args.N, args.mean)
    tally: Counter = Counter()
    print(f"{'n1':>3} {'n2':>3} {'n3':>3} {'level':>10}  recursion   oracle")
    for s in states:
        rec = stability_recursion(n, s).verdict.value
        ora = stability_eigen_oracle(n, s).verdict.value
        tally[ora] += 1
        print(f"{s.counts[0]:3d} {s.counts[1]:3d} {s.counts[2]:3d} {s.level:10.6f}  {rec:<10}  {ora}")
    print(f"{len(states)} states: " + ", ".join(f"{v} {k}" for k, v in sorted(tally.items())))


if __name__ == "__main__":
    main()
