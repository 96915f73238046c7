"""Measure-valued diagnostics of grid states.

At finite N the Young measure at ``x`` is approximated by the empirical
distribution of values in a window of nodes around ``x``; values above a
cutoff that diverges with N are treated as singular mass. The default cutoff is
``sqrt(N) * max(1, u_minus)``, the default window ``max(3, N/16)`` nodes
rounded to an odd count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .dynamics import Trajectory
from .grid import GridFunction, grid_integral
from .nonlinearity import BranchId, BranchRangeError, Nonlinearity, branch_inverse

__all__ = [
    "CoarseningReport",
    "MeasureDecomposition",
    "ValueHistogram",
    "coarsening_indicator",
    "coarsening_report",
    "decompose",
    "default_cutoff",
    "default_window",
    "two_phase_check",
    "young_histogram",
]


def default_cutoff(N: int, u_minus: float) -> float:
    return math.sqrt(N) * max(1.0, u_minus)


def default_window(N: int) -> int:
    w = max(3, int(round(N / 16)))
    return w if w % 2 else w + 1


@dataclass(frozen=True)
class ValueHistogram:
    x: float
    radius: float
    edges: NDArray[np.float64]
    weights: NDArray[np.float64]
    deficit: float

    def to_json(self) -> dict:
        return {
            "x": self.x,
            "edges": self.edges.tolist(),
            "weights": self.weights.tolist(),
            "deficit": self.deficit,
        }


def young_histogram(
    u: GridFunction,
    window_nodes: int,
    bins: int,
    cutoff: float,
    edges: NDArray | None = None,
) -> list[ValueHistogram]:
    """Sliding-window value distributions, one per node.

    Each window holds the nodes within ``window_nodes // 2`` of the centre
    (truncated at the ends). Weights are fractions of the window's nodes whose
    value falls in each bin; the fraction above ``cutoff`` is the deficit.
    Bin edges default to ``bins`` equal cells spanning the sub-cutoff values.
    """
    if window_nodes < 1 or window_nodes % 2 == 0:
        raise ValueError("window_nodes must be a positive odd integer")
    if bins < 2:
        raise ValueError("bins must be >= 2")
    v = u.values
    regular = v[v <= cutoff]
    if edges is None:
        lo, hi = (float(regular.min()), float(regular.max())) if regular.size else (0.0, cutoff)
        if hi - lo <= 1e-12 * max(1.0, abs(lo)):
            pad = max(1e-9, 1e-9 * abs(lo))
            lo, hi = lo - pad, hi + pad
        edges = np.linspace(lo, hi, bins + 1)
    edges = np.asarray(edges, dtype=float)
    half = window_nodes // 2
    eps = u.spacing
    out = []
    for i in range(len(v)):
        win = v[max(0, i - half) : i + half + 1]
        size = len(win)
        below = win[win <= cutoff]
        counts, _ = np.histogram(below, bins=edges)
        weights = counts / size
        out.append(
            ValueHistogram(
                x=i * eps,
                radius=half * eps,
                edges=edges,
                weights=weights,
                deficit=float(1.0 - len(below) / size),
            )
        )
    return out


@dataclass(frozen=True)
class MeasureDecomposition:
    """Split of a state into a bounded part and above-cutoff spikes."""

    regular_part: GridFunction
    singular_sites: NDArray[np.int64]
    singular_mass: float
    mu_tilde: NDArray[np.float64]
    disintegration_factor: float

    @property
    def regular_mass(self) -> float:
        return grid_integral(self.regular_part)

    def to_json(self) -> dict:
        return {
            "singular_mass": self.singular_mass,
            "sites": self.singular_sites.tolist(),
            "mu_tilde": self.mu_tilde.tolist(),
            "regular_mass": self.regular_mass,
            "disintegration_factor": self.disintegration_factor,
        }


def decompose(u: GridFunction, u0_mass: float, cutoff: float) -> MeasureDecomposition:
    """Regular part ``u * [u <= cutoff]``, singular part on the other nodes.

    ``mu_tilde`` is the normalised distribution of singular mass over its
    sites; ``disintegration_factor = u0_mass - mass(regular part)`` equals the
    singular mass whenever mass is conserved.
    """
    if cutoff <= 0:
        raise ValueError("cutoff must be positive")
    v = u.values
    sing = v > cutoff
    sites = np.flatnonzero(sing)
    regular = u.with_values(np.where(sing, 0.0, v))
    total_sing = float(np.sum(v[sites]))
    mu = v[sites] / total_sing if sites.size else np.empty(0)
    return MeasureDecomposition(
        regular_part=regular,
        singular_sites=sites,
        singular_mass=u.spacing * total_sing,
        mu_tilde=mu,
        disintegration_factor=float(u0_mass) - grid_integral(regular),
    )


def coarsening_indicator(traj: Trajectory, u0_mass: float, cutoff: float) -> NDArray:
    """Singular fraction ``s(t) = singular mass / u0_mass`` at every sample."""
    s = traj.states
    sing = np.where(s > cutoff, s, 0.0).sum(axis=1) * traj.domain.spacing
    return sing / u0_mass


@dataclass
class CoarseningReport:
    """Singular-fraction trend of one run.

    ``consistent`` asks for growth of the singular fraction and a regular part
    that has collapsed to the first stable branch (``<= u_minus + tol``).
    ``monotone_after_transient`` is informational: a shrinking spike falling
    below the cutoff lowers ``s`` even while coarsening proceeds.
    """

    s_initial: float
    s_final: float
    monotone_after_transient: bool
    max_regular_final: float
    regular_bound: float

    @property
    def consistent(self) -> bool:
        return self.s_final > self.s_initial and self.max_regular_final <= self.regular_bound

    @property
    def label(self) -> str:
        return "CONJECTURE-CONSISTENT" if self.consistent else "CONJECTURE-INCONSISTENT"


def coarsening_report(
    n: Nonlinearity,
    traj: Trajectory,
    u0_mass: float,
    cutoff: float,
    transient: float = 0.1,
    slack: float = 1e-3,
    regular_tol: float = 1e-3,
) -> CoarseningReport:
    """Summarise the singular fraction of ``traj``; the first ``transient``
    fraction of samples is ignored for the monotonicity flag."""
    s = coarsening_indicator(traj, u0_mass, cutoff)
    tail = s[int(transient * len(s)) :]
    final = traj.states[-1]
    reg = final[final <= cutoff]
    return CoarseningReport(
        s_initial=float(s[0]),
        s_final=float(s[-1]),
        monotone_after_transient=bool(np.all(np.diff(tail) >= -slack)),
        max_regular_final=float(reg.max()) if reg.size else 0.0,
        regular_bound=n.u_minus + regular_tol,
    )


def two_phase_check(n: Nonlinearity, u: GridFunction, tol: float = 1e-6) -> bool:
    """Whether every value lies within ``tol`` of ``{S1(c), S3(c)}`` for a common level.

    The level is taken as the mean of ``phi(u)``; a homogeneous state on a
    stable branch also passes.
    """
    c = float(np.mean(n.phi(u.values)))
    targets = []
    for b in (BranchId.S1, BranchId.S3):
        try:
            targets.append(branch_inverse(n, b, c))
        except BranchRangeError:
            pass
    if not targets:
        return False
    dist = np.min(np.abs(u.values[:, None] - np.array(targets)[None, :]), axis=1)
    return bool(np.all(dist <= tol))
