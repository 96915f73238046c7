"""Riemann data, phase-transition events and hysteresis traces.

An upward transition at node ``i`` is the crossing of ``u_minus`` from below;
a downward transition is the crossing of ``u_plus`` from above. At such a
crossing the three-point stencil forces

    phi(u_{i-1}) + phi(u_{i+1}) > 2 phi(u_minus)     (upward)
    phi(u_{i-1}) + phi(u_{i+1}) < 2 phi(u_plus)      (downward)

and for Riemann data the crossing node is the last node of the low run
counted from the left (upward) or the first node of the high run counted
from the right (downward). Boundary nodes use the zero-flux ghost value
``u_{-1} = u_0``, ``u_{N+1} = u_N``.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from numpy.typing import NDArray

from .dynamics import SolverConfig, Trajectory, integrate
from .grid import GridDomain, GridFunction
from .nonlinearity import BranchId, Nonlinearity, branch_inverse

__all__ = [
    "HysteresisTrace",
    "PhaseTransitionEvent",
    "RiemannData",
    "TransitionMonitor",
    "detect_transitions",
    "hysteresis_trace",
    "interface_counts",
    "interface_width",
    "make_riemann",
    "make_piecewise",
    "no_transition_predicate",
    "run_riemann",
]


@dataclass(frozen=True)
class RiemannData:
    omega1: float
    omega3: float
    split: int

    def validate(self, n: Nonlinearity, N: int | None = None) -> None:
        if not n.has_third_branch:
            raise ValueError("Riemann data needs a finite u_plus")
        if not 0.0 <= self.omega1 <= n.u_minus:
            raise ValueError(f"omega1={self.omega1} must lie in [0, u_minus={n.u_minus}]")
        if self.omega3 < n.u_plus:
            raise ValueError(f"omega3={self.omega3} must be >= u_plus={n.u_plus}")
        if N is not None and not 0 <= self.split <= N:
            raise ValueError(f"split index {self.split} outside [0, {N}]")


@dataclass(frozen=True)
class PhaseTransitionEvent:
    time: float
    node: int
    direction: Literal["up", "down"]
    pre_value: float
    lhs: float  # phi(u_{i-1}) + phi(u_{i+1}) at the crossing
    rhs: float  # 2 phi(u_minus) or 2 phi(u_plus)
    extremal: bool  # maximality / minimality of the crossing node

    @property
    def trigger_holds(self) -> bool:
        return self.lhs > self.rhs if self.direction == "up" else self.lhs < self.rhs

    def trigger_margin(self) -> float:
        """Signed distance by which the trigger inequality holds."""
        return self.lhs - self.rhs if self.direction == "up" else self.rhs - self.lhs

    def to_json(self) -> str:
        return json.dumps(
            {
                "t": self.time,
                "i": self.node,
                "dir": self.direction,
                "pre": self.pre_value,
                "lhs": self.lhs,
                "rhs": self.rhs,
            }
        )


def make_riemann(n: Nonlinearity, d: RiemannData, N: int) -> GridFunction:
    """``omega1`` on nodes ``0..split``, ``omega3`` on the rest."""
    d.validate(n, N)
    v = np.where(np.arange(N + 1) <= d.split, d.omega1, d.omega3)
    return GridFunction(GridDomain(N), v)


def make_piecewise(N: int, values, breaks) -> GridFunction:
    """Piecewise-constant data: ``values[k]`` up to and including node ``breaks[k]``."""
    if len(values) != len(breaks) + 1:
        raise ValueError("need one more value than break")
    idx = np.searchsorted(np.asarray(breaks), np.arange(N + 1), side="left")
    return GridFunction(GridDomain(N), np.asarray(values, dtype=float)[idx])


def _neighbour_phi_sum(n: Nonlinearity, u: NDArray, i: int) -> float:
    left = u[i - 1] if i > 0 else u[i]
    right = u[i + 1] if i < len(u) - 1 else u[i]
    return float(n.phi(left)) + float(n.phi(right))


def _is_extremal(u: NDArray, i: int, threshold: float, direction: str, tol: float) -> bool:
    if direction == "up":
        low = u <= threshold + tol
        run = len(u) if low.all() else int(np.argmin(low))
        return run - 1 == i
    high = u >= threshold - tol
    run = -1 if high.all() else len(u) - 1 - int(np.argmin(high[::-1]))
    return run + 1 == i


class TransitionMonitor:
    """Step hook for :func:`~fbpde.dynamics.integrate` recording transitions.

    Crossing times are located by linear interpolation inside the step, which
    is exact for the piecewise-linear Euler trajectory. The monitor also keeps
    the largest number of simultaneous spinodal nodes seen at any step.
    """

    def __init__(self, n: Nonlinearity):
        if not n.has_third_branch:
            raise ValueError("transition tracking needs a finite u_plus")
        self.n = n
        self.events: list[PhaseTransitionEvent] = []
        self.max_interface = 0
        self.tol = 1e-7 * n.u_plus

    def __call__(self, t0: float, u0: NDArray, t1: float, u1: NDArray) -> None:
        um, up = self.n.u_minus, self.n.u_plus
        inside = int(np.count_nonzero((u1 > um) & (u1 < up)))
        if inside > self.max_interface:
            self.max_interface = inside
        for threshold, direction, crossed in (
            (um, "up", (u0 < um) & (u1 >= um)),
            (up, "down", (u0 > up) & (u1 <= up)),
        ):
            for i in np.flatnonzero(crossed):
                self.events.append(self._event(t0, u0, t1, u1, int(i), threshold, direction))

    def _event(self, t0, u0, t1, u1, i, threshold, direction) -> PhaseTransitionEvent:
        du = u1[i] - u0[i]
        theta = (threshold - u0[i]) / du if du != 0 else 1.0
        theta = min(max(theta, 0.0), 1.0)
        ustar = u0 + theta * (u1 - u0)
        target = self.n.phi_at_uminus if direction == "up" else self.n.phi_at_uplus
        return PhaseTransitionEvent(
            time=float(t0 + theta * (t1 - t0)),
            node=i,
            direction=direction,
            pre_value=float(ustar[i]),
            lhs=_neighbour_phi_sum(self.n, ustar, i),
            rhs=2.0 * target,
            extremal=_is_extremal(ustar, i, threshold, direction, self.tol),
        )

    def counts(self) -> dict[str, int]:
        up = sum(1 for e in self.events if e.direction == "up")
        return {"up": up, "down": len(self.events) - up}


def detect_transitions(n: Nonlinearity, traj: Trajectory) -> list[PhaseTransitionEvent]:
    """Transitions found by scanning consecutive snapshots of ``traj``.

    Exact when the trajectory holds every step; with sparser sampling the
    crossing time is interpolated between snapshots, and a node that jumps
    across the whole spinodal interval between two snapshots triggers a
    warning.
    """
    mon = TransitionMonitor(n)
    s, t = traj.states, traj.times
    for j in range(len(t) - 1):
        skipped = ((s[j] <= n.u_minus) & (s[j + 1] >= n.u_plus)) | (
            (s[j] >= n.u_plus) & (s[j + 1] <= n.u_minus)
        )
        if skipped.any():
            warnings.warn(
                f"node {int(np.flatnonzero(skipped)[0])} crossed the spinodal interval "
                f"between samples at t={t[j]:.6g} and t={t[j + 1]:.6g}; sample more densely",
                stacklevel=2,
            )
        mon(t[j], s[j], t[j + 1], s[j + 1])
    return mon.events


def run_riemann(
    n: Nonlinearity, u0: GridFunction, cfg: SolverConfig
) -> tuple[Trajectory, TransitionMonitor]:
    """Integrate with a :class:`TransitionMonitor` attached."""
    mon = TransitionMonitor(n)
    traj = integrate(n, u0, cfg, monitor=mon)
    return traj, mon


def interface_counts(n: Nonlinearity, traj: Trajectory) -> NDArray[np.int64]:
    """Number of nodes inside ``(u_minus, u_plus)`` at every sample."""
    s = traj.states
    return np.count_nonzero((s > n.u_minus) & (s < n.u_plus), axis=1)


def interface_width(n: Nonlinearity, traj: Trajectory) -> int:
    return int(interface_counts(n, traj).max())


def no_transition_predicate(n: Nonlinearity, d: RiemannData) -> bool:
    """``phi(omega1) > phi(omega3)``: the interface relaxes without transitions."""
    d.validate(n)
    return float(n.phi(d.omega1)) > float(n.phi(d.omega3))


@dataclass
class HysteresisTrace:
    """Path of one node in the ``(u, phi(u))`` plane.

    ``relay`` is the same path with every passage through the spinodal
    interval replaced by a jump at constant ``phi`` from the branch being left
    to the branch being entered. The trace counts as closed when it has made
    at least one upward and one downward jump and ends on the stable branch
    it started from; the closing segment then runs along that branch.
    ``signed_area`` is the shoelace area of the closed relay path (negative
    means clockwise) and 0 for open traces.
    """

    points: NDArray[np.float64]
    relay: NDArray[np.float64]
    closed: bool
    signed_area: float
    jumps: list[tuple[float, str]] = field(default_factory=list)


def _shoelace(p: NDArray) -> float:
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def hysteresis_trace(n: Nonlinearity, traj: Trajectory, node: int) -> HysteresisTrace:
    if not 0 <= node < traj.domain.n_nodes:
        raise IndexError(f"node {node} outside the grid")
    u = traj.states[:, node]
    v = np.asarray(n.phi(u), dtype=float)
    points = np.column_stack([u, v])

    relay: list[tuple[float, float]] = []
    jumps: list[tuple[float, str]] = []
    branches: list[BranchId] = []
    for t, ui, vi in zip(traj.times, u, v):
        b = n.branch_of(ui)
        if b is BranchId.S2 and n.has_third_branch:
            continue
        if branches and b is not branches[-1]:
            # jump at the level of departure onto the branch being entered
            level = relay[-1][1]
            try:
                target = branch_inverse(n, b, level)
            except ValueError:
                target = float(ui)
            relay.append((target, level))
            jumps.append((float(t), "up" if b is BranchId.S3 else "down"))
        relay.append((float(ui), float(vi)))
        branches.append(b)
    relay_arr = np.array(relay) if relay else np.empty((0, 2))

    kinds = {d for _, d in jumps}
    closed = bool(kinds == {"up", "down"} and branches[0] is branches[-1])
    area = _shoelace(relay_arr) if closed else 0.0
    return HysteresisTrace(points, relay_arr, closed, area, jumps)
