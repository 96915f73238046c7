"""Explicit time integration of ``u' = Lap(phi(u))`` with zero-flux boundaries.

The scheme is forward Euler, ``u <- u + dt * Lap(phi(u))``. Two step-size
policies are offered:

``"derivation"``
    ``dt = eps**2``, the step of the random-walk derivation of the scheme.
``"cfl"``
    ``dt = safety * eps**2 / (2 * max|phi'|)`` with the maximum taken over the
    invariant set of the data. Under this bound the scheme keeps ``u >= 0``,
    keeps the upper invariant bound when ``u_plus`` is finite, and decreases the
    Lyapunov functional at every step.

Mass is conserved to roundoff by every step because the Neumann Laplacian's
columns sum to zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Literal, Protocol

import numpy as np
from numpy.typing import NDArray

from .grid import GridDomain, GridFunction, _laplacian, laplacian_neumann
from .nonlinearity import Nonlinearity

__all__ = [
    "BlowUpError",
    "InvariantReport",
    "InvariantSetSpec",
    "SolverConfig",
    "StepMonitor",
    "Trajectory",
    "check_invariant_set",
    "integrate",
    "rhs",
    "step",
    "time_step",
]


class BlowUpError(FloatingPointError):
    """The state stopped being finite."""

    def __init__(self, node: int, time: float):
        self.node = node
        self.time = time
        super().__init__(f"non-finite state at node {node}, t={time:.17g}")


class StepMonitor(Protocol):
    """Called by :func:`integrate` after every accepted Euler step."""

    def __call__(self, t0: float, u0: NDArray, t1: float, u1: NDArray) -> None: ...


@dataclass(frozen=True)
class SolverConfig:
    """Integration settings.

    ``convergence_tol=None`` selects ``1e-10 * phi(u_minus) / eps**2``;
    ``record_every=None`` records every step.
    """

    t_end: float = 1.0
    dt_policy: Literal["cfl", "derivation"] = "cfl"
    safety: float = 0.9
    record_every: float | None = None
    convergence_tol: float | None = None
    stop_on_convergence: bool = True

    def __post_init__(self) -> None:
        if not self.t_end >= 0:
            raise ValueError("t_end must be >= 0")
        if self.dt_policy not in ("cfl", "derivation"):
            raise ValueError(f"unknown dt_policy {self.dt_policy!r}")
        if not 0 < self.safety <= 1:
            raise ValueError("safety must lie in (0, 1]")
        if self.record_every is not None and not self.record_every > 0:
            raise ValueError("record_every must be positive")
        if self.convergence_tol is not None and not self.convergence_tol > 0:
            raise ValueError("convergence_tol must be positive")


@dataclass(frozen=True)
class InvariantSetSpec:
    lower: float
    upper: float

    def __post_init__(self) -> None:
        if not self.lower <= self.upper:
            raise ValueError("lower must not exceed upper")

    @classmethod
    def for_data(cls, n: Nonlinearity, u0: GridFunction) -> InvariantSetSpec:
        """``[0, max(|u0|_inf, S3(phi(u_minus)))]``, or ``[0, inf)`` if ``u_plus = inf``."""
        return cls(0.0, n.invariant_upper_bound(float(np.max(np.abs(u0.values)))))


@dataclass
class Trajectory:
    """Sampled solution: ``states[j]`` is the state at ``times[j]``."""

    domain: GridDomain
    times: NDArray[np.float64]
    states: NDArray[np.float64]
    dt: float
    n_steps: int = 0
    converged: bool = False
    final_residual: float = math.nan
    events: list = field(default_factory=list)

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        if self.states.shape != (len(self.times), self.domain.n_nodes):
            raise ValueError("states must have shape (len(times), N+1)")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.times)

    def snapshot(self, j: int) -> GridFunction:
        return GridFunction(self.domain, self.states[j])

    @property
    def initial(self) -> GridFunction:
        return self.snapshot(0)

    @property
    def final(self) -> GridFunction:
        return self.snapshot(-1)

    @property
    def masses(self) -> NDArray[np.float64]:
        return self.domain.spacing * self.states.sum(axis=1)

    @property
    def minima(self) -> NDArray[np.float64]:
        return self.states.min(axis=1)

    @property
    def maxima(self) -> NDArray[np.float64]:
        return self.states.max(axis=1)


def _rhs_values(n: Nonlinearity, u: NDArray, eps: float, out: NDArray | None = None):
    return _laplacian(np.asarray(n.phi(u), dtype=float), eps, out)


def rhs(n: Nonlinearity, u: GridFunction) -> GridFunction:
    """``Lap_Neumann(phi(u))``."""
    return laplacian_neumann(u.map(n.phi))


def step(n: Nonlinearity, u: GridFunction, dt: float, t: float = 0.0) -> GridFunction:
    """One forward-Euler step of size ``dt`` (``t`` only labels blow-up errors)."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    with np.errstate(over="ignore", invalid="ignore"):
        new = u.values + dt * _rhs_values(n, u.values, u.spacing)
    bad = ~np.isfinite(new)
    if bad.any():
        raise BlowUpError(int(np.flatnonzero(bad)[0]), t + dt)
    return u.with_values(new)


def time_step(n: Nonlinearity, u0: GridFunction, cfg: SolverConfig) -> float:
    eps = u0.spacing
    if cfg.dt_policy == "derivation":
        dt = eps * eps
    else:
        upper = n.invariant_upper_bound(float(np.max(u0.values)))
        if math.isinf(upper):
            # mass conservation plus positivity bound every entry by sum(u0)
            upper = max(float(np.sum(u0.values)), 2.0 * n.u_minus)
        lip = n.max_abs_dphi(0.0, upper)
        dt = cfg.safety * eps * eps / (2.0 * lip) if lip > 0 else eps * eps
    if not dt > 0 or not math.isfinite(dt):
        raise ValueError(f"step-size policy produced dt={dt!r}")
    return dt


def integrate(
    n: Nonlinearity,
    u0: GridFunction,
    cfg: SolverConfig,
    monitor: StepMonitor | Callable | None = None,
) -> Trajectory:
    """Advance ``u0`` to ``cfg.t_end`` or until ``max|u'| <= convergence_tol``.

    Snapshots are taken every ``round(record_every / dt)`` steps, plus the
    initial and final states. ``monitor`` sees every step, so events between
    snapshots are not lost.
    """
    if np.any(u0.values < 0):
        raise ValueError("initial data must be nonnegative")
    eps = u0.spacing
    dt = time_step(n, u0, cfg)
    tol = cfg.convergence_tol
    if tol is None:
        tol = 1e-10 * n.phi_at_uminus / (eps * eps)
    every = 1 if cfg.record_every is None else max(1, int(round(cfg.record_every / dt)))

    n_full = int(math.floor(cfg.t_end / dt + 1e-9))
    last = cfg.t_end - n_full * dt
    if last <= 1e-12 * dt:
        last = 0.0
    total = n_full + (1 if last > 0 else 0)

    u = np.array(u0.values, dtype=float)
    r = np.empty_like(u)
    times = [0.0]
    states = [u.copy()]
    converged = False
    k = 0
    t = 0.0
    res = math.nan
    while k < total:
        with np.errstate(over="ignore", invalid="ignore"):
            _rhs_values(n, u, eps, r)
        res = float(np.max(np.abs(r)))
        if res <= tol:
            converged = True
            if cfg.stop_on_convergence:
                break
        h = dt if k < n_full else last
        with np.errstate(over="ignore", invalid="ignore"):
            new = u + h * r
        if not np.all(np.isfinite(new)):
            raise BlowUpError(int(np.flatnonzero(~np.isfinite(new))[0]), t + h)
        k += 1
        t_new = k * dt if k <= n_full else cfg.t_end
        if monitor is not None:
            with np.errstate(over="ignore", invalid="ignore"):
                monitor(t, u, t_new, new)
        u, t = new, t_new
        if k % every == 0 or k == total:
            times.append(t)
            states.append(u.copy())
    else:
        _rhs_values(n, u, eps, r)
        res = float(np.max(np.abs(r)))
        converged = res <= tol

    if times[-1] != t:
        times.append(t)
        states.append(u.copy())
    return Trajectory(
        domain=u0.domain,
        times=np.array(times),
        states=np.array(states),
        dt=dt,
        n_steps=k,
        converged=converged,
        final_residual=res,
        events=list(getattr(monitor, "events", [])),
    )


@dataclass
class InvariantReport:
    violations: list[tuple[int, int, float]]  # (sample, node, value)
    tolerance: float

    @property
    def ok(self) -> bool:
        return not self.violations


def check_invariant_set(
    traj: Trajectory, spec: InvariantSetSpec, rel_tol: float = 1e-9
) -> InvariantReport:
    """Flag every sampled value outside ``[lower - tol, upper + tol]``.

    ``tol = rel_tol * max(1, upper)`` (``upper`` replaced by the data's sup
    norm when it is infinite).
    """
    scale = spec.upper if math.isfinite(spec.upper) else float(np.max(np.abs(traj.states)))
    tol = rel_tol * max(1.0, scale)
    s = traj.states
    bad = (s < spec.lower - tol) | (s > spec.upper + tol)
    rows, cols = np.nonzero(bad)
    return InvariantReport(
        violations=[(int(j), int(i), float(s[j, i])) for j, i in zip(rows, cols)],
        tolerance=tol,
    )
