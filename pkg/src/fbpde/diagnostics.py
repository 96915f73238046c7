"""Lyapunov functional, entropy pairs and weak-form residuals.

For a nondecreasing ``g`` the entropy ``G(x) = int_0^x g(phi(s)) ds`` obeys,
along the semi-discrete flow and at every interior node, the exact identity

    d/dt G(u) = D-( g(phi(u)) D+ phi(u) ) - D- g(phi(u)) * D- phi(u),

which is the discrete product rule applied to ``f = phi(u)``. Its weak-in-time
counterpart with the last term replaced by ``g'(phi) |D- phi|^2`` is the
entropy inequality checked by :func:`entropy_inequality_residual`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial import Polynomial
from numpy.typing import ArrayLike, NDArray

from .dynamics import Trajectory
from .grid import GridDomain, GridFunction, _backward_diff, _forward_diff, _laplacian
from .nonlinearity import Nonlinearity, potential

__all__ = [
    "CumulativeQuadrature",
    "EntropyPair",
    "TestFunction",
    "diagnostic_scale",
    "entropy_identity_residual",
    "entropy_inequality_residual",
    "first_order_ratio",
    "g_range_max",
    "is_nonincreasing",
    "lyapunov",
    "lyapunov_series",
    "product_rule_residual",
    "weak_residual",
]

# 8-point Gauss-Legendre rule on [0, 1]
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


class CumulativeQuadrature:
    """``F(x) = int_0^x f(s) ds`` for ``x >= 0`` from a lazily grown table.

    The table holds ``F`` at multiples of ``h``; a query adds one
    Gauss-Legendre panel from the nearest table node below.
    """

    def __init__(self, f: Callable[[NDArray], NDArray], h: float = 1.0 / 64):
        self.f = f
        self.h = h
        self._table = np.zeros(1)

    def _panel(self, a: NDArray, b: NDArray) -> NDArray:
        w = b - a
        pts = a[..., None] + w[..., None] * _GL_X
        return w * (np.asarray(self.f(pts), dtype=float) @ _GL_W)

    def _grow(self, n_cells: int) -> None:
        have = len(self._table) - 1
        if n_cells <= have:
            return
        n_cells = max(n_cells, 2 * have)
        a = np.arange(have, n_cells) * self.h
        inc = self._panel(a, a + self.h)
        self._table = np.concatenate([self._table, self._table[-1] + np.cumsum(inc)])

    def __call__(self, x: ArrayLike) -> NDArray:
        x = np.asarray(x, dtype=float)
        if np.any(x < 0):
            raise ValueError("cumulative quadrature is defined for x >= 0")
        k = np.floor(x / self.h).astype(int)
        self._grow(int(k.max(initial=0)) + 1)
        a = k * self.h
        return self._table[k] + self._panel(a, x)


@dataclass(frozen=True, eq=False)
class EntropyPair:
    """A nondecreasing ``g`` and its entropy ``G(x) = int_0^x g(phi(s)) ds``."""

    nonlinearity: Nonlinearity
    g: Callable[[ArrayLike], ArrayLike]
    dg: Callable[[ArrayLike], ArrayLike]
    _G: CumulativeQuadrature = field(init=False, repr=False)

    def __post_init__(self) -> None:
        phi, g = self.nonlinearity.phi, self.g
        object.__setattr__(self, "_G", CumulativeQuadrature(lambda s: g(phi(s))))

    @classmethod
    def polynomial(cls, n: Nonlinearity, coeffs: ArrayLike) -> EntropyPair:
        """``g`` given by power-series coefficients (lowest degree first)."""
        p = Polynomial(coeffs)
        return cls(n, p, p.deriv())

    def G(self, u: ArrayLike) -> NDArray:
        return self._G(u)

    def check_monotone(self, lo: float, hi: float, samples: int = 1000) -> bool:
        return bool(np.all(np.asarray(self.dg(np.linspace(lo, hi, samples))) >= 0))


@dataclass(frozen=True, eq=False)
class TestFunction:
    """Space-time test function with analytic time derivative.

    ``value(t, x)`` and ``dt_value(t, x)`` must broadcast over ``x`` arrays.
    """

    __test__ = False  # not a pytest class

    value: Callable[[float, NDArray], NDArray]
    dt_value: Callable[[float, NDArray], NDArray]
    horizon: float
    nonnegative: bool = True

    @classmethod
    def separable(
        cls, horizon: float, bump: Callable[[NDArray], NDArray], power: float = 1.0
    ) -> TestFunction:
        """``psi(t, x) = b(x) * (T - t)**p``."""
        T, p = float(horizon), float(power)
        nonneg = bool(np.all(bump(np.linspace(0.0, 1.0, 1001)) >= 0))
        return cls(
            value=lambda t, x: bump(x) * (T - t) ** p,
            dt_value=lambda t, x: -p * bump(x) * (T - t) ** (p - 1.0),
            horizon=T,
            nonnegative=nonneg,
        )

    @classmethod
    def smooth_bump(
        cls, horizon: float, center: float = 0.5, width: float = 0.3, power: float = 2.0
    ) -> TestFunction:
        """Separable test function with ``b = cos^2`` bump, zero outside ``|x-c| < w``."""

        def bump(x):
            z = np.clip((np.asarray(x) - center) / width, -1.0, 1.0)
            return np.cos(0.5 * np.pi * z) ** 2

        return cls.separable(horizon, bump, power)

    def on_grid(self, t: float, domain: GridDomain) -> NDArray:
        return np.asarray(self.value(t, domain.nodes), dtype=float) * np.ones(domain.n_nodes)

    def dt_on_grid(self, t: float, domain: GridDomain) -> NDArray:
        return np.asarray(self.dt_value(t, domain.nodes), dtype=float) * np.ones(domain.n_nodes)

    def validate(self, domain: GridDomain, times: NDArray) -> None:
        end = self.on_grid(self.horizon, domain)
        if np.max(np.abs(end)) > 1e-12:
            raise ValueError("test function must vanish at t = T")
        if self.nonnegative:
            for t in times:
                if np.min(self.on_grid(t, domain)) < 0:
                    raise ValueError("test function flagged nonnegative takes negative values")


def diagnostic_scale(u0: GridFunction, g_max: float = 0.0) -> float:
    """``(1 + |u0|_1) * (1 + max|g|)``."""
    return (1.0 + u0.spacing * float(np.sum(np.abs(u0.values)))) * (1.0 + abs(g_max))


# Lyapunov functional


def lyapunov(n: Nonlinearity, u: GridFunction) -> float:
    """``L(u) = eps * sum_i V(u_i)`` with ``V`` the potential of phi."""
    if np.any(u.values < 0):
        raise ValueError("Lyapunov functional needs u >= 0")
    return float(u.spacing * np.sum(potential(n, u.values)))


def lyapunov_series(n: Nonlinearity, traj: Trajectory) -> NDArray[np.float64]:
    return traj.domain.spacing * np.sum(potential(n, traj.states), axis=1)


# Exact identities


def product_rule_residual(
    f: GridFunction, g: Callable[[ArrayLike], ArrayLike], relative: bool = False
) -> float:
    """Max interior discrepancy of ``D-(g(f) D+f) = g(f) Lap f + D-f D-g(f)``.

    With ``relative=True`` the discrepancy is divided by the largest magnitude
    among the terms, which grow like ``eps**-2``.
    """
    eps = f.spacing
    v = f.values
    gv = np.asarray(g(v), dtype=float)
    lhs = _backward_diff(gv * _forward_diff(v, eps), eps)[1:-1]
    lap = _laplacian(v, eps)[1:-1]
    t1 = gv[1:-1] * lap
    t2 = _backward_diff(v, eps)[1:-1] * _backward_diff(gv, eps)[1:-1]
    res = float(np.max(np.abs(lhs - (t1 + t2))))
    if relative:
        size = max(np.max(np.abs(lhs)), np.max(np.abs(t1)), np.max(np.abs(t2)))
        return res / size if size > 0 else res
    return res


def entropy_identity_residual(
    n: Nonlinearity, pair: EntropyPair, u: GridFunction, relative: bool = False
) -> float:
    """Max interior gap between ``G(u)_t`` and its divergence form.

    ``G(u)_t`` is evaluated by the chain rule, ``g(phi(u)) * Lap phi(u)``.
    """
    eps = u.spacing
    p = np.asarray(n.phi(u.values), dtype=float)
    gp = np.asarray(pair.g(p), dtype=float)
    dGdt = (gp * _laplacian(p, eps))[1:-1]
    div = _backward_diff(gp * _forward_diff(p, eps), eps)[1:-1]
    cross = (_backward_diff(gp, eps) * _backward_diff(p, eps))[1:-1]
    res = float(np.max(np.abs(dGdt - (div - cross))))
    if relative:
        size = max(np.max(np.abs(dGdt)), np.max(np.abs(div)), np.max(np.abs(cross)))
        return res / size if size > 0 else res
    return res


# Space-time residuals


def _time_weights(times: NDArray) -> NDArray:
    # left-endpoint rule matching the explicit scheme
    w = np.zeros_like(times)
    w[:-1] = np.diff(times)
    return w


def weak_residual(n: Nonlinearity, traj: Trajectory, psi: TestFunction) -> float:
    """``int_0^T <u, psi_t> + <phi(u), Lap psi> dt + <u0, psi(0)>``.

    Zero for the exact semi-discrete flow; for the sampled Euler trajectory
    the time quadrature leaves an O(dt + sample spacing) remainder.
    """
    dom = traj.domain
    eps = dom.spacing
    if abs(traj.times[-1] - psi.horizon) > 1e-9 * max(1.0, psi.horizon):
        raise ValueError("test function horizon must equal the trajectory end time")
    if np.max(np.abs(psi.on_grid(psi.horizon, dom))) > 1e-12:
        raise ValueError("test function must vanish at t = T")
    w = _time_weights(traj.times)
    total = 0.0
    for j, t in enumerate(traj.times[:-1]):
        u = traj.states[j]
        integrand = np.dot(u, psi.dt_on_grid(t, dom)) + np.dot(
            np.asarray(n.phi(u), dtype=float), _laplacian(psi.on_grid(t, dom), eps)
        )
        total += w[j] * eps * integrand
    return float(total + eps * np.dot(traj.states[0], psi.on_grid(0.0, dom)))


def entropy_inequality_residual(
    n: Nonlinearity, pair: EntropyPair, traj: Trajectory, psi: TestFunction
) -> float:
    """Discrete entropy functional, expected ``>= 0`` up to discretisation slack.

    ``int_0^T <G(u), psi_t> - <g(phi) D+phi, D+psi> - <g'(phi) |D-phi|^2, psi> dt
    + <G(u0), psi(0)>``.
    """
    dom = traj.domain
    eps = dom.spacing
    psi.validate(dom, traj.times)
    if not psi.nonnegative:
        raise ValueError("entropy inequality needs a nonnegative test function")
    if abs(traj.times[-1] - psi.horizon) > 1e-9 * max(1.0, psi.horizon):
        raise ValueError("test function horizon must equal the trajectory end time")
    w = _time_weights(traj.times)
    G = pair.G(traj.states)
    total = 0.0
    for j, t in enumerate(traj.times[:-1]):
        if w[j] == 0:
            continue
        p = np.asarray(n.phi(traj.states[j]), dtype=float)
        gp = np.asarray(pair.g(p), dtype=float)
        dgp = np.asarray(pair.dg(p), dtype=float)
        s = psi.on_grid(t, dom)
        dm = _backward_diff(p, eps)
        integrand = (
            np.dot(G[j], psi.dt_on_grid(t, dom))
            - np.dot(gp * _forward_diff(p, eps), _forward_diff(s, eps))
            - np.dot(dgp * dm * dm, s)
        )
        total += w[j] * eps * integrand
    return float(total + eps * np.dot(G[0], psi.on_grid(0.0, dom)))


def g_range_max(pair: EntropyPair, traj: Trajectory) -> float:
    """``max|g|`` over the range of ``phi(u)`` seen along ``traj``."""
    p = np.asarray(pair.nonlinearity.phi(traj.states), dtype=float)
    grid = np.linspace(p.min(), p.max(), 256) if p.max() > p.min() else p.ravel()[:1]
    return float(np.max(np.abs(pair.g(grid))))


def is_nonincreasing(series: NDArray, slack: float) -> bool:
    return bool(np.all(np.diff(series) <= slack))


def first_order_ratio(coarse: float, fine: float) -> float:
    """``|coarse| / |fine|``; about 2 for a first-order quantity under halving."""
    return abs(coarse) / abs(fine) if fine != 0 else math.inf
