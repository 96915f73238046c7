"""Uniform grid on [0, 1] and the finite-difference calculus on it.

Grid functions are stored as float64 vectors indexed by node, ``u[i] = u(i*eps)``
for ``i = 0..N``. One-sided differences are padded with zero at the node where
they are undefined; only :func:`laplacian_neumann` carries a boundary formula,
the zero-flux rows

    (Lap f)_0 = (f_1 - f_0) / eps**2,    (Lap f)_N = (f_{N-1} - f_N) / eps**2.

With these rows the Laplacian matrix is symmetric and its columns sum to zero,
so ``sum(Lap f) == 0`` for every f (discrete Gauss theorem).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray

__all__ = [
    "GridDomain",
    "GridFunction",
    "forward_diff",
    "backward_diff",
    "laplacian_neumann",
    "laplacian_matrix",
    "grid_integral",
    "inner_product",
    "lp_norm",
]


@dataclass(frozen=True)
class GridDomain:
    """The grid ``{0, eps, 2 eps, ..., N eps = 1}`` with ``eps = 1/N``."""

    n_intervals: int

    def __post_init__(self) -> None:
        n = self.n_intervals
        if int(n) != n or n < 2:
            raise ValueError(f"n_intervals must be an integer >= 2, got {n!r}")
        object.__setattr__(self, "n_intervals", int(n))
        if abs(self.spacing * self.n_intervals - 1.0) > 1e-15:
            raise ValueError("spacing * N differs from 1 beyond rounding")

    @property
    def spacing(self) -> float:
        return 1.0 / self.n_intervals

    @property
    def n_nodes(self) -> int:
        return self.n_intervals + 1

    @property
    def nodes(self) -> NDArray[np.float64]:
        return np.arange(self.n_nodes) * self.spacing

    def function(self, values: ArrayLike) -> GridFunction:
        return GridFunction(self, values)

    def constant(self, c: float) -> GridFunction:
        return GridFunction(self, np.full(self.n_nodes, float(c)))

    def sample(self, f: Callable[[NDArray[np.float64]], ArrayLike]) -> GridFunction:
        """Evaluate a vectorised callable at the node positions."""
        return GridFunction(self, np.broadcast_to(f(self.nodes), (self.n_nodes,)))


@dataclass(frozen=True, eq=False)
class GridFunction:
    """A real value at every node of a :class:`GridDomain`.

    The value vector is copied on construction and made read-only.
    """

    domain: GridDomain
    values: NDArray[np.float64] = field(repr=False)

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=np.float64)
        if v.shape != (self.domain.n_nodes,):
            raise ValueError(
                f"expected {self.domain.n_nodes} values, got shape {v.shape}"
            )
        if not np.all(np.isfinite(v)):
            bad = int(np.flatnonzero(~np.isfinite(v))[0])
            raise ValueError(f"non-finite value at node {bad}")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return len(self.values)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def __repr__(self) -> str:
        return f"GridFunction(N={self.domain.n_intervals}, values={self.values!r})"

    @property
    def spacing(self) -> float:
        return self.domain.spacing

    def with_values(self, values: ArrayLike) -> GridFunction:
        return GridFunction(self.domain, values)

    def map(self, func: Callable[[NDArray[np.float64]], ArrayLike]) -> GridFunction:
        """Apply a vectorised scalar map node by node."""
        return GridFunction(self.domain, func(self.values))


def _check_same_domain(f: GridFunction, g: GridFunction) -> None:
    if f.domain != g.domain:
        raise ValueError(
            f"domain mismatch: N={f.domain.n_intervals} vs N={g.domain.n_intervals}"
        )


# Array-level kernels. The integrator calls these directly on raw vectors.


def _forward_diff(v: NDArray, eps: float) -> NDArray:
    out = np.zeros_like(v)
    out[:-1] = (v[1:] - v[:-1]) / eps
    return out


def _backward_diff(v: NDArray, eps: float) -> NDArray:
    out = np.zeros_like(v)
    out[1:] = (v[1:] - v[:-1]) / eps
    return out


def _laplacian(v: NDArray, eps: float, out: NDArray | None = None) -> NDArray:
    # flux form: Lap v = (F_i - F_{i-1}) / eps with F_i = v_{i+1} - v_i and
    # zero flux through both ends
    if out is None:
        out = np.empty_like(v)
    flux = np.diff(v)
    inv = 1.0 / (eps * eps)
    out[0] = flux[0] * inv
    out[-1] = -flux[-1] * inv
    np.subtract(flux[1:], flux[:-1], out=out[1:-1])
    out[1:-1] *= inv
    return out


def forward_diff(f: GridFunction) -> GridFunction:
    """``(D+ f)_i = (f_{i+1} - f_i)/eps`` for ``i < N``; zero at node N."""
    return f.with_values(_forward_diff(f.values, f.spacing))


def backward_diff(f: GridFunction) -> GridFunction:
    """``(D- f)_i = (f_i - f_{i-1})/eps`` for ``i > 0``; zero at node 0."""
    return f.with_values(_backward_diff(f.values, f.spacing))


def laplacian_neumann(f: GridFunction) -> GridFunction:
    """Three-point Laplacian with zero-flux boundary rows."""
    return f.with_values(_laplacian(f.values, f.spacing))


def laplacian_matrix(domain: GridDomain) -> NDArray[np.float64]:
    """Dense matrix of :func:`laplacian_neumann` (symmetric, rows sum to zero)."""
    n = domain.n_nodes
    a = np.zeros((n, n))
    i = np.arange(n - 1)
    a[i, i + 1] = 1.0
    a[i + 1, i] = 1.0
    a[np.arange(n), np.arange(n)] = -2.0
    a[0, 0] = a[-1, -1] = -1.0
    return a / domain.spacing**2


def grid_integral(f: GridFunction) -> float:
    """``eps * sum(f)`` over all N+1 nodes."""
    return float(f.spacing * np.sum(f.values))


def inner_product(f: GridFunction, g: GridFunction) -> float:
    _check_same_domain(f, g)
    return float(f.spacing * np.dot(f.values, g.values))


def lp_norm(f: GridFunction, p: float = 2) -> float:
    """Grid L^p norm for ``p`` in {1, 2, inf}."""
    a = np.abs(f.values)
    if p == np.inf:
        return float(np.max(a))
    if p == 1:
        return float(f.spacing * np.sum(a))
    if p == 2:
        return float(np.sqrt(f.spacing * np.dot(a, a)))
    raise ValueError(f"p must be 1, 2 or inf, got {p!r}")
