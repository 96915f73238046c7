"""Non-monotone flux functions phi and their branch structure.

A flux is admissible when ``phi(0) = 0``, ``phi >= 0`` on ``[0, inf)`` and there
are turning points ``0 < u_minus < u_plus <= inf`` with ``phi' > 0`` on
``(0, u_minus)`` and ``(u_plus, inf)`` and ``phi' < 0`` in between. When
``u_plus`` is infinite, ``phi`` must decay to zero at infinity.

The three monotone pieces of the graph are inverted by :func:`branch_inverse`:

* ``S1`` maps ``[0, phi(u_minus)]`` onto ``[0, u_minus]``,
* ``S2`` maps ``[phi(u_plus), phi(u_minus)]`` onto ``[u_minus, u_plus]``
  (``(0, phi(u_minus)]`` onto ``[u_minus, inf)`` when ``u_plus`` is infinite),
* ``S3`` maps ``[phi(u_plus), inf)`` onto ``[u_plus, inf)``; it does not exist
  when ``u_plus`` is infinite.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import integrate, optimize
from scipy.interpolate import PchipInterpolator

__all__ = [
    "BranchId",
    "BranchRangeError",
    "Nonlinearity",
    "ValidationReport",
    "branch_inverse",
    "cubic",
    "from_table",
    "get_nonlinearity",
    "jump_probability",
    "perona_malik",
    "potential",
    "read_phi_table",
    "validate_hypotheses",
]

TABLE_HEADER = "# phi-table v1"


class BranchId(enum.Enum):
    S1 = 1
    S2 = 2
    S3 = 3


class BranchRangeError(ValueError):
    """Raised when a level lies outside the range of the requested branch."""


@dataclass(frozen=True, eq=False)
class Nonlinearity:
    """A flux ``phi`` with derivative and turning points.

    ``phi`` and ``dphi`` must accept both floats and numpy arrays.
    ``antiderivative``, when given, is the closed form of
    ``V(u) = int_0^u phi(s) ds`` and is used by :func:`potential`.
    """

    phi: Callable[[ArrayLike], ArrayLike]
    dphi: Callable[[ArrayLike], ArrayLike]
    u_minus: float
    u_plus: float = math.inf
    name: str = "custom"
    antiderivative: Callable[[ArrayLike], ArrayLike] | None = field(
        default=None, repr=False
    )

    @property
    def phi_at_uminus(self) -> float:
        return float(self.phi(self.u_minus))

    @property
    def phi_at_uplus(self) -> float:
        if math.isinf(self.u_plus):
            return 0.0
        return float(self.phi(self.u_plus))

    @property
    def has_third_branch(self) -> bool:
        return math.isfinite(self.u_plus)

    def branch_of(self, u: float) -> BranchId:
        """The branch whose closed interval holds ``u`` (turning points go to S1/S3)."""
        if u <= self.u_minus:
            return BranchId.S1
        if u >= self.u_plus:
            return BranchId.S3
        return BranchId.S2

    def level_range(self, branch: BranchId) -> tuple[float, float]:
        """Closed range of levels accepted by ``branch``."""
        if branch is BranchId.S1:
            return 0.0, self.phi_at_uminus
        if branch is BranchId.S2:
            return self.phi_at_uplus, self.phi_at_uminus
        if not self.has_third_branch:
            raise BranchRangeError("S3 does not exist when u_plus is infinite")
        return self.phi_at_uplus, math.inf

    def invariant_upper_bound(self, u0_sup: float) -> float:
        """``max(sup u0, S3(phi(u_minus)))``, or ``inf`` when ``u_plus`` is infinite."""
        if not self.has_third_branch:
            return math.inf
        return max(float(u0_sup), branch_inverse(self, BranchId.S3, self.phi_at_uminus))

    def max_abs_dphi(self, lo: float, hi: float, samples: int = 20001) -> float:
        """Sup of ``|phi'|`` on ``[lo, hi]`` by dense linear and geometric sampling."""
        pts = np.linspace(lo, hi, samples)
        if hi > 1.0 and hi > 10 * max(lo, 1e-3):
            pts = np.concatenate([pts, np.geomspace(max(lo, 1e-3), hi, samples)])
        return float(np.max(np.abs(self.dphi(pts))))


# Builtin fluxes


def cubic() -> Nonlinearity:
    """``phi(u) = u^3 - 3u^2 + 2.5u``; turning points ``1 -+ sqrt(6)/6``."""
    r = math.sqrt(6.0) / 6.0
    return Nonlinearity(
        phi=lambda u: u * (u * (u - 3.0) + 2.5),
        dphi=lambda u: (3.0 * u - 6.0) * u + 2.5,
        u_minus=1.0 - r,
        u_plus=1.0 + r,
        name="cubic",
        antiderivative=lambda u: u * u * (u * (0.25 * u - 1.0) + 1.25),
    )


def perona_malik() -> Nonlinearity:
    """``phi(u) = u / (1 + u^2)``; single turning point at 1, ``u_plus = inf``."""
    return Nonlinearity(
        phi=lambda u: u / (1.0 + u * u),
        dphi=lambda u: (1.0 - u * u) / (1.0 + u * u) ** 2,
        u_minus=1.0,
        u_plus=math.inf,
        name="perona-malik",
        antiderivative=lambda u: 0.5 * np.log1p(u * u),
    )


BUILTINS: dict[str, Callable[[], Nonlinearity]] = {
    "cubic": cubic,
    "perona-malik": perona_malik,
}


def read_phi_table(path: str | Path) -> tuple[NDArray, NDArray]:
    """Parse a ``# phi-table v1`` file into node and value arrays."""
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or lines[0].strip() != TABLE_HEADER:
        raise ValueError(f"{path}: first line must be {TABLE_HEADER!r}")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        parts = s.split()
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected 'u value', got {s!r}")
        rows.append((float(parts[0]), float(parts[1])))
    if len(rows) < 16:
        raise ValueError(f"{path}: need at least 16 points, got {len(rows)}")
    u, v = np.array(rows).T
    if np.any(np.diff(u) <= 0):
        raise ValueError(f"{path}: u column must be strictly increasing")
    return u, v


def _sign_changes(x: NDArray, y: NDArray) -> list[float]:
    idx = np.flatnonzero(np.sign(y[:-1]) * np.sign(y[1:]) < 0)
    return [float(x[i] - y[i] * (x[i + 1] - x[i]) / (y[i + 1] - y[i])) for i in idx]


def from_table(
    path: str | Path,
    u_minus: float | None = None,
    u_plus: float | None = None,
) -> Nonlinearity:
    """Piecewise-cubic (PCHIP) flux interpolating a ``# phi-table v1`` file.

    Turning points not supplied are located as sign changes of the
    interpolant's derivative; a missing second sign change means
    ``u_plus = inf``.
    """
    u, v = read_phi_table(path)
    spline = PchipInterpolator(u, v, extrapolate=True)
    deriv = spline.derivative()
    anti = spline.antiderivative()
    if u_minus is None or u_plus is None:
        fine = np.linspace(u[0], u[-1], 200 * len(u))
        roots = [r for r in _sign_changes(fine, deriv(fine)) if r > 0]
        if u_minus is None:
            if not roots:
                raise ValueError(f"{path}: no turning point found in the table")
            u_minus = roots[0]
        if u_plus is None:
            later = [r for r in roots if r > u_minus]
            u_plus = later[0] if later else math.inf

    def phi(x):
        out = spline(x)
        return float(out) if np.ndim(out) == 0 else out

    def dphi(x):
        out = deriv(x)
        return float(out) if np.ndim(out) == 0 else out

    a0 = float(anti(0.0)) if u[0] <= 0.0 else 0.0
    return Nonlinearity(
        phi=phi,
        dphi=dphi,
        u_minus=float(u_minus),
        u_plus=float(u_plus),
        name=f"table:{Path(path).name}",
        antiderivative=lambda x: anti(x) - a0,
    )


def get_nonlinearity(spec: str, **kwargs) -> Nonlinearity:
    """Resolve ``'cubic'``, ``'perona-malik'`` or ``'custom:PATH'``."""
    if spec in BUILTINS:
        return BUILTINS[spec]()
    if spec.startswith("custom:"):
        return from_table(spec[len("custom:") :], **kwargs)
    raise ValueError(f"unknown nonlinearity {spec!r}")


# Hypothesis checks


@dataclass
class ValidationReport:
    """Outcome of :func:`validate_hypotheses`, one entry per hypothesis."""

    checks: dict[str, bool] = field(default_factory=dict)
    details: dict[str, str] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    @property
    def failures(self) -> list[str]:
        return [k for k, ok in self.checks.items() if not ok]

    def add(self, name: str, ok: bool, detail: str = "") -> None:
        self.checks[name] = bool(ok)
        self.details[name] = detail

    def __str__(self) -> str:
        lines = [
            f"{'PASS' if ok else 'FAIL'}  {name}  {self.details[name]}".rstrip()
            for name, ok in self.checks.items()
        ]
        return "\n".join(lines)


def _open_samples(a: float, b: float, n: int) -> NDArray:
    return np.linspace(a, b, n + 2)[1:-1]


def validate_hypotheses(
    n: Nonlinearity, samples: int = 1000, tol_tail: float = 1e-2
) -> ValidationReport:
    """Check the standing hypotheses on ``phi`` by dense sampling.

    Every hypothesis gets its own entry; nothing is skipped silently.
    """
    if samples < 100:
        raise ValueError("samples must be >= 100")
    rep = ValidationReport()
    um, up = n.u_minus, n.u_plus
    finite_plus = math.isfinite(up)
    u_max = 3.0 * up if finite_plus else 10.0 * um

    rep.add("turning_points_ordered", 0.0 < um < up, f"u-={um:g}, u+={up:g}")
    phi0 = float(n.phi(0.0))
    rep.add("phi_zero_at_zero", abs(phi0) <= 1e-12, f"phi(0)={phi0:.3g}")

    grid = np.linspace(0.0, u_max, 4 * samples)
    vals = np.asarray(n.phi(grid))
    rep.add("phi_nonnegative", bool(np.all(vals >= -1e-14)), f"min={vals.min():.3g}")

    if um > 0:
        d1 = np.asarray(n.dphi(_open_samples(0.0, um, samples)))
        rep.add("increasing_below_u_minus", bool(np.all(d1 > 0)), f"min phi'={d1.min():.3g}")
    else:
        rep.add("increasing_below_u_minus", False, "u_minus <= 0")

    hi = min(up, u_max)
    if hi > um:
        d2 = np.asarray(n.dphi(_open_samples(um, hi, samples)))
        rep.add("decreasing_in_spinodal", bool(np.all(d2 < 0)), f"max phi'={d2.max():.3g}")
    else:
        rep.add("decreasing_in_spinodal", False, "empty spinodal interval")

    if finite_plus:
        d3 = np.asarray(n.dphi(_open_samples(up, u_max, samples)))
        rep.add("increasing_above_u_plus", bool(np.all(d3 > 0)), f"min phi'={d3.min():.3g}")
    else:
        tail = np.geomspace(1e3 * um, 1e6 * um, samples)
        tv = np.asarray(n.phi(tail))
        ok = bool(np.all(tv <= n.phi_at_uminus * tol_tail) and tv[-1] <= tv[0])
        rep.add("tail_decays_to_zero", ok, f"phi(tail end)={tv[-1]:.3g}")
        dt = np.asarray(n.dphi(_open_samples(um, tail[-1], samples)))
        rep.add("decreasing_in_tail", bool(np.all(dt < 0)), f"max phi'={dt.max():.3g}")

    # C^1 consistency of the supplied derivative
    x = np.linspace(0.05 * um, u_max, samples)
    h = 1e-6 * np.maximum(1.0, np.abs(x))
    fd = (np.asarray(n.phi(x + h)) - np.asarray(n.phi(x - h))) / (2 * h)
    dv = np.asarray(n.dphi(x))
    err = np.max(np.abs(fd - dv) / np.maximum(1.0, np.abs(dv)))
    rep.add("derivative_consistent", bool(err <= 1e-5), f"max rel err={err:.2g}")
    return rep


# Branch inverses


def _solve_monotone(phi: Callable, v: float, a: float, b: float, increasing: bool) -> float:
    """Root of ``phi(u) = v`` on a bracket where phi is monotone."""
    sgn = 1.0 if increasing else -1.0
    if sgn * (phi(a) - v) >= 0:
        return a
    if sgn * (phi(b) - v) <= 0:
        return b
    return float(optimize.brentq(lambda x: float(phi(x)) - v, a, b, xtol=1e-15, rtol=1e-15))


def _expand_until(phi: Callable, start: float, beyond: Callable[[float], bool]) -> float:
    b = max(2.0 * start, start + 1.0)
    for _ in range(200):
        if beyond(float(phi(b))):
            return b
        b *= 2.0
    raise BranchRangeError("could not bracket the branch inverse")


def branch_inverse(n: Nonlinearity, branch: BranchId, v: float) -> float:
    """The unique ``u`` on ``branch`` with ``phi(u) = v``."""
    v = float(v)
    um, up = n.u_minus, n.u_plus
    lo, hi = n.level_range(branch)
    slack = 1e-14 * max(1.0, abs(v))
    if branch is BranchId.S2 and not n.has_third_branch and v <= 0.0:
        raise BranchRangeError(f"level {v} outside (0, {hi}] for S2")
    if not (lo - slack <= v <= hi + slack):
        raise BranchRangeError(f"level {v} outside [{lo}, {hi}] for {branch.name}")
    v = min(max(v, lo), hi)
    if branch is BranchId.S1:
        return _solve_monotone(n.phi, v, 0.0, um, increasing=True)
    if branch is BranchId.S2:
        b = up if n.has_third_branch else _expand_until(n.phi, um, lambda p: p < v)
        return _solve_monotone(n.phi, v, um, b, increasing=False)
    b = _expand_until(n.phi, up, lambda p: p > v)
    return _solve_monotone(n.phi, v, up, b, increasing=True)


# Random-walk interpretation and potential


def jump_probability(n: Nonlinearity, u: float, scale: float = 1.0) -> float:
    """Fraction ``phi(u) / (scale * u)`` of mass jumping to each neighbour per step.

    The random-walk reading of the scheme needs this in ``[0, 1/2]``.
    """
    if u <= 0:
        raise ValueError("jump probability is defined for positive mass only")
    if scale <= 0:
        raise ValueError("scale must be positive")
    return float(n.phi(u)) / (scale * u)


def potential(n: Nonlinearity, u: ArrayLike) -> ArrayLike:
    """``V(u) = int_0^u phi(s) ds`` (closed form when available, else quadrature)."""
    arr = np.asarray(u, dtype=float)
    if np.any(arr < 0):
        raise ValueError("potential is defined for u >= 0")
    if n.antiderivative is not None:
        out = np.asarray(n.antiderivative(arr), dtype=float)
    else:
        flat = [
            integrate.quad(n.phi, 0.0, float(x), epsabs=1e-12, epsrel=1e-12, limit=200)[0]
            for x in arr.ravel()
        ]
        out = np.array(flat).reshape(arr.shape)
    return float(out) if out.ndim == 0 else out
