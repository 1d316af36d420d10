"""Canonical change of chart between Cartesian ``(x, y)`` and epidemic ``(q, p)``.

The epidemic chart uses ``q = <rho>`` (mean infected density) and
``p = 1/sigma`` (inverse standard deviation). The map

    x = (q^2 p^2 - 1) / p,        y = q p^2 / (q^2 p^2 - 1)
    q = x^2 y / (x^2 y^2 - 1),    p = (x^2 y^2 - 1) / x

preserves the symplectic form, ``dx ^ dy = dq ^ dp``. It has genuine poles
at ``p = 0`` / ``x = 0`` and on the hyperbolas ``qp = +-1`` / ``xy = +-1``;
points closer than :data:`POLE_GUARD` to any of them are rejected.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import SingularPointError

POLE_GUARD = 1e-12


class Chart(str, enum.Enum):
    CARTESIAN = "cartesian"
    EPIDEMIC = "epidemic"

    @property
    def coordinate_names(self) -> tuple[str, str]:
        return ("x", "y") if self is Chart.CARTESIAN else ("q", "p")


@dataclass(frozen=True)
class PhaseState:
    """A point of the plane tagged with the chart its coordinates refer to."""

    chart: Chart
    u: float
    v: float

    def __post_init__(self):
        object.__setattr__(self, "chart", Chart(self.chart))
        object.__setattr__(self, "u", float(self.u))
        object.__setattr__(self, "v", float(self.v))

    @classmethod
    def cartesian(cls, x: float, y: float) -> "PhaseState":
        return cls(Chart.CARTESIAN, x, y)

    @classmethod
    def epidemic(cls, q: float, p: float) -> "PhaseState":
        return cls(Chart.EPIDEMIC, q, p)

    @property
    def coords(self) -> tuple[float, float]:
        return (self.u, self.v)

    def to(self, chart: Chart) -> "PhaseState":
        chart = Chart(chart)
        if chart is self.chart:
            return self
        if chart is Chart.CARTESIAN:
            return PhaseState(chart, *epi_to_cart(self.u, self.v))
        return PhaseState(chart, *cart_to_epi(self.u, self.v))

    def is_regular(self) -> bool:
        if self.chart is Chart.EPIDEMIC:
            return bool(epidemic_regular(self.u, self.v))
        return bool(cartesian_invertible(self.u, self.v))


@dataclass(frozen=True)
class EpidemicObservables:
    mean_rho: float
    variance: float


def epidemic_regular(q, p):
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    with np.errstate(all="ignore"):
        return (np.abs(p) >= POLE_GUARD) & (np.abs(q * q * p * p - 1.0) >= POLE_GUARD) & np.isfinite(q) & np.isfinite(p)


def cartesian_invertible(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    with np.errstate(all="ignore"):
        return (np.abs(x) >= POLE_GUARD) & (np.abs(x * x * y * y - 1.0) >= POLE_GUARD) & np.isfinite(x) & np.isfinite(y)


def require_epidemic_regular(q, p) -> None:
    ok = epidemic_regular(q, p)
    if not np.all(ok):
        i = np.flatnonzero(np.ravel(~ok))[0]
        qi, pi = np.ravel(np.broadcast_to(q, ok.shape))[i], np.ravel(np.broadcast_to(p, ok.shape))[i]
        raise SingularPointError(f"(q, p) = ({float(qi)!r}, {float(pi)!r}) is singular: need p != 0 and q^2 p^2 != 1")


def require_cartesian_invertible(x, y) -> None:
    ok = cartesian_invertible(x, y)
    if not np.all(ok):
        i = np.flatnonzero(np.ravel(~ok))[0]
        xi, yi = np.ravel(np.broadcast_to(x, ok.shape))[i], np.ravel(np.broadcast_to(y, ok.shape))[i]
        raise SingularPointError(f"(x, y) = ({float(xi)!r}, {float(yi)!r}) is singular: need x != 0 and x^2 y^2 != 1")


def _epi_to_cart_raw(q, p):
    d = q * q * p * p - 1.0
    return d / p, q * p * p / d


def _cart_to_epi_raw(x, y):
    d = x * x * y * y - 1.0
    return x * x * y / d, d / x


def epi_to_cart(q, p):
    """Epidemic ``(q, p)`` to Cartesian ``(x, y)``; works elementwise on arrays.

    Raises:
        SingularPointError: ``p == 0`` or ``q^2 p^2 == 1`` (within the pole guard).
    """
    require_epidemic_regular(q, p)
    x, y = _epi_to_cart_raw(np.asarray(q, dtype=float), np.asarray(p, dtype=float))
    if np.ndim(x) == 0:
        return float(x), float(y)
    return x, y


def cart_to_epi(x, y):
    """Cartesian ``(x, y)`` to epidemic ``(q, p)``; works elementwise on arrays.

    Raises:
        SingularPointError: ``x == 0`` or ``x^2 y^2 == 1`` (within the pole guard).
    """
    require_cartesian_invertible(x, y)
    q, p = _cart_to_epi_raw(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    if np.ndim(q) == 0:
        return float(q), float(p)
    return q, p


def observables(q: float, p: float) -> EpidemicObservables:
    """Mean density ``<rho> = q`` and variance ``sigma^2 = 1/p^2``."""
    if not abs(p) >= POLE_GUARD:
        raise SingularPointError(f"variance undefined for p = {p!r}")
    return EpidemicObservables(float(q), 1.0 / (float(p) * float(p)))


_CS_STEP = 1e-20
_FD_STEP = np.finfo(float).eps ** (1 / 3)


def _jacobian(fn, u, v, method: str):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if method == "complex-step":
        hu = _CS_STEP * np.maximum(1.0, np.abs(u))
        hv = _CS_STEP * np.maximum(1.0, np.abs(v))
        a, b = fn(u + 1j * hu, v + 0j)
        du = (a.imag / hu, b.imag / hu)
        a, b = fn(u + 0j, v + 1j * hv)
        dv = (a.imag / hv, b.imag / hv)
    elif method == "central":
        hu = _FD_STEP * np.maximum(1.0, np.abs(u))
        hv = _FD_STEP * np.maximum(1.0, np.abs(v))
        ap, bp = fn(u + hu, v)
        am, bm = fn(u - hu, v)
        du = ((ap - am) / (2 * hu), (bp - bm) / (2 * hu))
        ap, bp = fn(u, v + hv)
        am, bm = fn(u, v - hv)
        dv = ((ap - am) / (2 * hv), (bp - bm) / (2 * hv))
    else:
        raise ValueError(f"unknown differentiation method {method!r}")
    # rows: outputs, columns: inputs
    return np.array([[du[0], dv[0]], [du[1], dv[1]]])


def chart_jacobian(point: PhaseState, method: str = "complex-step") -> np.ndarray:
    """Numerical Jacobian of the chart change leaving ``point.chart``.

    ``method`` is ``"complex-step"`` (derivative from the imaginary part of a
    tiny imaginary increment, free of subtractive cancellation) or
    ``"central"`` (real central differences with step ``eps**(1/3) * max(1, |c|)``).
    """
    if point.chart is Chart.EPIDEMIC:
        require_epidemic_regular(point.u, point.v)
        return _jacobian(_epi_to_cart_raw, point.u, point.v, method)
    require_cartesian_invertible(point.u, point.v)
    return _jacobian(_cart_to_epi_raw, point.u, point.v, method)


def jacobian_det(point: PhaseState, method: str = "complex-step") -> float:
    """Determinant of the numerical Jacobian of the chart change; 1 for a canonical map."""
    j = chart_jacobian(point, method)
    return float(j[0, 0] * j[1, 1] - j[0, 1] * j[1, 0])


def jacobian_det_many(u, v, chart: Chart, method: str = "complex-step") -> np.ndarray:
    """Vectorised :func:`jacobian_det` over arrays of coordinates in ``chart``."""
    chart = Chart(chart)
    if chart is Chart.EPIDEMIC:
        require_epidemic_regular(u, v)
        j = _jacobian(_epi_to_cart_raw, u, v, method)
    else:
        require_cartesian_invertible(u, v)
        j = _jacobian(_cart_to_epi_raw, u, v, method)
    return j[0, 0] * j[1, 1] - j[0, 1] * j[1, 0]
