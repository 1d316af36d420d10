"""Time-dependent coefficients and the integrals built from them.

A coefficient is a :class:`TimeFunction`: a constant, a parsed expression in
``t`` or a tabulated signal. All of them evaluate on scalars or numpy arrays.

The closed-form solutions need the running integral of the infection rate,
``theta(t) = int_a^t rho0(s) ds``, and integrals of the form
``int_a^t exp(+-theta(u)) f(u) du``. Both are computed by adaptive
Gauss-Kronrod quadrature; :class:`RunningIntegrals` memoises them on a fixed
time grid for trajectory sweeps.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from . import expression as _expr
from .errors import DomainError
from .quadrature import QuadratureConfig, integrate, integrate_many

_FD_STEP = np.finfo(float).eps ** (1 / 3)


class TimeFunction:
    """Scalar coefficient of time. Subclasses implement :meth:`_values`."""

    def __call__(self, t):
        arr = np.asarray(t, dtype=float)
        with np.errstate(all="ignore"):
            out = np.broadcast_to(np.asarray(self._values(arr), dtype=float), arr.shape)
        if not np.all(np.isfinite(out)):
            bad = arr[~np.isfinite(out)] if arr.ndim else arr
            raise DomainError(f"{self.describe()} is not finite at t = {np.ravel(bad)[0]!r}")
        return float(out) if arr.ndim == 0 else np.array(out)

    def _values(self, t: np.ndarray):
        raise NotImplementedError

    def derivative(self, t: float) -> float:
        """Central finite difference with step ``eps**(1/3) * max(1, |t|)``."""
        h = _FD_STEP * max(1.0, abs(t))
        return (self(t + h) - self(t - h)) / (2 * h)

    @property
    def is_zero(self) -> bool:
        return False

    def describe(self) -> str:
        """Canonical text identifying this function (used for hashing and output)."""
        raise NotImplementedError


@dataclass(frozen=True, eq=True)
class Constant(TimeFunction):
    value: float

    def _values(self, t):
        return self.value

    def derivative(self, t: float) -> float:
        return 0.0

    @property
    def is_zero(self) -> bool:
        return self.value == 0.0

    def describe(self) -> str:
        return repr(float(self.value))


ZERO = Constant(0.0)


@dataclass(frozen=True, eq=True)
class Expression(TimeFunction):
    tree: _expr.Node
    text: str = field(default="", compare=False)

    def _values(self, t):
        return _expr.evaluate(self.tree, t)

    @property
    def is_constant(self) -> bool:
        return not _expr.depends_on_t(self.tree)

    @property
    def is_zero(self) -> bool:
        if not self.is_constant:
            return False
        with np.errstate(all="ignore"):
            return float(_expr.evaluate(self.tree, 0.0)) == 0.0

    def describe(self) -> str:
        return _expr.to_text(self.tree)


class Table(TimeFunction):
    """Tabulated samples with linear (order 1) or cubic spline (order 3) interpolation.

    Evaluation outside ``[times[0], times[-1]]`` raises :class:`DomainError`.
    """

    def __init__(self, times: Sequence[float], values: Sequence[float], order: int = 1):
        times = np.array(times, dtype=float)
        values = np.array(values, dtype=float)
        if times.ndim != 1 or times.shape != values.shape:
            raise ValueError("times and values must be 1-D sequences of equal length")
        if times.size < 2:
            raise ValueError("a table needs at least two samples")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(values))):
            raise ValueError("table entries must be finite")
        if np.any(np.diff(times) <= 0):
            raise ValueError("table sample times must be strictly increasing")
        if order not in (1, 3):
            raise ValueError("interpolation order must be 1 (linear) or 3 (cubic)")
        times.flags.writeable = False
        values.flags.writeable = False
        self.times = times
        self.values = values
        self.order = order
        self._spline = CubicSpline(times, values) if order == 3 else None

    def _values(self, t):
        if np.any(t < self.times[0]) or np.any(t > self.times[-1]):
            raise DomainError(
                f"t outside tabulated span [{self.times[0]!r}, {self.times[-1]!r}]"
            )
        if self._spline is None:
            return np.interp(t, self.times, self.values)
        out = np.asarray(self._spline(t), dtype=float)
        idx = np.clip(np.searchsorted(self.times, t), 0, self.times.size - 1)
        on_node = self.times[idx] == t
        return np.where(on_node, self.values[idx], out)

    def derivative(self, t: float) -> float:
        # one-sided at the span ends so the table domain is respected
        h = _FD_STEP * max(1.0, abs(t))
        lo = max(t - h, self.times[0])
        hi = min(t + h, self.times[-1])
        return (self(hi) - self(lo)) / (hi - lo)

    @property
    def is_zero(self) -> bool:
        return bool(np.all(self.values == 0.0))

    def __eq__(self, other):
        return (
            isinstance(other, Table)
            and self.order == other.order
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.values, other.values)
        )

    def __hash__(self):
        return hash((self.order, self.times.tobytes(), self.values.tobytes()))

    def describe(self) -> str:
        pts = ",".join(f"({t!r},{v!r})" for t, v in zip(self.times.tolist(), self.values.tolist()))
        return f"table[order={self.order}]{{{pts}}}"

    def __repr__(self):
        return f"Table(n={self.times.size}, order={self.order}, span=[{self.times[0]}, {self.times[-1]}])"


def parse_expression(text: str) -> Expression:
    """Parse an expression string such as ``"1 + 0.5*sin(t)"``."""
    return Expression(_expr.parse(text), text)


def as_time_function(value) -> TimeFunction:
    """Coerce a number, expression string or TimeFunction."""
    if isinstance(value, TimeFunction):
        return value
    if isinstance(value, str):
        return parse_expression(value)
    if isinstance(value, (int, float, np.floating, np.integer)) and not isinstance(value, bool):
        return Constant(float(value))
    raise TypeError(f"cannot interpret {value!r} as a time function")


def theta(rho0: TimeFunction, a: float, t: float, cfg: QuadratureConfig | None = None) -> float:
    """Running integral of the infection rate, ``int_a^t rho0(s) ds``."""
    if t == a:
        return 0.0
    if isinstance(rho0, Constant):
        return rho0.value * (t - a)
    return integrate(rho0, a, t, cfg)


def theta_at(rho0: TimeFunction, a: float, ts, cfg: QuadratureConfig | None = None) -> np.ndarray:
    """``theta`` at many times, accumulated between sorted neighbouring points."""
    ts = np.asarray(ts, dtype=float)
    if isinstance(rho0, Constant):
        return rho0.value * (ts - a)
    flat = ts.ravel()
    pts, inverse = np.unique(np.concatenate([[a], flat]), return_inverse=True)
    pieces = integrate_many(rho0, pts[:-1], pts[1:], cfg)
    running = np.concatenate([[0.0], np.cumsum(pieces)])
    running -= running[inverse[0]]
    return running[inverse[1:]].reshape(ts.shape)


def _weight(f: TimeFunction, rho0: TimeFunction, sign: int, a: float, cfg):
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")

    def integrand(u):
        return np.exp(sign * theta_at(rho0, a, u, cfg)) * f(u)

    return integrand


def weighted_integral(
    f: TimeFunction,
    rho0: TimeFunction,
    sign: int,
    a: float,
    t: float,
    cfg: QuadratureConfig | None = None,
) -> float:
    """``int_a^t exp(sign * theta(u)) f(u) du`` with ``theta`` anchored at ``a``."""
    if t == a or f.is_zero:
        return 0.0
    return integrate(_weight(f, rho0, sign, a, cfg), a, t, cfg)


def weighted_integral_at(
    f: TimeFunction,
    rho0: TimeFunction,
    sign: int,
    a: float,
    ts,
    cfg: QuadratureConfig | None = None,
) -> np.ndarray:
    ts = np.asarray(ts, dtype=float)
    if f.is_zero:
        return np.zeros(ts.shape)
    flat = ts.ravel()
    pts, inverse = np.unique(np.concatenate([[a], flat]), return_inverse=True)
    pieces = integrate_many(_weight(f, rho0, sign, a, cfg), pts[:-1], pts[1:], cfg)
    running = np.concatenate([[0.0], np.cumsum(pieces)])
    running -= running[inverse[0]]
    return running[inverse[1:]].reshape(ts.shape)


class RunningIntegrals:
    """Memoised ``theta`` and weighted integrals on a fixed time grid.

    Keyed on ``(a, grid)``; safe to share between threads.
    """

    def __init__(self, rho0: TimeFunction, a: float, grid, cfg: QuadratureConfig | None = None):
        self.rho0 = rho0
        self.a = float(a)
        self.grid = np.array(grid, dtype=float)
        self.grid.flags.writeable = False
        self.cfg = cfg
        self._lock = threading.Lock()
        self._theta = None
        self._weighted: dict = {}

    @property
    def theta(self) -> np.ndarray:
        with self._lock:
            if self._theta is None:
                self._theta = theta_at(self.rho0, self.a, self.grid, self.cfg)
                self._theta.flags.writeable = False
            return self._theta

    def weighted(self, f: TimeFunction, sign: int) -> np.ndarray:
        key = (f.describe(), sign)
        with self._lock:
            if key not in self._weighted:
                out = weighted_integral_at(f, self.rho0, sign, self.a, self.grid, self.cfg)
                out.flags.writeable = False
                self._weighted[key] = out
            return self._weighted[key]
