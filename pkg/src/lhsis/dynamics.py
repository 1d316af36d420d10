"""The SIS Lie-Hamilton systems with their integration oracle and exact solutions.

A system is ``X = sum_i b_i(t) X_i`` over the generators of its algebra, with
coefficients attached by global index::

    1: b1    2: b2 (``b`` in the book system)    3: rho0    4: b4    5: b5

so the book system is ``rho0 X_A + b X_B`` and zeroing coefficients walks down
the chain h6 -> h4 -> b2. The Hamiltonian is ``h = sum_i b_i(t) h_i``.

In Cartesian coordinates the b2 and h4 systems decouple into linear equations
with closed-form solutions (:func:`exact_book`, :func:`exact_oscillator`);
epidemic-chart values are the images of those under the canonical map.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import algebra as alg
from .algebra import Algebra
from .coeffs import (
    ZERO,
    RunningIntegrals,
    TimeFunction,
    as_time_function,
    theta,
    weighted_integral,
)
from .errors import DomainError, SingularPointError
from .integrator import StepControl, solve
from .quadrature import QuadratureConfig
from .transform import (
    Chart,
    PhaseState,
    cart_to_epi,
    cartesian_invertible,
    require_epidemic_regular,
)

COEFFICIENT_INDEX = {"b1": 1, "b2": 2, "rho0": 3, "b4": 4, "b5": 5}
INDEX_COEFFICIENT = {i: name for name, i in COEFFICIENT_INDEX.items()}


@dataclass(frozen=True)
class SystemSpec:
    """One system: its algebra and chart together with the coefficients.

    Coefficients outside the algebra must be the zero function; constructing
    a b2 spec with a nonzero ``b4``, say, raises ``ValueError``.
    """

    algebra: Algebra
    chart: Chart = Chart.CARTESIAN
    rho0: TimeFunction = ZERO
    b1: TimeFunction = ZERO
    b2: TimeFunction = ZERO
    b4: TimeFunction = ZERO
    b5: TimeFunction = ZERO
    a: float = 0.0
    quad: QuadratureConfig = field(default_factory=QuadratureConfig)

    def __post_init__(self):
        object.__setattr__(self, "algebra", Algebra(self.algebra))
        object.__setattr__(self, "chart", Chart(self.chart))
        object.__setattr__(self, "a", float(self.a))
        for name in COEFFICIENT_INDEX:
            object.__setattr__(self, name, as_time_function(getattr(self, name)))
        gens = alg.GENERATORS[self.algebra]
        for name, i in COEFFICIENT_INDEX.items():
            if i not in gens and not getattr(self, name).is_zero:
                raise ValueError(
                    f"coefficient {name} must be zero for the {self.algebra.value} algebra"
                )
        # not a field: excluded from eq/hash/repr, computed once
        object.__setattr__(
            self, "_active", tuple((i, self.coefficient(i)) for i in gens if not self.coefficient(i).is_zero)
        )

    def coefficient(self, i: int) -> TimeFunction:
        return getattr(self, INDEX_COEFFICIENT[i])

    def active(self) -> tuple[tuple[int, TimeFunction], ...]:
        """Generators of the algebra with nonzero coefficients, by index."""
        return self._active

    def with_chart(self, chart: Chart) -> "SystemSpec":
        return replace(self, chart=Chart(chart))

    def describe(self) -> str:
        parts = [f"algebra={self.algebra.value}", f"chart={self.chart.value}", f"a={self.a!r}"]
        parts += [f"{name}={getattr(self, name).describe()}" for name in COEFFICIENT_INDEX]
        q = self.quad
        parts.append(f"quad=({q.abs_tol!r},{q.rel_tol!r},{q.max_depth})")
        return ";".join(parts)

    @property
    def spec_hash(self) -> str:
        return hashlib.sha256(self.describe().encode()).hexdigest()[:16]


@dataclass(frozen=True)
class IntegrationConstants:
    c1: float
    c2: float


@dataclass(frozen=True)
class Trajectory:
    """Samples of one solution in a single chart.

    ``coords[i] = (u, v)`` at ``times[i]``; ``states`` gives the same samples
    as :class:`PhaseState` objects.
    """

    times: np.ndarray
    coords: np.ndarray
    chart: Chart
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        times = np.array(self.times, dtype=float)
        coords = np.array(self.coords, dtype=float).reshape(-1, 2)
        if times.shape[0] != coords.shape[0]:
            raise ValueError("times and coords differ in length")
        if np.any(np.diff(times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")
        times.flags.writeable = False
        coords.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "chart", Chart(self.chart))

    def __len__(self):
        return self.times.size

    @property
    def states(self) -> tuple[PhaseState, ...]:
        return tuple(PhaseState(self.chart, u, v) for u, v in self.coords)

    @property
    def end(self) -> PhaseState:
        return PhaseState(self.chart, *self.coords[-1])


# ---------------------------------------------------------------------------
# right-hand sides and Hamiltonians


def _coeff_values(spec: SystemSpec, t: float) -> list[tuple[int, float]]:
    return [(i, f(t)) for i, f in spec.active()]


def rhs_arrays(spec: SystemSpec, t: float, u, v):
    """Vector field at time ``t`` on arrays of points in ``spec.chart``."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if spec.chart is Chart.EPIDEMIC:
        require_epidemic_regular(u, v)
    du = np.zeros(np.broadcast(u, v).shape)
    dv = np.zeros_like(du)
    for i, c in _coeff_values(spec, t):
        if c == 0.0:
            continue
        fu, fv = alg._field_raw(i, u, v, spec.chart)
        du = du + c * fu
        dv = dv + c * fv
    return du, dv


def rhs(spec: SystemSpec, t: float, state: PhaseState) -> tuple[float, float]:
    """``(du/dt, dv/dt)`` at ``state``, which is first moved to ``spec.chart``.

    Raises:
        SingularPointError: the state is on a pole of the epidemic chart.
    """
    state = state.to(spec.chart)
    du, dv = rhs_arrays(spec, t, state.u, state.v)
    return float(du), float(dv)


def hamiltonian(spec: SystemSpec, t: float, state: PhaseState) -> float:
    """``sum_i b_i(t) h_i(state)`` evaluated in the state's own chart."""
    total = 0.0
    for i, c in _coeff_values(spec, t):
        total += c * float(alg.hamiltonian_function(i, state.u, state.v, state.chart))
    return total


# ---------------------------------------------------------------------------
# numerical integration


def _control(tol: float) -> StepControl:
    return StepControl(rtol=tol, atol=tol)


def _sample_times(t0: float, t1: float, samples: int | None, t_eval) -> np.ndarray:
    if t_eval is not None:
        ts = np.asarray(t_eval, dtype=float)
        if ts.size == 0 or ts[0] < t0 or ts[-1] > t1 or np.any(np.diff(ts) <= 0):
            raise ValueError("t_eval must be strictly increasing inside [t0, t1]")
        return ts
    if t1 == t0:
        return np.array([t0])
    n = 200 if samples is None else int(samples)
    if n < 2:
        raise ValueError("samples must be >= 2")
    return np.linspace(t0, t1, n)


def integrate(
    spec: SystemSpec,
    state0: PhaseState,
    t0: float,
    t1: float,
    tol: float = 1e-10,
    samples: int | None = None,
    t_eval: Sequence[float] | None = None,
) -> Trajectory:
    """Integrate the system from ``state0`` at ``t0`` up to ``t1 >= t0``.

    Output is sampled at ``t_eval`` or, by default, at ``samples`` (200)
    equally spaced times including both ends. Sampling does not affect the
    steps taken.

    Raises:
        StepSizeUnderflowError: the solution ran into a pole of the chart.
        SingularStateError: a singular state was reached (or given).
    """
    t0, t1 = float(t0), float(t1)
    if t1 < t0:
        raise ValueError("integrate needs t1 >= t0")
    state0 = state0.to(spec.chart)
    ts = _sample_times(t0, t1, samples, t_eval)

    def f(t, y):
        du, dv = rhs_arrays(spec, t, y[0], y[1])
        return np.array([du, dv])

    if spec.chart is Chart.EPIDEMIC:
        f(t0, np.array(state0.coords))  # reject a singular start before stepping
    sol = solve(f, t0, state0.coords, t1, t_eval=ts, control=_control(tol))
    meta = {"spec_hash": spec.spec_hash, "rtol": tol, "atol": tol, "steps": sol.n_accepted}
    return Trajectory(sol.t, sol.y, spec.chart, meta)


def integrate_prolonged(
    spec: SystemSpec,
    states0: Sequence[PhaseState],
    t0: float,
    t1: float,
    tol: float = 1e-10,
    samples: int | None = None,
    t_eval: Sequence[float] | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Integrate several copies of the system together (diagonal prolongation).

    All copies share one step sequence, so their samples are synchronous.

    Returns:
        ``(times, coords)`` with ``coords`` shaped ``(len(times), n_copies, 2)``.
    """
    t0, t1 = float(t0), float(t1)
    if t1 < t0:
        raise ValueError("integrate_prolonged needs t1 >= t0")
    y0 = np.array([s.to(spec.chart).coords for s in states0], dtype=float).ravel()
    ts = _sample_times(t0, t1, samples, t_eval)

    def f(t, y):
        du, dv = rhs_arrays(spec, t, y[0::2], y[1::2])
        out = np.empty_like(y)
        out[0::2], out[1::2] = du, dv
        return out

    f(t0, y0)
    sol = solve(f, t0, y0, t1, t_eval=ts, control=_control(tol))
    return sol.t, sol.y.reshape(sol.t.size, -1, 2)


# ---------------------------------------------------------------------------
# closed-form solutions


def _require(spec: SystemSpec, *allowed: Algebra) -> None:
    if spec.algebra not in allowed:
        names = ", ".join(a.value for a in allowed)
        raise ValueError(f"closed form needs algebra in ({names}), got {spec.algebra.value}")


def _linear_parts(spec: SystemSpec, c: IntegrationConstants, t: float):
    """``(X, Y, Theta)`` with ``x = X e^Theta``, ``y = Y e^-Theta``."""
    th = theta(spec.rho0, spec.a, t, spec.quad)
    big_x = c.c1 + weighted_integral(spec.b1, spec.rho0, -1, spec.a, t, spec.quad)
    big_y = c.c2 + weighted_integral(spec.b2, spec.rho0, +1, spec.a, t, spec.quad)
    return big_x, big_y, th


def _linear_parts_grid(spec: SystemSpec, c: IntegrationConstants, ts, cache: RunningIntegrals | None):
    cache = cache or RunningIntegrals(spec.rho0, spec.a, ts, spec.quad)
    if cache.a != spec.a or not np.array_equal(cache.grid, np.asarray(ts, dtype=float)):
        raise ValueError("running-integral cache was built for another (a, grid)")
    big_x = c.c1 + cache.weighted(spec.b1, -1)
    big_y = c.c2 + cache.weighted(spec.b2, +1)
    return big_x, big_y, cache.theta


def _epidemic_from_parts(big_x, big_y, th):
    """Image of ``(X e^Theta, Y e^-Theta)`` written in ``X, Y, Theta``.

    ``q = X^2 Y e^Theta / (X^2 Y^2 - 1)``, ``p = (X^2 Y^2 - 1) e^-Theta / X``
    (the x^2 y^2 product does not involve Theta).
    """
    big_x = np.asarray(big_x, dtype=float)
    big_y = np.asarray(big_y, dtype=float)
    s = big_x * big_x * big_y * big_y - 1.0
    with np.errstate(all="ignore"):
        q = big_x * big_x * big_y * np.exp(th) / s
        p = s * np.exp(-th) / big_x
    return q, p


def _state_in_chart(chart: Chart, x: float, y: float) -> PhaseState:
    if chart is Chart.CARTESIAN:
        return PhaseState.cartesian(x, y)
    return PhaseState.epidemic(*cart_to_epi(x, y))


def exact_oscillator(spec: SystemSpec, c: IntegrationConstants, t: float) -> PhaseState:
    """Closed-form h4 (or b2) solution at ``t`` in ``spec.chart``.

    ``x = (c1 + int_a^t e^-Theta b1) e^Theta``, ``y = (c2 + int_a^t e^Theta b2) e^-Theta``.
    The epidemic value is the canonical image of the Cartesian one.

    Raises:
        SingularPointError: the Cartesian value has no epidemic image.
    """
    _require(spec, Algebra.H4, Algebra.B2)
    big_x, big_y, th = _linear_parts(spec, c, t)
    return _state_in_chart(spec.chart, big_x * math.exp(th), big_y * math.exp(-th))


def exact_book(spec: SystemSpec, c: IntegrationConstants, t: float) -> PhaseState:
    """Closed-form b2 solution: ``x = c1 e^Theta``, ``y = (c2 + int_a^t e^Theta b) e^-Theta``."""
    _require(spec, Algebra.B2)
    return exact_oscillator(spec, c, t)


def exact_direct(spec: SystemSpec, c: IntegrationConstants, t: float) -> PhaseState:
    """Epidemic-chart solution evaluated from the expanded (q, p) formulas.

    Independent of the chart map; used to cross-check :func:`exact_oscillator`.
    With ``b1 = 0`` this is the book formula
    ``q = Y e^Theta / (Y^2 - c1^-2)``, ``p = (c1 Y^2 - 1/c1) e^-Theta``.
    """
    _require(spec, Algebra.H4, Algebra.B2)
    big_x, big_y, th = _linear_parts(spec, c, t)
    if spec.b1.is_zero:
        q = big_y * math.exp(th) / (big_y**2 - c.c1**-2)
        p = (c.c1 * big_y**2 - 1 / c.c1) * math.exp(-th)
    else:
        q, p = _epidemic_from_parts(big_x, big_y, th)
    return PhaseState.epidemic(float(q), float(p))


def exact_trajectory(
    spec: SystemSpec,
    c: IntegrationConstants,
    ts: Sequence[float],
    cache: RunningIntegrals | None = None,
) -> Trajectory:
    """Closed-form h4/b2 solution on a grid, reusing running integrals.

    Raises:
        SingularPointError: some sample has no epidemic image; the message
            names the first such time.
    """
    _require(spec, Algebra.H4, Algebra.B2)
    ts = np.asarray(ts, dtype=float)
    big_x, big_y, th = _linear_parts_grid(spec, c, ts, cache)
    x = big_x * np.exp(th)
    y = big_y * np.exp(-th)
    if spec.chart is Chart.CARTESIAN:
        coords = np.column_stack([x, y])
    else:
        coords = np.column_stack(_map_rows_to_epidemic(ts, x, y))
    return Trajectory(ts, coords, spec.chart, {"spec_hash": spec.spec_hash, "source": "exact"})


def _map_rows_to_epidemic(ts, x, y):
    ok = cartesian_invertible(x, y)
    if not np.all(ok):
        i = int(np.flatnonzero(~ok)[0])
        raise SingularPointError(
            f"no epidemic image at t = {float(ts[i])!r}: (x, y) = ({float(x[i])!r}, {float(y[i])!r})"
        )
    return cart_to_epi(x, y)


def exact_constant_book(rho0: float, c: IntegrationConstants, t: float) -> tuple[float, float]:
    """Book solution for constant ``rho0``, ``b = 1`` and ``a = 0``.

    With ``E = e^(rho0 t) + c2 rho0 - 1``::

        q = rho0 E e^(rho0 t) / (E^2 - rho0^2 / c1^2)
        p = (c1 E^2 / rho0^2 - 1 / c1) e^(-rho0 t)
    """
    if rho0 == 0:
        raise ValueError("the constant-rate form needs rho0 != 0")
    g = math.exp(rho0 * t)
    e = g + c.c2 * rho0 - 1.0
    den = e * e - rho0 * rho0 / (c.c1 * c.c1)
    if den == 0 or c.c1 == 0:
        raise SingularPointError(f"constant-rate solution is singular at t = {t!r}")
    return rho0 * e * g / den, (c.c1 * e * e / (rho0 * rho0) - 1.0 / c.c1) / g


def nm_constants(rho0: float, tc1: float, tc2: float) -> IntegrationConstants:
    """Constants turning the constant-rate book solution into the classical form.

    ``c1 = rho0 / sqrt(tc1^2 - tc2)``, ``c2 = (tc1 + 1) / rho0``.
    """
    if rho0 == 0:
        raise ValueError("rho0 must be nonzero")
    radicand = tc1 * tc1 - tc2
    if not radicand > 0:
        raise DomainError(f"tc1^2 - tc2 = {radicand!r} must be positive")
    return IntegrationConstants(rho0 / math.sqrt(radicand), (tc1 + 1.0) / rho0)


def nm_solution(rho0: float, tc1: float, tc2: float, t: float) -> tuple[float, float]:
    """The classical constant-rate SIS solution in ``(q, p)``.

    ``q = rho0 (1 + tc1 w) / (1 + 2 tc1 w + tc2 w^2)`` and
    ``p = (1 + 2 tc1 w + tc2 w^2) / (rho0 sqrt(tc1^2 - tc2) w)`` with ``w = e^(-rho0 t)``.
    """
    w = math.exp(-rho0 * t)
    den = 1.0 + 2.0 * tc1 * w + tc2 * w * w
    return rho0 * (1.0 + tc1 * w) / den, den / (rho0 * math.sqrt(tc1 * tc1 - tc2) * w)


def constants_from_initial(spec: SystemSpec, state0: PhaseState, t0: float) -> IntegrationConstants:
    """Invert the closed form at ``t0``: ``c1 = x0 e^-Theta(t0) - W1(t0)``, ``c2 = y0 e^Theta(t0) - W2(t0)``.

    ``W1 = int_a^t0 e^-Theta b1`` and ``W2 = int_a^t0 e^Theta b2``.
    """
    _require(spec, Algebra.H4, Algebra.B2)
    x0, y0 = state0.to(Chart.CARTESIAN).coords
    th = theta(spec.rho0, spec.a, t0, spec.quad)
    w1 = weighted_integral(spec.b1, spec.rho0, -1, spec.a, t0, spec.quad)
    w2 = weighted_integral(spec.b2, spec.rho0, +1, spec.a, t0, spec.quad)
    return IntegrationConstants(x0 * math.exp(-th) - w1, y0 * math.exp(th) - w2)


# ---------------------------------------------------------------------------
# h6 second-order reduction


def h6_second_order_coeffs(spec: SystemSpec, t: float) -> tuple[float, float, float]:
    """Coefficients of ``x'' - L x' + A x = B`` obtained by eliminating ``y``.

    ``L = b4'/b4``, ``A = rho0 L - rho0^2 - b4 b5 - rho0'`` and
    ``B = -b1 L + rho0 b1 + b2 b4 + b1'``; derivatives are numerical.

    Raises:
        DomainError: ``b4(t) == 0``.
    """
    _require(spec, Algebra.H6)
    b4 = spec.b4(t)
    if b4 == 0:
        raise DomainError(f"the reduction needs b4(t) != 0; b4({t!r}) = 0")
    r0, b1, b2, b5 = spec.rho0(t), spec.b1(t), spec.b2(t), spec.b5(t)
    logd = spec.b4.derivative(t) / b4
    a_coef = r0 * logd - r0 * r0 - b4 * b5 - spec.rho0.derivative(t)
    b_coef = -b1 * logd + r0 * b1 + b2 * b4 + spec.b1.derivative(t)
    return float(a_coef), float(b_coef), float(logd)


__all__ = [
    "SystemSpec",
    "IntegrationConstants",
    "Trajectory",
    "rhs",
    "rhs_arrays",
    "hamiltonian",
    "integrate",
    "integrate_prolonged",
    "exact_book",
    "exact_oscillator",
    "exact_direct",
    "exact_trajectory",
    "exact_constant_book",
    "nm_constants",
    "nm_solution",
    "constants_from_initial",
    "h6_second_order_coeffs",
]
