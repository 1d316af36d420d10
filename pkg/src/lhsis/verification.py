"""The invariant suite run by ``lhsis verify``.

Every check records a measured value and the tolerance it is held to; a
check that cannot run for the configured algebra is recorded as skipped.
Point sampling uses ``numpy.random.default_rng(seed)`` so reports are
reproducible byte for byte.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable

import numpy as np

from . import algebra as alg
from . import dynamics as dyn
from . import superposition as sup
from .algebra import Algebra
from .coeffs import ZERO, TimeFunction, parse_expression
from .config import RunConfig
from .errors import LHSISError
from .transform import Chart, PhaseState, cart_to_epi, epi_to_cart, jacobian_det_many

# Where the algebra checks sample: |u| <= 2, 0.5 <= |v| <= 2 and |u^2 v^2 - 1| >= 0.5.
# Central differences lose accuracy near the chart poles, where the fields are large.
ALGEBRA_U_MAX = 2.0
ALGEBRA_V_RANGE = (0.5, 2.0)
ALGEBRA_POLE_MARGIN = 0.5

# The transform checks use the full regular domain of the round-trip property.
TRANSFORM_Q_MAX = 5.0
TRANSFORM_P_RANGE = (0.1, 5.0)
TRANSFORM_POLE_MARGIN = 1e-3


@dataclass
class Check:
    name: str
    status: str  # "pass", "fail" or "skip"
    measured: float | None
    tolerance: float | None
    detail: str = ""

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "status": self.status,
            "measured": self.measured,
            "tolerance": self.tolerance,
            "detail": self.detail,
        }


@dataclass
class RunReport:
    """Append-only list of checks."""

    checks: list[Check] = field(default_factory=list)

    def add(self, name: str, measured: float, tolerance: float, detail: str = "") -> Check:
        ok = measured is not None and math.isfinite(measured) and measured < tolerance
        check = Check(name, "pass" if ok else "fail", measured, tolerance, detail)
        self.checks.append(check)
        return check

    def skip(self, name: str, reason: str) -> Check:
        check = Check(name, "skip", None, None, reason)
        self.checks.append(check)
        return check

    def error(self, name: str, tolerance: float, exc: Exception) -> Check:
        check = Check(name, "fail", None, tolerance, f"{type(exc).__name__}: {exc}")
        self.checks.append(check)
        return check

    @property
    def passed(self) -> bool:
        return all(c.status != "fail" for c in self.checks)

    def as_dict(self) -> dict:
        return {"passed": self.passed, "checks": [c.as_dict() for c in self.checks]}


# ---------------------------------------------------------------------------
# sampling


def sample_regular(rng: np.random.Generator, n: int, u_max: float, v_range, pole_margin: float):
    """``n`` points with ``|u| <= u_max``, ``|v|`` in ``v_range`` and ``|u^2 v^2 - 1| > pole_margin``."""
    us, vs = [], []
    have = 0
    while have < n:
        m = 2 * (n - have) + 16
        u = rng.uniform(-u_max, u_max, m)
        v = rng.uniform(*v_range, m) * rng.choice([-1.0, 1.0], m)
        keep = np.abs(u * u * v * v - 1.0) > pole_margin
        us.append(u[keep])
        vs.append(v[keep])
        have += int(keep.sum())
    return np.concatenate(us)[:n], np.concatenate(vs)[:n]


def random_smooth_coefficient(rng: np.random.Generator, scale: float = 1.0, offset: float = 0.0) -> TimeFunction:
    """``offset + scale*(c0 + c1 sin(w t + phi))`` with random c0, c1, w, phi, as an expression."""
    c0 = rng.uniform(-0.5, 0.5)
    c1 = rng.uniform(0.1, 0.5)
    w = rng.uniform(0.5, 2.0)
    phi = rng.uniform(0.0, 2 * math.pi)
    text = f"{offset!r} + {scale!r}*({c0!r} + {c1!r}*sin({w!r}*t + {phi!r}))"
    return parse_expression(text)


def random_spec(rng: np.random.Generator, algebra: Algebra, chart: Chart = Chart.CARTESIAN) -> dyn.SystemSpec:
    """A system with random smooth coefficients; ``b4`` stays away from zero for h6."""
    algebra = Algebra(algebra)
    gens = alg.GENERATORS[algebra]
    coeffs = {"rho0": random_smooth_coefficient(rng, offset=0.5)}
    if 2 in gens:
        coeffs["b2"] = random_smooth_coefficient(rng)
    if 1 in gens:
        coeffs["b1"] = random_smooth_coefficient(rng)
    if 4 in gens:
        coeffs["b4"] = random_smooth_coefficient(rng, scale=0.3, offset=0.8)
        coeffs["b5"] = random_smooth_coefficient(rng, scale=0.5, offset=-0.5)
    return dyn.SystemSpec(algebra, chart, **coeffs)


def restrict(spec: dyn.SystemSpec, algebra: Algebra) -> dyn.SystemSpec:
    """The subsystem obtained by zeroing the coefficients outside ``algebra``."""
    algebra = Algebra(algebra)
    gens = alg.GENERATORS[algebra]
    kwargs = {name: (spec.coefficient(i) if i in gens else ZERO) for name, i in dyn.COEFFICIENT_INDEX.items()}
    return dyn.SystemSpec(algebra, spec.chart, a=spec.a, quad=spec.quad, **kwargs)


# ---------------------------------------------------------------------------
# individual checks; each returns the measured error


def transform_roundtrip_error(rng, n: int) -> float:
    q, p = sample_regular(rng, n, TRANSFORM_Q_MAX, TRANSFORM_P_RANGE, TRANSFORM_POLE_MARGIN)
    q2, p2 = cart_to_epi(*epi_to_cart(q, p))
    return float(max(np.max(np.abs(q2 - q) / np.maximum(np.abs(q), 1e-300)), np.max(np.abs(p2 - p) / np.abs(p))))


def transform_jacobian_error(rng, n: int) -> float:
    q, p = sample_regular(rng, n, TRANSFORM_Q_MAX, TRANSFORM_P_RANGE, TRANSFORM_POLE_MARGIN)
    worst = float(np.max(np.abs(jacobian_det_many(q, p, Chart.EPIDEMIC) - 1.0)))
    x, y = epi_to_cart(q, p)
    return max(worst, float(np.max(np.abs(jacobian_det_many(x, y, Chart.CARTESIAN) - 1.0))))


def algebra_errors(algebra: Algebra, rng, n: int) -> dict[str, float]:
    """Worst commutator, Poisson-bracket and contraction defects over ``n`` points per chart."""
    gens = alg.GENERATORS[Algebra(algebra)]
    worst = {"commutators": 0.0, "poisson": 0.0, "contraction": 0.0}
    for chart in Chart:
        u, v = sample_regular(rng, n, ALGEBRA_U_MAX, ALGEBRA_V_RANGE, ALGEBRA_POLE_MARGIN)
        for uu, vv in zip(u, v):
            pt = PhaseState(chart, uu, vv)
            for a, b in itertools.combinations(gens, 2):
                worst["commutators"] = max(worst["commutators"], alg.commutator_defect(algebra, a, b, pt))
                worst["poisson"] = max(worst["poisson"], alg.poisson_defect(algebra, a, b, pt))
            for i in gens:
                worst["contraction"] = max(worst["contraction"], alg.contraction_defect(i, pt))
    return worst


def casimir_exact_defect(algebra: Algebra, rng, n: int = 100) -> int:
    """Number of (vector, generator) pairs where ``{C, v_i}`` is not exactly 0 in rationals."""
    bad = 0
    gens = alg.GENERATORS[Algebra(algebra)]
    for _ in range(n):
        v = {i: Fraction(int(rng.integers(-50, 51)), int(rng.integers(1, 20))) for i in range(6)}
        bad += sum(alg.lie_poisson_with_generator(algebra, v, i) != 0 for i in gens)
    return bad


NM_CASES = ((1.0, 1.0, 0.0), (2.0, 3.0, 5.0), (0.5, 2.0, 1.0))


def constant_rate_error(n: int = 100) -> float:
    """Relative gap between the constant-rate book solution and the classical form."""
    worst = 0.0
    for rho0, tc1, tc2 in NM_CASES:
        c = dyn.nm_constants(rho0, tc1, tc2)
        for t in np.linspace(0.0, 5.0, n):
            got = dyn.exact_constant_book(rho0, c, float(t))
            ref = dyn.nm_solution(rho0, tc1, tc2, float(t))
            worst = max(worst, max(abs(g - r) / max(1.0, abs(r)) for g, r in zip(got, ref)))
    return worst


def exact_vs_integrator(
    spec: dyn.SystemSpec, c: dyn.IntegrationConstants, t0: float, t1: float, samples: int, tol: float = 1e-10
) -> float:
    ts = np.linspace(t0, t1, samples)
    exact = dyn.exact_trajectory(spec, c, ts)
    start = PhaseState(spec.chart, *exact.coords[0])
    num = dyn.integrate(spec, start, t0, t1, tol=tol, t_eval=ts)
    return float(np.max(np.abs(exact.coords - num.coords) / np.maximum(1.0, np.abs(exact.coords))))


def book_oscillator_path_gap(spec_b2: dyn.SystemSpec, c: dyn.IntegrationConstants, ts) -> float:
    spec_h4 = dyn.SystemSpec(Algebra.H4, spec_b2.chart, rho0=spec_b2.rho0, b2=spec_b2.b2, a=spec_b2.a, quad=spec_b2.quad)
    worst = 0.0
    for t in ts:
        a = dyn.exact_book(spec_b2, c, float(t)).coords
        b = dyn.exact_oscillator(spec_h4, c, float(t)).coords
        worst = max(worst, max(abs(x - y) for x, y in zip(a, b)))
    return worst


def second_order_residual(spec: dyn.SystemSpec, state0: PhaseState, t0: float, t1: float, n: int = 60) -> float:
    """Sup-norm residual of ``x'' - L x' + A x - B`` along an integrated Cartesian trajectory.

    ``x'`` is a five-point central difference of the sampled positions and
    ``x''`` the same stencil applied to the sampled velocity ``dx/dt`` from
    the vector field, both with step ``1e-2`` (truncation ``O(d^4)``).
    """
    spec = spec.with_chart(Chart.CARTESIAN)
    d = 1e-2
    offsets = np.array([-2, -1, 1, 2]) * d
    weights = np.array([1.0, -8.0, 8.0, -1.0]) / (12 * d)
    centres = np.linspace(t0 + 3 * d, t1 - 3 * d, n)
    ts = np.sort(np.concatenate([centres + o for o in offsets] + [centres]))
    traj = dyn.integrate(spec, state0.to(Chart.CARTESIAN), t0, t1, tol=1e-12, t_eval=ts)
    rows = traj.coords.reshape(n, 5, 2)
    worst = 0.0
    for k, t in enumerate(centres):
        side = rows[k][[0, 1, 3, 4]]
        x = rows[k][2, 0]
        xdot = float(weights @ side[:, 0])
        vel = np.array([dyn.rhs_arrays(spec, t + o, u, v)[0] for o, (u, v) in zip(offsets, side)])
        xddot = float(weights @ vel)
        a_coef, b_coef, logd = dyn.h6_second_order_coeffs(spec, float(t))
        worst = max(worst, abs(xddot - logd * xdot + a_coef * x - b_coef))
    return float(worst)


def circle_error(tol: float = 1e-10) -> float:
    spec = dyn.SystemSpec(Algebra.H6, Chart.CARTESIAN, b4=1.0, b5=-1.0)
    end = dyn.integrate(spec, PhaseState.cartesian(1.0, 0.0), 0.0, math.pi / 2, tol=tol).end
    return float(max(abs(end.u - 0.0), abs(end.v + 1.0)))


def _invariants(algebra: Algebra, coords) -> dict[str, float]:
    """Implemented F-invariants on Cartesian copies (copy 1 first)."""
    x, y = coords[:, 0], coords[:, 1]
    if algebra is Algebra.H6:
        out = {f"D{a + 1}{b + 1}{c + 1}": sup._signed(x, y, a, b, c) for a, b, c in itertools.combinations(range(4), 3)}
        out["F3"] = sup.motion_constant(Algebra.H6, 3, coords)
        out["F4"] = sup.motion_constant(Algebra.H6, 4, coords)
        return out
    return {
        "F2": sup.motion_constant(Algebra.H4, 2, coords),
        "F3": sup.motion_constant(Algebra.H4, 3, coords),
    }


def invariant_series(spec: dyn.SystemSpec, copies, t0: float, t1: float, samples: int, tol: float = 1e-10):
    """Integrate the prolonged system and evaluate its invariants at each sample.

    b2 systems use the h4 invariants (b2 is the ``b1 = 0`` case of h4).

    Returns:
        ``(times, {name: values})``.
    """
    algebra = Algebra.H6 if spec.algebra is Algebra.H6 else Algebra.H4
    cart = spec.with_chart(Chart.CARTESIAN)
    ts, coords = dyn.integrate_prolonged(cart, [c.to(Chart.CARTESIAN) for c in copies], t0, t1, tol=tol, samples=samples)
    series: dict[str, list[float]] = {}
    for row in coords:
        for name, val in _invariants(algebra, row).items():
            series.setdefault(name, []).append(val)
    return ts, {k: np.array(v) for k, v in series.items()}


def relative_drift(values: np.ndarray) -> float:
    return float(np.max(np.abs(values - values[0])) / max(1.0, abs(values[0])))


def conservation_drift(spec: dyn.SystemSpec, copies, t0: float, t1: float, samples: int = 101, tol: float = 1e-10) -> float:
    _, series = invariant_series(spec, copies, t0, t1, samples, tol)
    return max(relative_drift(v) for v in series.values())


def reconstruction_error(spec: dyn.SystemSpec, general: PhaseState, particulars, t0: float, t1: float, samples: int = 101) -> float:
    """Worst pointwise gap between a withheld integrated solution and its superposition.

    Constants (and the h4 branch) are fixed at ``t0``; the gap is measured in
    ``spec.chart``, relative to ``max(1, |coordinate|)``.
    """
    h6 = spec.algebra is Algebra.H6
    chart = spec.chart
    ts, coords = dyn.integrate_prolonged(spec, [general, *particulars], t0, t1, tol=1e-11, samples=samples)
    first = coords[0]
    if h6:
        mc = sup.extract_constants(Algebra.H6, first[0], first[1:], chart)
    else:
        mc = sup.extract_constants(Algebra.H4, first[0], first[1:], chart)
        branch = sup.resolve_branch_h4(first[0], first[1], first[2], mc.k1, mc.k, chart)
    worst = 0.0
    for row in coords:
        if h6:
            got = sup.superpose_h6(row[1], row[2], row[3], mc.k1, mc.k2, chart)
        else:
            got = sup.superpose_h4(row[1], row[2], mc.k1, mc.k, branch, chart)
        worst = max(worst, float(np.max(np.abs(np.subtract(got, row[0])) / np.maximum(1.0, np.abs(row[0])))))
    return worst


# ---------------------------------------------------------------------------
# the suite


def _run(report: RunReport, name: str, tolerance: float, fn: Callable[[], float], detail: str = "") -> None:
    try:
        report.add(name, fn(), tolerance, detail)
    except (LHSISError, ValueError, ArithmeticError) as exc:
        report.error(name, tolerance, exc)


def run_suite(cfg: RunConfig) -> RunReport:
    """All checks for ``cfg``; the configured system and its subsystems.

    Oracle comparisons integrate at ``cfg.tol``. The reconstruction and
    second-order checks use fixed tighter tolerances (1e-11, 1e-12) since
    they measure formulas, not the integrator.
    """
    rng = np.random.default_rng(cfg.seed)
    report = RunReport()
    n = cfg.verify_points

    _run(report, "transform.roundtrip", 1e-10, lambda: transform_roundtrip_error(rng, 100 * n), f"{100 * n} points")
    _run(report, "transform.jacobian_det", 1e-8, lambda: transform_jacobian_error(rng, 10 * n), f"{10 * n} points per direction")

    for algebra in Algebra:
        try:
            errs = algebra_errors(algebra, rng, n)
        except (LHSISError, ValueError) as exc:
            report.error(f"algebra.{algebra.value}", 1e-5, exc)
            continue
        for key, val in errs.items():
            report.add(f"algebra.{algebra.value}.{key}", val, 1e-5, f"{n} points per chart")
    for algebra in (Algebra.H4, Algebra.H6):
        _run(report, f"algebra.{algebra.value}.casimir", 1, lambda a=algebra: casimir_exact_defect(a, rng), "exact rational arithmetic; count of nonzero brackets")

    _run(report, "dynamics.constant_rate", 1e-10, constant_rate_error, "book solution vs classical form")
    _run(report, "dynamics.circle", 1e-6, lambda: circle_error(cfg.tol))

    spec = cfg.spec(Chart.CARTESIAN)
    t0, t1 = cfg.t0, cfg.t1
    start = cfg.initial or PhaseState.cartesian(1.0, 2.0)

    subsystems = [a for a in (Algebra.B2, Algebra.H4) if a in _chain_below(cfg.algebra)]
    for sub in subsystems:
        sspec = restrict(spec, sub)
        c = dyn.constants_from_initial(sspec, start, t0)
        _run(report, f"dynamics.exact_{sub.value}", 1e-6, lambda s=sspec, c=c: exact_vs_integrator(s, c, t0, t1, 51, cfg.tol))
    if Algebra.B2 in subsystems:
        b2 = restrict(spec, Algebra.B2)
        c = dyn.constants_from_initial(b2, start, t0)
        _run(report, "dynamics.book_vs_oscillator", 1e-14, lambda: book_oscillator_path_gap(b2, c, np.linspace(t0, t1, 21)))

    if cfg.algebra is Algebra.H6 and not spec.b4.is_zero:
        _run(report, "dynamics.second_order_residual", 1e-5, lambda: second_order_residual(spec, start, t0, t1))
    else:
        report.skip("dynamics.second_order_residual", "needs an h6 system with b4 != 0")

    algebra_for_rules = Algebra.H6 if cfg.algebra is Algebra.H6 else Algebra.H4
    copies = cfg.copies or _default_copies(algebra_for_rules)
    _run(report, "superposition.conservation", 1e-6, lambda: conservation_drift(spec, copies, t0, t1, tol=cfg.tol))
    particulars = cfg.particulars or copies[1:]
    _run(report, "superposition.reconstruction", 1e-5, lambda: reconstruction_error(spec, start, particulars, t0, t1))
    return report


def _chain_below(algebra: Algebra) -> tuple[Algebra, ...]:
    return {Algebra.B2: (Algebra.B2,), Algebra.H4: (Algebra.B2, Algebra.H4), Algebra.H6: (Algebra.B2, Algebra.H4)}[algebra]


def _default_copies(algebra: Algebra) -> tuple[PhaseState, ...]:
    pts = [(1.0, 2.0), (0.5, 0.2), (1.0, -0.3), (-0.4, 0.8)]
    m = 4 if algebra is Algebra.H6 else 3
    return tuple(PhaseState.cartesian(*p) for p in pts[:m])
