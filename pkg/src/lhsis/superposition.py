"""Constants of motion on diagonal prolongations and nonlinear superposition rules.

Copies are numbered from 1 as in the formulas: copy 1 is the general
solution, copies 2, 3 (and 4) are particular solutions. All invariants are
evaluated on Cartesian images, since they are polynomial there.

h4 (oscillator): ``F2 = (x1 - x2)(y1 - y2)`` and ``F3`` is the same product
summed over the three pairs. With ``k1 = F2``, ``k = F3`` and
``k3 = (x3 - x2)(y3 - y2)``::

    x1 = x3 + (k - 2 k1 +- B) / (2 (y2 - y3))
    y1 = y3 + (k - 2 k1 -+ B) / (2 (x2 - x3))
    B^2 = (k - 2 (k1 + k3))^2 - 4 k1 k3

h6 (two-photon): with ``D(a, b, c) = x_a (y_b - y_c) + x_b (y_c - y_a) + x_c (y_a - y_b)``
(twice the signed area of the triangle), ``F3 = D(1,2,3)^2`` and ``F4`` is
the sum of the four such squares over triples of four copies. The signed
constants ``k1 = D(1,2,3)``, ``k2 = D(1,2,4)``, ``k4 = D(2,3,4)`` give::

    x1 = (1 + (k2 - k1)/k4) x2 - (k2/k4) x3 + (k1/k4) x4      (same for y1)
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .algebra import Algebra
from .errors import DegenerateConfigurationError, DomainError
from .transform import Chart, require_epidemic_regular

Pair = tuple[float, float]

# relative size below which a denominator or discriminant is treated as exactly zero
DEGENERACY_TOL = 1e-12
BRANCH_TOL = 1e-6


class Branch(str, enum.Enum):
    PLUS = "+"
    MINUS = "-"

    @property
    def sign(self) -> int:
        return 1 if self is Branch.PLUS else -1


@dataclass(frozen=True)
class ProlongedState:
    """Several copies of the phase space in one chart, copy 1 first."""

    chart: Chart
    copies: np.ndarray

    def __post_init__(self):
        copies = np.array(self.copies, dtype=float)
        if copies.ndim != 2 or copies.shape[1] != 2 or not 2 <= copies.shape[0] <= 4:
            raise ValueError("a prolonged state holds 2 to 4 coordinate pairs")
        copies.flags.writeable = False
        object.__setattr__(self, "chart", Chart(self.chart))
        object.__setattr__(self, "copies", copies)

    def __len__(self):
        return self.copies.shape[0]

    def cartesian(self) -> tuple[np.ndarray, np.ndarray]:
        """``(x, y)`` arrays of the copies' Cartesian images."""
        u, v = self.copies[:, 0], self.copies[:, 1]
        if self.chart is Chart.CARTESIAN:
            return u.copy(), v.copy()
        return _epi_images(u, v)


@dataclass(frozen=True)
class MotionConstants:
    """Significant constants feeding a superposition rule.

    h4 fills ``k1 = F2``, ``k = F3``, ``k2 = (x1 - x3)(y1 - y3)``,
    ``k3 = (x3 - x2)(y3 - y2)`` and ``B`` (NaN if ``B^2 < 0``); h6 fills the
    signed ``k1``, ``k2`` and ``k4``. Entries an algebra does not use are None.
    ``usable`` is False when the corresponding rule has a zero denominator or
    no real branch.
    """

    algebra: Algebra
    k1: float
    k: float | None = None
    k2: float | None = None
    k3: float | None = None
    k4: float | None = None
    B: float | None = None
    usable: bool = True

    def as_dict(self) -> dict:
        return {
            "algebra": self.algebra.value,
            "k1": self.k1,
            "k": self.k,
            "k2": self.k2,
            "k3": self.k3,
            "k4": self.k4,
            "B": self.B,
            "usable": self.usable,
        }


def _epi_images(q, p):
    """Cartesian images ``x = (q^2 p^2 - 1)/p``, ``y = q p^2 / (q^2 p^2 - 1)``."""
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    require_epidemic_regular(q, p)
    d = q * q * p * p - 1.0
    return d / p, q * p * p / d


def _epi_from_cartesian(x: float, y: float) -> Pair:
    """``q = x^2 y / (x^2 y^2 - 1)``, ``p = (x^2 y^2 - 1)/x``; errors on a pole."""
    s = x * x * y * y - 1.0
    if abs(x) < 1e-12 or abs(s) < 1e-12 or not (math.isfinite(x) and math.isfinite(y)):
        raise DomainError(f"reconstructed (x, y) = ({x!r}, {y!r}) has no epidemic image")
    return x * x * y / s, s / x


def _as_prolonged(s, chart: Chart | None = None) -> ProlongedState:
    if isinstance(s, ProlongedState):
        return s
    return ProlongedState(Chart(chart or Chart.CARTESIAN), s)


def _pair_product(x, y, a: int, b: int) -> float:
    return float((x[a] - x[b]) * (y[a] - y[b]))


def _signed(x, y, a: int, b: int, c: int) -> float:
    return float(x[a] * (y[b] - y[c]) + x[b] * (y[c] - y[a]) + x[c] * (y[a] - y[b]))


def motion_constant(algebra: Algebra, level: int, s, chart: Chart | None = None) -> float:
    """Casimir-derived invariant ``F^(level)`` on the first ``level`` copies.

    h4 levels 2 and 3, h6 levels 3 and 4 are the nontrivial ones; h4 level 1
    and h6 levels 1 and 2 vanish identically and return 0.

    Raises:
        ValueError: b2 (no Casimir), unsupported level or too few copies.
    """
    algebra = Algebra(algebra)
    if algebra is Algebra.B2:
        raise ValueError("the book algebra b2 admits no Casimir, hence no such constants")
    trivial = {Algebra.H4: (1,), Algebra.H6: (1, 2)}[algebra]
    supported = {Algebra.H4: (2, 3), Algebra.H6: (3, 4)}[algebra]
    if level in trivial:
        return 0.0
    if level not in supported:
        raise ValueError(f"level {level} is not defined for {algebra.value}")
    s = _as_prolonged(s, chart)
    if len(s) < level:
        raise ValueError(f"F^({level}) needs {level} copies, got {len(s)}")
    x, y = s.cartesian()
    idx = range(level)
    if algebra is Algebra.H4:
        return float(sum(_pair_product(x, y, a, b) for a, b in itertools.combinations(idx, 2)))
    return float(sum(_signed(x, y, *t) ** 2 for t in itertools.combinations(idx, 3)))


def permuted_constant(algebra: Algebra, i: int, j: int, s, chart: Chart | None = None) -> float:
    """``F2`` with copy indices ``i`` and ``j`` (1-based) interchanged, on 3 copies.

    ``F_13 = (x3 - x2)(y3 - y2)`` and ``F_23 = (x1 - x3)(y1 - y3)``, so that
    ``F3 = F2 + F_13 + F_23``.
    """
    if Algebra(algebra) is not Algebra.H4:
        raise ValueError("permuted constants are defined for h4")
    if i == j or not {i, j} <= {1, 2, 3}:
        raise ValueError(f"({i}, {j}) is not a transposition of copies 1..3")
    s = _as_prolonged(s, chart)
    if len(s) != 3:
        raise ValueError("permuted constants need exactly 3 copies")
    x, y = s.cartesian()
    swap = {i: j, j: i}
    a, b = swap.get(1, 1) - 1, swap.get(2, 2) - 1
    return _pair_product(x, y, a, b)


def signed_k_h6(copies: Sequence[Pair], chart: Chart = Chart.CARTESIAN) -> float:
    """``D = x_a (y_b - y_c) + x_b (y_c - y_a) + x_c (y_a - y_b)`` of three pairs."""
    s = ProlongedState(chart, copies)
    if len(s) != 3:
        raise ValueError("signed_k_h6 takes exactly three pairs")
    x, y = s.cartesian()
    return _signed(x, y, 0, 1, 2)


# ---------------------------------------------------------------------------
# h4


def h4_discriminant(k1: float, k: float, k3: float) -> float:
    """``B^2 = (k - 2 (k1 + k3))^2 - 4 k1 k3``."""
    return (k - 2.0 * (k1 + k3)) ** 2 - 4.0 * k1 * k3


def _h4_branch_value(k1: float, k: float, k3: float) -> float:
    b2 = h4_discriminant(k1, k, k3)
    scale = (k - 2.0 * (k1 + k3)) ** 2 + abs(4.0 * k1 * k3)
    if b2 < 0:
        if b2 >= -DEGENERACY_TOL * scale:
            return 0.0  # rounding of an exactly double root
        raise DomainError(f"negative discriminant B^2 = {b2!r}: no real reconstruction")
    return math.sqrt(b2)


def _superpose_h4_cartesian(x2, y2, x3, y3, k1, k, branch: Branch) -> Pair:
    dy = y2 - y3
    dx = x2 - x3
    scale = max(abs(y2), abs(y3), abs(x2), abs(x3), 1e-300)
    if abs(dy) <= DEGENERACY_TOL * scale or abs(dx) <= DEGENERACY_TOL * scale:
        raise DegenerateConfigurationError(
            "h4 rule needs x2 != x3 and y2 != y3 for the particular solutions"
        )
    k3 = (x3 - x2) * (y3 - y2)
    b = branch.sign * _h4_branch_value(k1, k, k3)
    base = k - 2.0 * k1
    return x3 + (base + b) / (2.0 * dy), y3 + (base - b) / (2.0 * dx)


def superpose_h4(
    sol2: Pair,
    sol3: Pair,
    k1: float,
    k: float,
    branch: Branch | str = Branch.PLUS,
    chart: Chart = Chart.CARTESIAN,
) -> Pair:
    """General h4 solution from two particular solutions and ``(k1, k)``.

    In the epidemic chart the particular solutions are ``(q, p)`` pairs and
    the result is ``(q1, p1)``.

    Raises:
        DegenerateConfigurationError: ``x2 == x3`` or ``y2 == y3``.
        DomainError: ``B^2 < 0`` or the result has no epidemic image.
    """
    branch = Branch(branch)
    if Chart(chart) is Chart.CARTESIAN:
        return _superpose_h4_cartesian(*sol2, *sol3, k1, k, branch)
    (x2, x3), (y2, y3) = _epi_images([sol2[0], sol3[0]], [sol2[1], sol3[1]])
    x1, y1 = _superpose_h4_cartesian(x2, y2, x3, y3, k1, k, branch)
    return _epi_from_cartesian(x1, y1)


def resolve_branch_h4(
    anchor: Pair,
    sol2: Pair,
    sol3: Pair,
    k1: float,
    k: float,
    chart: Chart = Chart.CARTESIAN,
    tol: float = BRANCH_TOL,
) -> Branch:
    """The branch whose reconstruction at the anchor time reproduces ``anchor``.

    Returns ``+`` when the branches coincide (``B = 0``) or tie.

    Raises:
        DegenerateConfigurationError: neither branch is within ``tol``
            (relative to ``max(1, |anchor|)``) of the anchor.
    """
    ref = np.asarray(anchor, dtype=float)
    scale = max(1.0, float(np.max(np.abs(ref))))
    dist = {}
    for br in (Branch.PLUS, Branch.MINUS):
        try:
            dist[br] = float(np.max(np.abs(np.subtract(superpose_h4(sol2, sol3, k1, k, br, chart), ref)))) / scale
        except DomainError:
            dist[br] = math.inf
    best = Branch.PLUS if dist[Branch.PLUS] <= dist[Branch.MINUS] else Branch.MINUS
    if not dist[best] <= tol:
        raise DegenerateConfigurationError(
            f"neither branch reproduces the anchor (distances {dist[Branch.PLUS]:.3g}, {dist[Branch.MINUS]:.3g})"
        )
    return best


# ---------------------------------------------------------------------------
# h6


def _superpose_h6_cartesian(x, y, k1: float, k2: float) -> Pair:
    # x, y hold the particular solutions 2, 3, 4
    k4 = _signed(x, y, 0, 1, 2)
    scale = max(float(np.max(np.abs(x))) * float(np.max(np.abs(y))), 1e-300)
    if abs(k4) <= DEGENERACY_TOL * scale:
        raise DegenerateConfigurationError("h6 rule needs non-collinear particular solutions (k4 = 0)")
    alpha = 1.0 + (k2 - k1) / k4
    beta = -k2 / k4
    gamma = k1 / k4
    return (
        float(alpha * x[0] + beta * x[1] + gamma * x[2]),
        float(alpha * y[0] + beta * y[1] + gamma * y[2]),
    )


def superpose_h6(
    sol2: Pair,
    sol3: Pair,
    sol4: Pair,
    k1: float,
    k2: float,
    chart: Chart = Chart.CARTESIAN,
) -> Pair:
    """General h6 solution from three particular solutions and the signed ``(k1, k2)``.

    ``(k1, k2) = (0, 0)``, ``(0, -k4)`` and ``(k4, 0)`` return ``sol2``,
    ``sol3`` and ``sol4`` respectively.

    Raises:
        DegenerateConfigurationError: the particular solutions are collinear.
        DomainError: the result has no epidemic image.
    """
    u = np.array([sol2[0], sol3[0], sol4[0]], dtype=float)
    v = np.array([sol2[1], sol3[1], sol4[1]], dtype=float)
    if Chart(chart) is Chart.CARTESIAN:
        return _superpose_h6_cartesian(u, v, k1, k2)
    x, y = _epi_images(u, v)
    return _epi_from_cartesian(*_superpose_h6_cartesian(x, y, k1, k2))


# ---------------------------------------------------------------------------
# constants from data


def extract_constants(
    algebra: Algebra,
    general: Pair,
    particulars: Sequence[Pair],
    chart: Chart = Chart.CARTESIAN,
) -> MotionConstants:
    """Constants of the general solution relative to the particular ones, at one instant."""
    algebra = Algebra(algebra)
    need = {Algebra.H4: 2, Algebra.H6: 3}.get(algebra)
    if need is None:
        raise ValueError("b2 has no superposition rule of its own; use h4 with b1 = 0")
    if len(particulars) != need:
        raise ValueError(f"{algebra.value} needs {need} particular solutions, got {len(particulars)}")
    s = ProlongedState(chart, [general, *particulars])
    x, y = s.cartesian()
    if algebra is Algebra.H4:
        k1 = _pair_product(x, y, 0, 1)
        k3 = _pair_product(x, y, 2, 1)
        k2 = _pair_product(x, y, 0, 2)
        k = k1 + k2 + k3
        scale = max(abs(x[1]), abs(x[2]), abs(y[1]), abs(y[2]), 1e-300)
        separated = abs(x[1] - x[2]) > DEGENERACY_TOL * scale and abs(y[1] - y[2]) > DEGENERACY_TOL * scale
        try:
            b = _h4_branch_value(k1, k, k3)
        except DomainError:
            b = math.nan
        return MotionConstants(algebra, k1, k=k, k2=k2, k3=k3, B=b, usable=separated and not math.isnan(b))
    k1 = _signed(x, y, 0, 1, 2)
    k2 = _signed(x, y, 0, 1, 3)
    k4 = _signed(x, y, 1, 2, 3)
    scale = max(float(np.max(np.abs(x[1:]))) * float(np.max(np.abs(y[1:]))), 1e-300)
    return MotionConstants(algebra, k1, k2=k2, k4=k4, usable=abs(k4) > DEGENERACY_TOL * scale)


# ---------------------------------------------------------------------------
# numerical Poisson bracket on the prolonged space

_FD_STEP = np.finfo(float).eps ** (1 / 3)


def prolonged_bracket(f, g, coords) -> float:
    """``sum_s (d_xs f d_ys g - d_ys f d_xs g)`` by central differences.

    ``f`` and ``g`` take an ``(m, 2)`` array of Cartesian copies.
    """
    z = np.array(coords, dtype=float)
    grads = []
    for fn in (f, g):
        grad = np.zeros_like(z)
        for idx in np.ndindex(z.shape):
            h = _FD_STEP * max(1.0, abs(z[idx]))
            zp, zm = z.copy(), z.copy()
            zp[idx] += h
            zm[idx] -= h
            grad[idx] = (fn(zp) - fn(zm)) / (2 * h)
        grads.append(grad)
    gf, gg = grads
    return float(np.sum(gf[:, 0] * gg[:, 1] - gf[:, 1] * gg[:, 0]))
