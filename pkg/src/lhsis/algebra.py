"""The Lie-Hamilton algebras b2 < h4 < h6 and their planar realizations.

Generators carry global indices so that subalgebras embed index-preservingly:

    1: translation X1 = d/dx               h1 = y
    2: translation X2 = X_B = d/dy         h2 = h_B = -x
    3: dilation    X3 = X_A = x d/dx - y d/dy,   h3 = h_A = x y
    4: X4 = y d/dx                          h4 = y^2 / 2
    5: X5 = x d/dy                          h5 = -x^2 / 2
    0: central element (Poisson side only)  h0 = 1

b2 = {3, 2}, h4 = {1, 2, 3} (+ central 0), h6 = {1, ..., 5} (+ central 0).
Vector fields obey ``[X_a, X_b] = sum_c C_ab^c X_c`` and the Hamiltonian
functions obey ``{h_a, h_b} = -sum_c C_ab^c h_c`` plus the central term
``{h1, h2} = h0``, with ``{f, g} = f_u g_v - f_v g_u`` for ``omega = du ^ dv``.

Each realization is given in both charts; the epidemic-chart formulas are
written out directly rather than obtained by pushing forward the Cartesian
ones, so that the two can be checked against each other.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import SingularPointError
from .transform import Chart, PhaseState, require_epidemic_regular


class Algebra(str, enum.Enum):
    B2 = "b2"
    H4 = "h4"
    H6 = "h6"


GENERATORS: dict[Algebra, tuple[int, ...]] = {
    Algebra.B2: (3, 2),
    Algebra.H4: (1, 2, 3),
    Algebra.H6: (1, 2, 3, 4, 5),
}
B2_A, B2_B = 3, 2

# [X_a, X_b] for a < b in h6; all other algebras are restrictions of this table.
_H6_COMMUTATORS = {
    (1, 2): {},
    (1, 3): {1: 1},
    (1, 4): {},
    (1, 5): {2: 1},
    (2, 3): {2: -1},
    (2, 4): {1: 1},
    (2, 5): {},
    (3, 4): {4: -2},
    (3, 5): {5: 2},
    (4, 5): {3: -1},
}
_CENTRAL = {(1, 2): 1}


@dataclass(frozen=True)
class StructureTable:
    """Structure constants indexed by global generator index (0..5).

    ``commutator[a, b, c] = C_ab^c``; ``central[a, b]`` is the coefficient of
    ``h0`` in ``{h_a, h_b}``.
    """

    algebra: Algebra
    generators: tuple[int, ...]
    commutator: np.ndarray
    central: np.ndarray

    def bracket(self, a: int, b: int) -> dict[int, float]:
        """Nonzero ``C_ab^c`` as ``{c: value}``."""
        return {c: float(v) for c, v in enumerate(self.commutator[a, b]) if v != 0}

    def poisson(self, a: int, b: int) -> dict[int, float]:
        """``{h_a, h_b}`` as ``{c: coefficient of h_c}``, including the central ``h0``."""
        out = {c: -float(v) for c, v in enumerate(self.commutator[a, b]) if v != 0}
        if self.central[a, b] != 0:
            out[0] = float(self.central[a, b])
        return out

    def is_antisymmetric(self) -> bool:
        return bool(
            np.array_equal(self.commutator, -self.commutator.transpose(1, 0, 2))
            and np.array_equal(self.central, -self.central.T)
        )

    def jacobi_defect(self) -> float:
        """Largest coefficient of ``[[a,b],c] + [[b,c],a] + [[c,a],b]`` over all triples."""
        C = self.commutator
        nested = np.einsum("abd,dce->abce", C, C)
        cyclic = nested + nested.transpose(1, 2, 0, 3) + nested.transpose(2, 0, 1, 3)
        return float(np.max(np.abs(cyclic)))


def structure_constants(algebra: Algebra) -> StructureTable:
    algebra = Algebra(algebra)
    gens = GENERATORS[algebra]
    comm = np.zeros((6, 6, 6))
    central = np.zeros((6, 6))
    for (a, b), out in _H6_COMMUTATORS.items():
        if a in gens and b in gens:
            for c, v in out.items():
                assert c in gens, "restricted table must close"
                comm[a, b, c] = v
                comm[b, a, c] = -v
    if algebra is not Algebra.B2:
        for (a, b), v in _CENTRAL.items():
            central[a, b] = v
            central[b, a] = -v
    comm.flags.writeable = False
    central.flags.writeable = False
    return StructureTable(algebra, gens, comm, central)


def _check_index(algebra: Algebra, i: int, allow_central: bool = False) -> None:
    gens = GENERATORS[Algebra(algebra)]
    if i in gens or (allow_central and i == 0 and algebra is not Algebra.B2):
        return
    raise ValueError(f"generator {i} is not in {Algebra(algebra).value} (generators {gens})")


def _field_raw(i: int, u, v, chart: Chart):
    # complex-safe; no guard
    one, zero = u * 0 + 1, u * 0
    if chart is Chart.CARTESIAN:
        x, y = u, v
        table = {
            1: lambda: (one, zero),
            2: lambda: (zero, one),
            3: lambda: (x, -y),
            4: lambda: (y, zero),
            5: lambda: (zero, x),
        }
        if i not in table:
            raise ValueError(f"no generator with index {i}")
        return table[i]()
    q, p = u, v
    qp = q * p
    d = qp * qp - 1.0
    if i == 1:
        return -2 * qp / d**2, p * p * (qp * qp + 1) / d**2
    if i == 2:
        return -(q * q + 1 / (p * p)), 2 * qp
    if i == 3:
        return q, -p
    if i == 4:
        return -2 * q * qp * p * p / d**3, qp * p**3 * (qp * qp + 1) / d**3
    if i == 5:
        return (1 - qp**4) / p**3, 2 * q * d
    raise ValueError(f"no generator with index {i}")


def _hamiltonian_raw(i: int, u, v, chart: Chart):
    if chart is Chart.CARTESIAN:
        x, y = u, v
        table = {
            0: lambda: x * 0 + 1,
            1: lambda: y,
            2: lambda: -x,
            3: lambda: x * y,
            4: lambda: 0.5 * y * y,
            5: lambda: -0.5 * x * x,
        }
        if i not in table:
            raise ValueError(f"no generator with index {i}")
        return table[i]()
    q, p = u, v
    qp = q * p
    d = qp * qp - 1.0
    table = {
        0: lambda: q * 0 + 1,
        1: lambda: q * p * p / d,
        2: lambda: (1 - qp * qp) / p,
        3: lambda: qp,
        4: lambda: 0.5 * (q * p * p / d) ** 2,
        5: lambda: -0.5 * (d / p) ** 2,
    }
    if i not in table:
        raise ValueError(f"no generator with index {i}")
    return table[i]()


def vector_field_components(i: int, u, v, chart: Chart):
    """Components of ``X_i`` at ``(u, v)``; elementwise on arrays.

    Raises:
        SingularPointError: epidemic-chart point with ``p == 0`` or ``q^2 p^2 == 1``.
    """
    chart = Chart(chart)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if chart is Chart.EPIDEMIC:
        require_epidemic_regular(u, v)
    return _field_raw(i, u, v, chart)


def hamiltonian_function(i: int, u, v, chart: Chart):
    """Value of ``h_i`` at ``(u, v)``; ``h_0 = 1``. Elementwise on arrays."""
    chart = Chart(chart)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if chart is Chart.EPIDEMIC:
        require_epidemic_regular(u, v)
    return _hamiltonian_raw(i, u, v, chart)


def _in_chart(point: PhaseState, chart: Chart | None) -> PhaseState:
    return point if chart is None else point.to(chart)


def basis_vector_field(algebra: Algebra, i: int, point: PhaseState, chart: Chart | None = None):
    """``X_i`` at ``point`` (converted to ``chart`` first if given)."""
    _check_index(algebra, i)
    point = _in_chart(point, chart)
    a, b = vector_field_components(i, point.u, point.v, point.chart)
    return float(a), float(b)


def basis_hamiltonian(algebra: Algebra, i: int, point: PhaseState, chart: Chart | None = None) -> float:
    """``h_i`` at ``point``; ``i = 0`` is the central element and returns 1."""
    _check_index(algebra, i, allow_central=True)
    if i == 0 and Algebra(algebra) is not Algebra.B2:
        return 1.0
    point = _in_chart(point, chart)
    return float(hamiltonian_function(i, point.u, point.v, point.chart))


def casimir_value(algebra: Algebra, v: Mapping[int, float] | Sequence[float]) -> float:
    """Casimir of the Lie-Poisson algebra at generator values ``v``.

    ``v`` maps global index to value (a sequence is read as ``v[0], v[1], ...``).
    h4: ``v1 v2 + v3 v0``.
    h6: ``2 (v1^2 v5 - v2^2 v4 - v1 v2 v3) - v0 (v3^2 + 4 v4 v5)``.

    Raises:
        ValueError: b2 has no nonconstant Casimir.
    """
    algebra = Algebra(algebra)
    g = _values(v)
    if algebra is Algebra.H4:
        return g[1] * g[2] + g[3] * g[0]
    if algebra is Algebra.H6:
        return 2 * (g[1] ** 2 * g[5] - g[2] ** 2 * g[4] - g[1] * g[2] * g[3]) - g[0] * (g[3] ** 2 + 4 * g[4] * g[5])
    raise ValueError("the book algebra b2 admits no nonconstant Casimir invariant")


def casimir_gradient(algebra: Algebra, v) -> dict[int, float]:
    """Exact partial derivatives of the Casimir (polynomial; exact for int/Fraction input)."""
    algebra = Algebra(algebra)
    g = _values(v)
    if algebra is Algebra.H4:
        return {0: g[3], 1: g[2], 2: g[1], 3: g[0]}
    if algebra is Algebra.H6:
        return {
            0: -(g[3] ** 2 + 4 * g[4] * g[5]),
            1: 2 * (2 * g[1] * g[5] - g[2] * g[3]),
            2: 2 * (-2 * g[2] * g[4] - g[1] * g[3]),
            3: -2 * g[1] * g[2] - 2 * g[0] * g[3],
            4: -2 * g[2] ** 2 - 4 * g[0] * g[5],
            5: 2 * g[1] ** 2 - 4 * g[0] * g[4],
        }
    raise ValueError("the book algebra b2 admits no nonconstant Casimir invariant")


def lie_poisson_with_generator(algebra: Algebra, v, i: int):
    """``{C, v_i}`` on the Lie-Poisson space, ``sum_a dC/dv_a {v_a, v_i}``.

    Uses only integer structure constants, so integer or Fraction inputs give
    an exact result.
    """
    table = structure_constants(algebra)
    g = _values(v)
    grad = casimir_gradient(algebra, v)
    total = 0
    for a, da in grad.items():
        if a == 0 or i == 0:
            continue
        for c, coeff in table.poisson(a, i).items():
            total += da * int(coeff) * g[c]
    return total


def _values(v) -> list:
    if isinstance(v, Mapping):
        return [v.get(k, 0) for k in range(6)]
    out = list(v)
    return out + [0] * (6 - len(out))


# ---------------------------------------------------------------------------
# numerical checks of the realizations
#
# "central": real central differences, step eps**(1/3) * max(1, |c|).
# "complex-step": f'(c) ~ Im f(c + i h) / h with h = 1e-20 * max(1, |c|); no
# subtractive cancellation, useful close to the poles where the fields are large.

_FD_STEP = np.finfo(float).eps ** (1 / 3)
_CS_STEP = 1e-20
METHODS = ("central", "complex-step")


def _partials(fn, u, v, method: str):
    """``(d fn/du, d fn/dv)`` for ``fn`` returning an array or a tuple of arrays."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if method == "central":
        hu = _FD_STEP * np.maximum(1.0, np.abs(u))
        hv = _FD_STEP * np.maximum(1.0, np.abs(v))
        du = (np.asarray(fn(u + hu, v)) - np.asarray(fn(u - hu, v))) / (2 * hu)
        dv = (np.asarray(fn(u, v + hv)) - np.asarray(fn(u, v - hv))) / (2 * hv)
        return du, dv
    if method == "complex-step":
        hu = _CS_STEP * np.maximum(1.0, np.abs(u))
        hv = _CS_STEP * np.maximum(1.0, np.abs(v))
        du = np.imag(np.asarray(fn(u + 1j * hu, v + 0j))) / hu
        dv = np.imag(np.asarray(fn(u + 0j, v + 1j * hv))) / hv
        return du, dv
    raise ValueError(f"unknown differentiation method {method!r}; expected one of {METHODS}")


def hamiltonian_gradient(i: int, u, v, chart: Chart, method: str = "central"):
    """Numerical ``(dh_i/du, dh_i/dv)``."""
    chart = Chart(chart)
    if chart is Chart.EPIDEMIC:
        require_epidemic_regular(u, v)
    return _partials(lambda a, b: _hamiltonian_raw(i, a, b, chart), u, v, method)


def vector_field_jacobian(i: int, u, v, chart: Chart, method: str = "central") -> np.ndarray:
    """Numerical Jacobian ``[[dX^1/du, dX^1/dv], [dX^2/du, dX^2/dv]]``."""
    chart = Chart(chart)
    if chart is Chart.EPIDEMIC:
        require_epidemic_regular(u, v)
    du, dv = _partials(lambda a, b: np.stack(np.broadcast_arrays(*_field_raw(i, a, b, chart))), u, v, method)
    return np.array([[du[0], dv[0]], [du[1], dv[1]]])


def poisson_bracket_numeric(
    algebra: Algebra,
    a: int,
    b: int,
    point: PhaseState,
    chart: Chart | None = None,
    method: str = "central",
) -> float:
    """``{h_a, h_b} = d_u h_a d_v h_b - d_v h_a d_u h_b`` at ``point`` from numerical partials."""
    _check_index(algebra, a, allow_central=True)
    _check_index(algebra, b, allow_central=True)
    point = _in_chart(point, chart)
    fu, fv = hamiltonian_gradient(a, point.u, point.v, point.chart, method)
    gu, gv = hamiltonian_gradient(b, point.u, point.v, point.chart, method)
    return float(fu * gv - fv * gu)


def poisson_bracket_expected(algebra: Algebra, a: int, b: int, point: PhaseState) -> float:
    """``-sum_c C_ab^c h_c + central`` from the structure table."""
    table = structure_constants(algebra)
    if a == 0 or b == 0:
        return 0.0
    return float(sum(coeff * basis_hamiltonian(algebra, c, point) for c, coeff in table.poisson(a, b).items()))


def commutator_numeric(
    algebra: Algebra,
    a: int,
    b: int,
    point: PhaseState,
    chart: Chart | None = None,
    method: str = "central",
):
    """``[X_a, X_b] = DX_b X_a - DX_a X_b`` with numerical Jacobians."""
    _check_index(algebra, a)
    _check_index(algebra, b)
    point = _in_chart(point, chart)
    u, v, ch = point.u, point.v, point.chart
    xa = np.array(vector_field_components(a, u, v, ch), dtype=float)
    xb = np.array(vector_field_components(b, u, v, ch), dtype=float)
    out = vector_field_jacobian(b, u, v, ch, method) @ xa - vector_field_jacobian(a, u, v, ch, method) @ xb
    return float(out[0]), float(out[1])


def commutator_expected(algebra: Algebra, a: int, b: int, point: PhaseState):
    table = structure_constants(algebra)
    total = np.zeros(2)
    for c, coeff in table.bracket(a, b).items():
        total += coeff * np.array(vector_field_components(c, point.u, point.v, point.chart), dtype=float)
    return float(total[0]), float(total[1])


def poisson_defect(algebra: Algebra, a: int, b: int, point: PhaseState, method: str = "central") -> float:
    """Deviation of the numerical ``{h_a, h_b}`` from the table value.

    Normalised by ``max(1, |d_u h_a d_v h_b|, |d_v h_a d_u h_b|)``: the two
    products cancel to the bracket value and their size sets the rounding scale.
    """
    _check_index(algebra, a, allow_central=True)
    _check_index(algebra, b, allow_central=True)
    fu, fv = hamiltonian_gradient(a, point.u, point.v, point.chart, method)
    gu, gv = hamiltonian_gradient(b, point.u, point.v, point.chart, method)
    got = fu * gv - fv * gu
    scale = max(1.0, abs(fu * gv), abs(fv * gu))
    return float(abs(got - poisson_bracket_expected(algebra, a, b, point)) / scale)


def commutator_defect(algebra: Algebra, a: int, b: int, point: PhaseState, method: str = "central") -> float:
    """Componentwise deviation of the numerical ``[X_a, X_b]`` from the table.

    Each component is normalised by ``max(1, |DX_b X_a|, |DX_a X_b|)``.
    """
    _check_index(algebra, a)
    _check_index(algebra, b)
    u, v, ch = point.u, point.v, point.chart
    xa = np.array(vector_field_components(a, u, v, ch), dtype=float)
    xb = np.array(vector_field_components(b, u, v, ch), dtype=float)
    left = vector_field_jacobian(b, u, v, ch, method) @ xa
    right = vector_field_jacobian(a, u, v, ch, method) @ xb
    expected = np.array(commutator_expected(algebra, a, b, point))
    scale = np.maximum(1.0, np.maximum(np.abs(left), np.abs(right)))
    return float(np.max(np.abs(left - right - expected) / scale))


def contraction_defect(i: int, point: PhaseState, method: str = "central") -> float:
    """Max deviation of ``grad h_i`` from ``(-X_i^v, X_i^u)`` (i.e. ``iota_X omega = dh``)."""
    du, dv = hamiltonian_gradient(i, point.u, point.v, point.chart, method)
    xu, xv = vector_field_components(i, point.u, point.v, point.chart)
    return float(max(abs(du + xv), abs(dv - xu)))


__all__ = [
    "Algebra",
    "GENERATORS",
    "StructureTable",
    "structure_constants",
    "basis_vector_field",
    "basis_hamiltonian",
    "casimir_value",
    "casimir_gradient",
    "lie_poisson_with_generator",
    "poisson_bracket_numeric",
    "poisson_bracket_expected",
    "commutator_numeric",
    "commutator_expected",
    "contraction_defect",
    "poisson_defect",
    "commutator_defect",
    "vector_field_components",
    "hamiltonian_function",
    "SingularPointError",
]
