import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from lhsis import algebra as alg
from lhsis.errors import SingularPointError
from lhsis.transform import (
    Chart,
    PhaseState,
    cart_to_epi,
    chart_jacobian,
    epi_to_cart,
    jacobian_det,
    jacobian_det_many,
    observables,
)


class TestMap:
    @pytest.mark.parametrize(
        "qp, xy",
        [((2.0, 1.0), (3.0, 2 / 3)), ((2 / 3, 3.0), (1.0, 2.0))],
    )
    def test_known_pairs(self, qp, xy):
        np.testing.assert_allclose(epi_to_cart(*qp), xy, rtol=1e-15)
        np.testing.assert_allclose(cart_to_epi(*xy), qp, rtol=1e-15)

    @pytest.mark.parametrize("qp", [(1.0, 1.0), (-0.5, 2.0), (3.0, 0.0), (0.2, 1e-13)])
    def test_epidemic_poles(self, qp):
        with pytest.raises(SingularPointError):
            epi_to_cart(*qp)

    @pytest.mark.parametrize("xy", [(0.0, 5.0), (1.0, 1.0), (2.0, -0.5)])
    def test_cartesian_poles(self, xy):
        with pytest.raises(SingularPointError):
            cart_to_epi(*xy)

    def test_arrays(self, rng):
        q = rng.uniform(-2, 2, 50)
        p = rng.uniform(3, 4, 50)
        x, y = epi_to_cart(q, p)
        assert x.shape == (50,)
        q2, p2 = cart_to_epi(x, y)
        np.testing.assert_allclose(q2, q, rtol=1e-12)
        np.testing.assert_allclose(p2, p, rtol=1e-12)

    def test_array_error_names_offending_point(self):
        with pytest.raises(SingularPointError, match="1.0"):
            epi_to_cart(np.array([2.0, 1.0]), np.array([1.0, 1.0]))

    @given(st.floats(-5, 5), st.floats(0.1, 5), st.booleans())
    @settings(max_examples=500)
    def test_round_trip(self, q, p, neg):
        p = -p if neg else p
        assume(abs(q * q * p * p - 1) > 1e-3)
        q2, p2 = cart_to_epi(*epi_to_cart(q, p))
        assert q2 == pytest.approx(q, rel=1e-10, abs=1e-300)
        assert p2 == pytest.approx(p, rel=1e-10)


class TestPhaseState:
    def test_to_and_back(self):
        s = PhaseState.epidemic(2.0, 1.0)
        c = s.to(Chart.CARTESIAN)
        assert c.chart is Chart.CARTESIAN and c.coords == pytest.approx((3.0, 2 / 3))
        assert c.to("epidemic").coords == pytest.approx((2.0, 1.0))
        assert s.to(Chart.EPIDEMIC) is s

    def test_regularity(self):
        assert not PhaseState.epidemic(1.0, 1.0).is_regular()
        assert not PhaseState.cartesian(0.0, 1.0).is_regular()
        assert PhaseState.cartesian(1.0, 2.0).is_regular()

    def test_bad_chart(self):
        with pytest.raises(ValueError):
            PhaseState("polar", 1.0, 2.0)


class TestObservables:
    @pytest.mark.parametrize("p", [10.0, -10.0])
    def test_values(self, p):
        obs = observables(0.4, p)
        assert obs.mean_rho == 0.4
        assert obs.variance == pytest.approx(0.01, rel=1e-15)

    def test_p_zero(self):
        with pytest.raises(SingularPointError):
            observables(0.4, 0.0)


class TestJacobian:
    @pytest.mark.parametrize("method", ["complex-step", "central"])
    @pytest.mark.parametrize("point", [PhaseState.epidemic(2.0, 1.0), PhaseState.cartesian(1.0, 2.0)])
    def test_unit_determinant(self, point, method):
        assert jacobian_det(point, method) == pytest.approx(1.0, abs=1e-8)

    def test_pole(self):
        with pytest.raises(SingularPointError):
            jacobian_det(PhaseState.epidemic(1.0, 1.0))

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            jacobian_det(PhaseState.epidemic(2.0, 1.0), method="forward")

    def test_analytic_entries(self):
        # d/dq of x = (q^2 p^2 - 1)/p is 2 q p; d/dp is q^2 + 1/p^2
        j = chart_jacobian(PhaseState.epidemic(2.0, 1.0))
        assert j[0, 0] == pytest.approx(4.0, rel=1e-14)
        assert j[0, 1] == pytest.approx(5.0, rel=1e-14)

    def test_many(self, rng):
        q = rng.uniform(-5, 5, 1000)
        p = rng.uniform(0.1, 5, 1000)
        keep = np.abs(q * q * p * p - 1) > 1e-3
        det = jacobian_det_many(q[keep], p[keep], Chart.EPIDEMIC)
        assert np.max(np.abs(det - 1)) < 1e-8


class TestPullback:
    @pytest.mark.parametrize("algebra", list(alg.Algebra))
    def test_hamiltonians_agree_across_charts(self, algebra, rng):
        for _ in range(50):
            q, p = rng.uniform(-2, 2), rng.uniform(0.3, 2) * rng.choice([-1, 1])
            if abs(q * q * p * p - 1) < 0.05:
                continue
            s = PhaseState.epidemic(q, p)
            c = s.to(Chart.CARTESIAN)
            for i in alg.GENERATORS[algebra]:
                he = alg.basis_hamiltonian(algebra, i, s)
                hc = alg.basis_hamiltonian(algebra, i, c)
                assert he == pytest.approx(hc, rel=1e-10, abs=1e-10)
