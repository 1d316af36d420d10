import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import BOOK, OSCILLATOR, TWO_PHOTON, cartesian, scipy_oracle
from lhsis import dynamics as dyn
from lhsis.algebra import Algebra
from lhsis.coeffs import Constant, parse_expression
from lhsis.errors import DomainError, SingularPointError, SingularStateError
from lhsis.transform import Chart, PhaseState, cart_to_epi, epi_to_cart
from lhsis.verification import random_smooth_coefficient, second_order_residual

C12 = dyn.IntegrationConstants(1.0, 2.0)


class TestSystemSpec:
    def test_forbidden_coefficients(self):
        with pytest.raises(ValueError, match="b4"):
            dyn.SystemSpec(Algebra.B2, b4=1.0)
        with pytest.raises(ValueError, match="b1"):
            dyn.SystemSpec(Algebra.B2, b1="t")
        with pytest.raises(ValueError, match="b5"):
            dyn.SystemSpec(Algebra.H4, b5=2.0)

    def test_zero_forbidden_coefficient_allowed(self):
        assert dyn.SystemSpec(Algebra.B2, b4=0.0).b4.is_zero

    def test_hash_is_stable_and_sensitive(self):
        a = dyn.SystemSpec(Algebra.H4, rho0="1 + t", b1=0.5)
        b = dyn.SystemSpec(Algebra.H4, rho0="1+t", b1=0.5)
        c = dyn.SystemSpec(Algebra.H4, rho0="1 + t", b1=0.25)
        assert a.spec_hash == b.spec_hash != c.spec_hash
        assert len(a.spec_hash) == 16


class TestRhs:
    def test_book_cartesian(self):
        s = cartesian(Algebra.B2, rho0=1, b2=1)
        assert dyn.rhs(s, 0.0, PhaseState.cartesian(3, 2)) == (3.0, -1.0)

    def test_book_epidemic(self):
        s = dyn.SystemSpec(Algebra.B2, Chart.EPIDEMIC, rho0=1, b2=1)
        assert dyn.rhs(s, 0.0, PhaseState.epidemic(2, 1)) == pytest.approx((-3.0, 3.0), rel=1e-15)

    def test_circle(self):
        s = cartesian(Algebra.H6, b4=1, b5=-1)
        assert dyn.rhs(s, 0.0, PhaseState.cartesian(1, 0)) == (0.0, -1.0)

    def test_state_converted_to_spec_chart(self):
        s = cartesian(Algebra.B2, rho0=1, b2=1)
        assert dyn.rhs(s, 0.0, PhaseState.epidemic(2 / 3, 3)) == pytest.approx((1.0, -1.0))

    def test_singular(self):
        s = dyn.SystemSpec(Algebra.B2, Chart.EPIDEMIC, rho0=1, b2=1)
        with pytest.raises(SingularPointError):
            dyn.rhs(s, 0.0, PhaseState.epidemic(1, 1))

    @given(st.floats(-2, 2), st.floats(0.3, 2), st.floats(0, 5))
    @settings(max_examples=100, deadline=None)
    def test_degeneration_chain(self, u, v, t):
        h6 = cartesian(Algebra.H6, rho0=OSCILLATOR["rho0"], b1=OSCILLATOR["b1"], b2=OSCILLATOR["b2"])
        h4 = cartesian(Algebra.H4, **OSCILLATOR)
        pt = PhaseState.cartesian(u, v)
        assert dyn.rhs(h6, t, pt) == pytest.approx(dyn.rhs(h4, t, pt), abs=1e-14)
        h4b = cartesian(Algebra.H4, **BOOK)
        b2 = cartesian(Algebra.B2, **BOOK)
        assert dyn.rhs(h4b, t, pt) == pytest.approx(dyn.rhs(b2, t, pt), abs=1e-14)

    def test_chart_pushforward(self, rng):
        # the epidemic field is the pushforward of the Cartesian one
        from lhsis.transform import chart_jacobian

        cs = cartesian(Algebra.H6, **TWO_PHOTON)
        es = cs.with_chart(Chart.EPIDEMIC)
        for _ in range(30):
            x, y = rng.uniform(0.5, 2), rng.uniform(0.5, 2)
            if abs(x * x * y * y - 1) < 0.2:
                continue
            pc = PhaseState.cartesian(x, y)
            jac = chart_jacobian(pc)
            push = jac @ np.array(dyn.rhs(cs, 1.3, pc))
            np.testing.assert_allclose(dyn.rhs(es, 1.3, pc.to(Chart.EPIDEMIC)), push, rtol=1e-10, atol=1e-10)


class TestHamiltonian:
    def test_book_values(self):
        s = cartesian(Algebra.B2, rho0=1, b2=1)
        assert dyn.hamiltonian(s, 0.0, PhaseState.cartesian(1, 2)) == 1.0
        assert dyn.hamiltonian(s, 0.0, PhaseState.epidemic(2 / 3, 3)) == pytest.approx(1.0, rel=1e-14)

    def test_zero(self):
        s = cartesian(Algebra.H6)
        assert dyn.hamiltonian(s, 0.0, PhaseState.cartesian(3, 4)) == 0.0

    def test_chart_invariance(self, rng):
        s = cartesian(Algebra.H6, **TWO_PHOTON)
        for _ in range(30):
            q, p = rng.uniform(-2, 2), rng.uniform(0.3, 2)
            if abs(q * q * p * p - 1) < 0.05:
                continue
            st_e = PhaseState.epidemic(q, p)
            h_e = dyn.hamiltonian(s.with_chart(Chart.EPIDEMIC), 0.7, st_e)
            h_c = dyn.hamiltonian(s, 0.7, st_e.to(Chart.CARTESIAN))
            assert h_e == pytest.approx(h_c, rel=1e-10, abs=1e-10)

    def test_generates_the_flow(self):
        # x' = dh/dy, y' = -dh/dx
        s = cartesian(Algebra.H6, **TWO_PHOTON)
        x, y, t, d = 0.8, -1.3, 2.1, 1e-6
        h = lambda a, b: dyn.hamiltonian(s, t, PhaseState.cartesian(a, b))
        hx = (h(x + d, y) - h(x - d, y)) / (2 * d)
        hy = (h(x, y + d) - h(x, y - d)) / (2 * d)
        assert dyn.rhs(s, t, PhaseState.cartesian(x, y)) == pytest.approx((hy, -hx), abs=1e-8)


class TestIntegrate:
    def test_circle(self):
        s = cartesian(Algebra.H6, b4=1, b5=-1)
        end = dyn.integrate(s, PhaseState.cartesian(1, 0), 0.0, math.pi / 2).end
        assert end.coords == pytest.approx((0.0, -1.0), abs=1e-6)

    def test_empty_span(self):
        s = cartesian(Algebra.B2, rho0=1, b2=1)
        traj = dyn.integrate(s, PhaseState.cartesian(1, 2), 3.0, 3.0)
        assert len(traj) == 1 and traj.end.coords == (1.0, 2.0)

    def test_pole_adjacent_start(self):
        s = dyn.SystemSpec(Algebra.B2, Chart.EPIDEMIC, rho0=1, b2=1)
        p = 2.0
        q = math.sqrt(1 + 1e-13) / p
        with pytest.raises(SingularPointError):
            dyn.integrate(s, PhaseState.epidemic(q, p), 0.0, 1.0)

    def test_sampling_and_metadata(self):
        s = cartesian(Algebra.B2, rho0=1, b2=1)
        traj = dyn.integrate(s, PhaseState.cartesian(1, 2), 0.0, 5.0)
        assert len(traj) == 200 and traj.times[0] == 0.0 and traj.times[-1] == 5.0
        assert traj.metadata["spec_hash"] == s.spec_hash
        assert traj.metadata["rtol"] == 1e-10

    def test_reverse_span_rejected(self):
        s = cartesian(Algebra.B2, rho0=1, b2=1)
        with pytest.raises(ValueError):
            dyn.integrate(s, PhaseState.cartesian(1, 2), 1.0, 0.0)

    def test_matches_scipy(self):
        s = cartesian(Algebra.H6, **TWO_PHOTON)
        ts = np.linspace(0, 5, 26)
        traj = dyn.integrate(s, PhaseState.cartesian(1, 2), 0.0, 5.0, t_eval=ts)
        ref = scipy_oracle(s, [1.0, 2.0], 0.0, 5.0, ts)
        np.testing.assert_allclose(traj.coords, ref, rtol=1e-7, atol=1e-8)

    def test_chart_equivariance(self):
        # book system with positive b stays on one side of the xy = 1 pole
        s = cartesian(Algebra.B2, rho0="1 + 0.5*sin(t)", b2="1 + 0.5*cos(t)")
        ts = np.linspace(0, 3, 31)
        c = dyn.integrate(s, PhaseState.cartesian(1, 2), 0.0, 3.0, t_eval=ts)
        e = dyn.integrate(s.with_chart(Chart.EPIDEMIC), PhaseState.epidemic(2 / 3, 3), 0.0, 3.0, t_eval=ts)
        q, p = cart_to_epi(c.coords[:, 0], c.coords[:, 1])
        np.testing.assert_allclose(e.coords, np.column_stack([q, p]), rtol=1e-6, atol=1e-6)

    def test_prolonged_matches_individual(self):
        s = cartesian(Algebra.H6, **TWO_PHOTON)
        starts = [PhaseState.cartesian(1, 2), PhaseState.cartesian(-0.5, 0.3)]
        ts, coords = dyn.integrate_prolonged(s, starts, 0.0, 2.0, samples=11)
        for k, st0 in enumerate(starts):
            single = dyn.integrate(s, st0, 0.0, 2.0, t_eval=ts)
            np.testing.assert_allclose(coords[:, k], single.coords, rtol=1e-8, atol=1e-9)

    def test_trajectory_rejects_unsorted_times(self):
        with pytest.raises(ValueError):
            dyn.Trajectory([0.0, 0.0], [[1, 2], [1, 2]], Chart.CARTESIAN)


class TestExactSolutions:
    def test_at_lower_limit(self):
        s = cartesian(Algebra.B2, **BOOK)
        assert dyn.exact_book(s, C12, 0.0).coords == (1.0, 2.0)
        e = dyn.exact_book(s.with_chart(Chart.EPIDEMIC), C12, 0.0)
        assert e.coords == pytest.approx((2 / 3, 3.0), rel=1e-15)

    def test_oscillator_at_lower_limit(self):
        s = dyn.SystemSpec(Algebra.H4, a=1.5, **OSCILLATOR)
        assert dyn.exact_oscillator(s, C12, 1.5).coords == (1.0, 2.0)

    @pytest.mark.parametrize("chart", list(Chart))
    def test_book_residual(self, chart):
        # d/dt of the closed form equals the vector field (central difference, step 1e-5)
        s = dyn.SystemSpec(Algebra.B2, chart, rho0="1 + 0.5*sin(t)", b2="1 + 0.5*cos(t)")
        h = 1e-5
        for t in np.random.default_rng(3).uniform(0.1, 3, 50):
            xp = np.array(dyn.exact_book(s, C12, t + h).coords)
            xm = np.array(dyn.exact_book(s, C12, t - h).coords)
            lhs = (xp - xm) / (2 * h)
            rhs = np.array(dyn.rhs(s, t, dyn.exact_book(s, C12, t)))
            assert np.max(np.abs(lhs - rhs) / np.maximum(1, np.abs(rhs))) < 1e-6

    @pytest.mark.parametrize("chart", list(Chart))
    def test_oscillator_residual(self, chart):
        s = dyn.SystemSpec(Algebra.H4, chart, rho0="1 + 0.5*sin(t)", b1="0.3*exp(-t)", b2="1 + 0.5*cos(t)")
        h = 1e-5
        for t in np.random.default_rng(4).uniform(0.1, 3, 50):
            lhs = (np.array(dyn.exact_oscillator(s, C12, t + h).coords) - np.array(dyn.exact_oscillator(s, C12, t - h).coords)) / (2 * h)
            rhs = np.array(dyn.rhs(s, t, dyn.exact_oscillator(s, C12, t)))
            assert np.max(np.abs(lhs - rhs) / np.maximum(1, np.abs(rhs))) < 1e-6

    def test_book_matches_scipy(self):
        s = cartesian(Algebra.B2, **BOOK)
        ts = np.linspace(0, 5, 51)
        exact = dyn.exact_trajectory(s, C12, ts)
        ref = scipy_oracle(s, [1.0, 2.0], 0.0, 5.0, ts)
        assert np.max(np.abs(exact.coords - ref) / np.maximum(1, np.abs(ref))) < 1e-6

    def test_oscillator_matches_integrator_at_two(self):
        s = cartesian(Algebra.H4, rho0="1 + 0.5*sin(t)", b1="cos(t)", b2=1.0)
        end = dyn.integrate(s, PhaseState.cartesian(1, 2), 0.0, 2.0, tol=1e-10).end
        assert dyn.exact_oscillator(s, C12, 2.0).coords == pytest.approx(end.coords, rel=1e-6, abs=1e-6)

    def test_oscillator_reduces_to_book(self):
        b2 = cartesian(Algebra.B2, **BOOK)
        h4 = cartesian(Algebra.H4, **BOOK)
        for t in np.linspace(0, 5, 21):
            a = dyn.exact_book(b2, C12, t).coords
            b = dyn.exact_oscillator(h4, C12, t).coords
            assert max(abs(u - v) for u, v in zip(a, b)) < 1e-14

    @pytest.mark.parametrize("algebra, coeffs", [(Algebra.B2, BOOK), (Algebra.H4, OSCILLATOR)])
    def test_direct_formulas_agree_with_map(self, algebra, coeffs):
        s = dyn.SystemSpec(algebra, Chart.EPIDEMIC, **coeffs)
        for t in np.linspace(0, 2, 11):
            try:
                via_map = dyn.exact_oscillator(s, C12, t).coords
            except SingularPointError:
                continue
            direct = dyn.exact_direct(s, C12, t).coords
            assert direct == pytest.approx(via_map, rel=1e-10)

    def test_grid_matches_pointwise(self):
        s = cartesian(Algebra.H4, **OSCILLATOR)
        ts = np.linspace(0, 5, 11)
        grid = dyn.exact_trajectory(s, C12, ts)
        for t, row in zip(ts, grid.coords):
            assert tuple(row) == pytest.approx(dyn.exact_oscillator(s, C12, t).coords, rel=1e-12)

    def test_grid_epidemic_pole_names_time(self):
        s = dyn.SystemSpec(Algebra.B2, Chart.EPIDEMIC, rho0=1, b2="cos(t)")
        # c1 = 0 keeps x = 0, a pole of the map
        with pytest.raises(SingularPointError, match="t = 0.5"):
            dyn.exact_trajectory(s, dyn.IntegrationConstants(0.0, 1.0), [0.5, 1.0])

    def test_wrong_algebra(self):
        with pytest.raises(ValueError):
            dyn.exact_oscillator(cartesian(Algebra.H6), C12, 1.0)
        with pytest.raises(ValueError):
            dyn.exact_book(cartesian(Algebra.H4), C12, 1.0)

    def test_constants_from_initial_round_trip(self):
        s = dyn.SystemSpec(Algebra.H4, a=0.3, **OSCILLATOR)
        start = PhaseState.cartesian(0.7, -1.1)
        c = dyn.constants_from_initial(s, start, 2.0)
        assert dyn.exact_oscillator(s, c, 2.0).coords == pytest.approx(start.coords, rel=1e-13)


class TestConstantRate:
    def test_at_zero(self):
        assert dyn.exact_constant_book(1.0, C12, 0.0) == pytest.approx((2 / 3, 3.0), rel=1e-15)

    @pytest.mark.parametrize("rho0", [1.0, 0.4, 2.5])
    def test_matches_book(self, rho0, rng):
        s = dyn.SystemSpec(Algebra.B2, Chart.EPIDEMIC, rho0=rho0, b2=1.0)
        c = dyn.IntegrationConstants(1.3, 0.9)
        for t in rng.uniform(0, 3, 20):
            got = dyn.exact_constant_book(rho0, c, t)
            ref = dyn.exact_book(s, c, t).coords
            assert got == pytest.approx(ref, rel=1e-10)

    @pytest.mark.parametrize(
        "args, expected",
        [((1.0, 1.0, 0.0), (1.0, 2.0)), ((2.0, 3.0, 5.0), (1.0, 2.0))],
    )
    def test_nm_constants(self, args, expected):
        c = dyn.nm_constants(*args)
        assert (c.c1, c.c2) == pytest.approx(expected, rel=1e-15)

    def test_nm_constants_zero_radicand(self):
        with pytest.raises(DomainError):
            dyn.nm_constants(1.0, 2.0, 4.0)

    @pytest.mark.parametrize("case", [(1.0, 1.0, 0.0), (2.0, 3.0, 5.0), (0.5, 2.0, 1.0)])
    def test_reproduces_classical_solution(self, case):
        rho0, tc1, tc2 = case
        c = dyn.nm_constants(*case)
        for t in np.linspace(0, 5, 100):
            got = dyn.exact_constant_book(rho0, c, t)
            ref = dyn.nm_solution(rho0, tc1, tc2, t)
            assert got == pytest.approx(ref, rel=1e-10)


class TestSecondOrder:
    def test_circle_coefficients(self):
        s = cartesian(Algebra.H6, b4=1, b5=-1)
        assert dyn.h6_second_order_coeffs(s, 0.3) == (1.0, 0.0, 0.0)

    def test_constant_rate(self):
        s = cartesian(Algebra.H6, rho0=0.7, b4=1)
        a, b, _ = dyn.h6_second_order_coeffs(s, 1.0)
        assert a == pytest.approx(-0.49, rel=1e-15) and b == 0.0

    def test_b4_zero(self):
        with pytest.raises(DomainError):
            dyn.h6_second_order_coeffs(cartesian(Algebra.H6, b4="sin(t)"), 0.0)

    def test_residual_default_coefficients(self):
        s = cartesian(Algebra.H6, **TWO_PHOTON)
        assert second_order_residual(s, PhaseState.cartesian(1, 2), 0.0, 5.0) < 1e-5

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_residual_random_coefficients(self, seed):
        rng = np.random.default_rng(seed)
        s = cartesian(
            Algebra.H6,
            rho0=random_smooth_coefficient(rng, offset=0.5),
            b1=random_smooth_coefficient(rng),
            b2=random_smooth_coefficient(rng),
            b4=random_smooth_coefficient(rng, scale=0.3, offset=1.0),
            b5=random_smooth_coefficient(rng),
        )
        assert second_order_residual(s, PhaseState.cartesian(0.5, -0.5), 0.0, 3.0) < 1e-5
