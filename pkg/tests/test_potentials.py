import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from randomholes.maps import doubling_map, piecewise_linear_map, tripling_map
from randomholes.potentials import (
    Potential,
    birkhoff_sum,
    combine,
    constant,
    estimate_seminorm,
    from_grid,
    geometric_potential,
    piecewise_constant,
)


class TestGeometric:
    def test_doubling_constant(self):
        phi = geometric_potential(doubling_map())
        assert phi(0.1) == pytest.approx(-math.log(2))
        assert phi(0.9) == pytest.approx(-math.log(2))

    def test_tripling_constant(self):
        phi = geometric_potential(tripling_map())
        assert phi(0.5) == pytest.approx(-math.log(3))

    def test_unequal_slopes(self):
        m = piecewise_linear_map([0.0, 0.5, 1.0], [(2.0, 0.0), (4.0, -2.0)])
        # slope-4 branch maps [1/2,1) over [0,2): not Markov, but the
        # potential itself only needs branch derivatives
        phi = geometric_potential(m)
        assert phi(0.25) == pytest.approx(-math.log(2))
        assert phi(0.75) == pytest.approx(-math.log(4))
        assert phi.is_piecewise_constant


class TestBirkhoff:
    def test_constant_potential(self):
        m = doubling_map()
        phi = constant(-math.log(2))
        assert birkhoff_sum(phi, m, 0.37, 5) == pytest.approx(-5 * math.log(2))

    def test_empty_sum(self):
        assert birkhoff_sum(constant(3.0), doubling_map(), 0.2, 0) == 0.0

    def test_identity_potential_on_orbit(self):
        # oracle: x + T(x) computed directly
        m = doubling_map()
        phi = Potential(lambda x: np.asarray(x, dtype=float))
        x = 1.0 / 3.0
        expected = x + m.apply(x)
        assert birkhoff_sum(phi, m, x, 2) == pytest.approx(expected)
        assert expected == pytest.approx(1.0)

    @settings(max_examples=40, deadline=None)
    @given(
        x=st.floats(min_value=0.0, max_value=0.999),
        n=st.integers(min_value=0, max_value=8),
        m=st.integers(min_value=0, max_value=8),
    )
    def test_cocycle_identity(self, x, n, m):
        dmap = doubling_map()
        phi = Potential(lambda y: np.cos(3.0 * np.asarray(y)))
        lhs = birkhoff_sum(phi, dmap, x, n + m)
        rhs = birkhoff_sum(phi, dmap, x, n) + birkhoff_sum(
            phi, dmap, dmap.iterate(x, n), m
        )
        assert lhs == pytest.approx(rhs, abs=1e-9)


class TestCombine:
    def test_identity(self):
        phi = piecewise_constant([0.0, 0.5, 1.0], [1.0, 2.0])
        out = combine(1.0, phi, 0.0, constant(0.0))
        xs = np.linspace(0, 0.99, 7)
        assert out(xs) == pytest.approx(phi(xs))

    def test_example_weights(self):
        p = 0.5
        phi = constant(-math.log(2))
        psi = piecewise_constant([0.0, 0.5, 1.0], [math.log(p), 0.0])
        both = combine(1.0, phi, 1.0, psi)
        assert both(0.25) == pytest.approx(-math.log(2) + math.log(p))
        assert both(0.75) == pytest.approx(-math.log(2))
        assert both.is_piecewise_constant
        assert both.breakpoints.tolist() == [0.0, 0.5, 1.0]

    def test_pointwise_linearity(self):
        phi = Potential(lambda x: np.sin(np.asarray(x)))
        psi = Potential(lambda x: np.asarray(x) ** 2)
        out = combine(2.5, phi, -1.5, psi)
        for x in (0.0, 0.3, 0.77):
            assert out(x) == pytest.approx(2.5 * math.sin(x) - 1.5 * x * x)

    def test_seminorm_bound_propagates(self):
        phi = piecewise_constant([0.0, 0.5, 1.0], [1.0, 2.0])
        out = combine(2.0, phi, 3.0, constant(1.0))
        assert out.seminorm == 0.0


class TestSeminorm:
    def test_constant_zero(self):
        assert estimate_seminorm(constant(4.2), 64) == 0.0

    def test_linear_is_one(self):
        phi = Potential(lambda x: np.asarray(x, dtype=float), alpha=1.0)
        assert estimate_seminorm(phi, 256) == pytest.approx(1.0, rel=1e-6)

    def test_log_distance_divergence(self):
        x0 = 0.3
        phi = Potential(lambda x: np.log(2.0 * np.abs(np.asarray(x) - x0)))
        estimates = [estimate_seminorm(phi, g) for g in (64, 256, 1024)]
        assert estimates[0] < estimates[1] < estimates[2]
        assert estimates[2] > 100.0

    def test_nonfinite_evaluation_raises(self):
        def fn(x):
            with np.errstate(divide="ignore"):
                return np.log(np.asarray(x, dtype=float))

        with pytest.raises(ValueError, match="not locally Hoelder"):
            estimate_seminorm(Potential(fn), 64)

    @settings(max_examples=20, deadline=None)
    @given(
        small=st.integers(min_value=2, max_value=200),
        extra=st.integers(min_value=1, max_value=800),
    )
    def test_monotone_in_grid_size(self, small, extra):
        phi = Potential(lambda x: np.sin(7.0 * np.asarray(x)) ** 2, alpha=0.5)
        assert estimate_seminorm(phi, small) <= estimate_seminorm(
            phi, small + extra
        ) + 1e-12

    def test_piecewise_respects_pieces(self):
        # jump at the declared piece boundary does not count
        psi = piecewise_constant([0.0, 0.5, 1.0], [math.log(0.5), 0.0])
        assert estimate_seminorm(psi, 128) == 0.0


class TestGrid:
    def test_interpolation(self):
        xs = np.linspace(0, 1, 11)
        pot = from_grid(xs, xs**2)
        assert pot(0.5) == pytest.approx(0.25, abs=1e-2)
        assert pot(xs[3]) == pytest.approx(xs[3] ** 2)
