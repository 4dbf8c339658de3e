import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from randomholes.maps import (
    AffineBranch,
    MarkovMap,
    SmoothBranch,
    check_markov,
    doubling_map,
    golden_mean_map,
    linear_full_map,
    perturbed_full_map,
    piecewise_linear_map,
    tripling_map,
)


def dyadic_interval(bits):
    """Oracle: the dyadic interval of a binary itinerary, by place value."""
    lo = sum(b * 2.0 ** -(k + 1) for k, b in enumerate(bits))
    return lo, lo + 2.0 ** -len(bits)


def brute_force_words(transition, n):
    """Oracle: enumerate admissible words directly from the 0/1 matrix."""
    l = transition.shape[0]
    return [
        w
        for w in itertools.product(range(l), repeat=n)
        if all(transition[a][b] for a, b in zip(w[:-1], w[1:]))
    ]


class TestCheckMarkov:
    def test_doubling_all_pass(self):
        rep = check_markov(doubling_map())
        assert rep.passed, rep.failures()
        assert doubling_map().covering_exponent == 1

    def test_tripling_all_pass(self):
        rep = check_markov(tripling_map())
        assert rep.passed
        assert tripling_map().covering_exponent == 1

    def test_golden_mean(self):
        m = golden_mean_map()
        assert check_markov(m).passed
        assert m.transition.tolist() == [[1, 1], [1, 0]]
        assert m.covering_exponent == 2

    def test_markov_condition_violation(self):
        # branch image (0, 1/3) is not a union of cells of {[0,1/2),[1/2,1)}
        m = piecewise_linear_map([0.0, 0.5, 1.0],
                                 [(2.0 / 3.0, 0.0), (2.0, -1.0)])
        rep = check_markov(m)
        assert not rep.conditions["markov_images"][0]
        assert "cell 0" in rep.conditions["markov_images"][1]

    def test_non_monotone_branch_reported_with_cell(self):
        wiggle = SmoothBranch(
            lambda x: x + 0.3 * np.sin(4 * np.pi * x),
            lambda x: 1 + 0.3 * 4 * np.pi * np.cos(4 * np.pi * x),
        )
        m = MarkovMap([0.0, 0.5, 1.0], [AffineBranch(2.0, 0.0), wiggle])
        rep = check_markov(m)
        assert not rep.conditions["monotone_branches"][0]
        assert "cell 1" in rep.conditions["monotone_branches"][1]

    def test_perturbed_full_map_valid(self):
        rep = check_markov(perturbed_full_map(2, 0.1))
        assert rep.passed
        assert perturbed_full_map(2, 0.1).gamma > 1.0


class TestRefine:
    def test_dyadic_word(self):
        cyls = {c.symbols: (c.lo, c.hi) for c in doubling_map().refine(3)}
        assert cyls[(1, 0, 1)] == pytest.approx(dyadic_interval([1, 0, 1]))
        assert cyls[(1, 0, 1)] == (0.625, 0.75)

    def test_doubling_level2(self):
        cyls = doubling_map().refine(2)
        assert len(cyls) == 4
        assert all(c.diameter == pytest.approx(0.25) for c in cyls)

    def test_golden_mean_admissibility(self):
        m = golden_mean_map()
        words = {c.symbols for c in m.refine(2)}
        oracle = set(brute_force_words(m.transition, 2))
        assert words == oracle
        assert len(words) == 3 and (1, 1) not in words

    @pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
    def test_all_dyadic_words_present(self, n):
        m = doubling_map()
        words = {c.symbols for c in m.refine(n)}
        assert words == set(brute_force_words(m.transition, n))

    def test_partition_property(self):
        for m in (doubling_map(), golden_mean_map(), perturbed_full_map(2, 0.08)):
            cyls = sorted(m.refine(4), key=lambda c: c.lo)
            assert cyls[0].lo == pytest.approx(0.0, abs=1e-12)
            assert cyls[-1].hi == pytest.approx(1.0, abs=1e-12)
            for a, b in zip(cyls[:-1], cyls[1:]):
                assert a.hi == pytest.approx(b.lo, abs=1e-10)

    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_nesting_and_diameter(self, n):
        for m in (doubling_map(), golden_mean_map(), tripling_map()):
            parents = {c.symbols: c for c in m.refine(n)}
            children = m.refine(n + 1)
            assert len(children) > len(parents)
            for c in children:
                p = parents[c.symbols[:n]]
                assert p.lo - 1e-12 <= c.lo and c.hi <= p.hi + 1e-12
            assert max(c.diameter for c in children) <= m.gamma ** -(n + 1) + 1e-9

    def test_shift_maps_cylinder_onto_shifted_word(self):
        m = doubling_map()
        shifted = {c.symbols: c for c in m.refine(2)}
        for c in m.refine(3):
            image = m.apply(c.midpoint)
            target = shifted[c.symbols[1:]]
            assert target.lo <= image < target.hi


class TestIterate:
    def test_doubling_single_step(self):
        assert doubling_map().iterate(0.3, 1) == pytest.approx(0.6)

    def test_period_two_point(self):
        assert doubling_map().iterate(1.0 / 3.0, 2) == pytest.approx(1.0 / 3.0)

    def test_tripling_two_steps(self):
        assert tripling_map().iterate(0.1, 2) == pytest.approx(0.9)

    def test_right_open_convention(self):
        m = doubling_map()
        assert m.apply(0.5) == pytest.approx(0.0)   # right branch at 0.5
        assert m.apply(1.0) == pytest.approx(1.0)   # last branch at 1
        assert m.iterate(0.3, 0) == 0.3

    def test_vectorized_matches_scalar(self):
        m = perturbed_full_map(2, 0.1)
        xs = np.linspace(0, 1, 101)
        vec = m.apply(xs)
        assert vec == pytest.approx([m.apply(float(x)) for x in xs])


@settings(max_examples=30, deadline=None)
@given(
    x=st.floats(min_value=0.0, max_value=0.999),
    n=st.integers(min_value=1, max_value=6),
)
def test_point_lies_in_exactly_one_cylinder(x, n):
    m = doubling_map()
    hits = [c for c in m.refine(n) if c.lo <= x < c.hi]
    assert len(hits) == 1
