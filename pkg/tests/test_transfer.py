import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from randomholes.maps import doubling_map, perturbed_full_map, piecewise_linear_map, tripling_map
from randomholes.noise import DiscreteHoleModel, NoiseModel
from randomholes.potentials import Potential, constant, geometric_potential
from randomholes.transfer import (
    ConvergenceError,
    assemble_closed,
    assemble_open,
    conditionally_stationary,
    conformality_check,
    dominant_spectrum,
    equilibrium_measure,
    escape_rate,
    iterate_convergence,
    support_check,
    verify_reduction,
)


def ex1_noise(p=0.5):
    return DiscreteHoleModel(level=1, holes=((((0,),), 1.0 - p), ((), p)))


def ex2_noise(p=0.5):
    return DiscreteHoleModel(level=1, holes=((((0,),), p), (((0,), (1,)), 1.0 - p)))


def ex1_spectrum(p=0.5, n=1):
    m = doubling_map()
    return dominant_spectrum(
        assemble_open(m, geometric_potential(m), ex1_noise(p), n))


def ex2_spectrum(p=0.5, n=1):
    m = tripling_map()
    return dominant_spectrum(
        assemble_open(m, geometric_potential(m), ex2_noise(p), n))


def random_full_branch_map(seed):
    """Random 3-cell full-branch piecewise-linear map (Markov by design)."""
    rng = np.random.default_rng(seed)
    cuts = np.sort(rng.uniform(0.15, 0.85, 2))
    endpoints = [0.0, float(cuts[0]), float(cuts[1]), 1.0]
    branches = []
    for lo, hi in zip(endpoints[:-1], endpoints[1:]):
        slope = 1.0 / (hi - lo)
        branches.append((slope, -slope * lo))
    return piecewise_linear_map(endpoints, branches)


class TestAssembly:
    def test_closed_doubling_geometric(self):
        m = doubling_map()
        op = assemble_closed(m, geometric_potential(m), 1)
        assert op.matrix.toarray() == pytest.approx(np.full((2, 2), 0.5))
        assert op.exact

    def test_closed_tripling_geometric(self):
        m = tripling_map()
        op = assemble_closed(m, geometric_potential(m), 1)
        assert op.matrix.toarray() == pytest.approx(np.full((3, 3), 1 / 3))

    def test_counting_operator(self):
        m = doubling_map()
        op = assemble_closed(m, constant(0.0), 1)
        assert op.matrix.toarray() == pytest.approx(np.ones((2, 2)))
        assert dominant_spectrum(op).eigenvalue == pytest.approx(2.0)

    @pytest.mark.parametrize("p", [0.1, 0.5, 0.9])
    def test_open_example1_matrix(self, p):
        m = doubling_map()
        op = assemble_open(m, geometric_potential(m), ex1_noise(p), 1)
        assert op.matrix.toarray() == pytest.approx(
            np.array([[p / 2, p / 2], [0.5, 0.5]]))

    def test_open_example2_matrix(self):
        p = 0.5
        m = tripling_map()
        op = assemble_open(m, geometric_potential(m), ex2_noise(p), 1)
        assert op.matrix.toarray() == pytest.approx(
            np.array([[0, 0, 0], [p / 3, p / 3, p / 3],
                      [1 / 3, 1 / 3, 1 / 3]]))

    def test_delta_zero_equals_closed(self):
        m = doubling_map()
        noise = NoiseModel(center=0.5, atoms=((0.0, 1.0),))
        a = assemble_open(m, geometric_potential(m), noise, 3)
        b = assemble_closed(m, geometric_potential(m), 3)
        assert a.matrix.toarray() == pytest.approx(b.matrix.toarray())

    def test_adjoint_preserves_lebesgue_for_geometric(self):
        # row-weighted sums: sum_j A[k][j] |cyl_j| = |cyl_k|
        m = random_full_branch_map(4)
        op = assemble_closed(m, geometric_potential(m), 2)
        recovered = op.matrix @ op.widths
        assert recovered == pytest.approx(op.widths)


class TestSpectrum:
    def test_example1_closed_forms(self):
        p = 0.5
        spec = ex1_spectrum(p)
        assert spec.eigenvalue == pytest.approx((1 + p) / 2, abs=1e-14)
        assert spec.rho == pytest.approx([1.0, 1.0])
        assert spec.nu == pytest.approx([p / (1 + p), 1 / (1 + p)])
        assert spec.gap == 0.0
        assert spec.eigenvalue_adjoint == pytest.approx(spec.eigenvalue, abs=1e-12)

    def test_example2_closed_forms(self):
        p = 0.5
        spec = ex2_spectrum(p)
        assert spec.eigenvalue == pytest.approx((1 + p) / 3, abs=1e-14)
        assert spec.nu == pytest.approx([0.0, p / (1 + p), 1 / (1 + p)])
        assert spec.nu[0] == 0.0

    def test_closed_doubling_lebesgue(self):
        m = doubling_map()
        spec = dominant_spectrum(assemble_closed(m, geometric_potential(m), 1))
        assert spec.eigenvalue == pytest.approx(1.0)
        assert spec.rho == pytest.approx([1.0, 1.0])
        assert spec.nu == pytest.approx([0.5, 0.5])

    def test_zero_matrix_errors(self):
        m = doubling_map()
        dead = DiscreteHoleModel(level=1, holes=((((0,), (1,)), 1.0),))
        with pytest.raises(ConvergenceError):
            dominant_spectrum(assemble_open(m, geometric_potential(m), dead, 1))

    def test_gap_below_eigenvalue(self):
        m = random_full_branch_map(11)
        spec = dominant_spectrum(assemble_closed(m, geometric_potential(m), 3))
        assert spec.gap < spec.eigenvalue


class TestMeasures:
    def test_equilibrium_closed_doubling(self):
        m = doubling_map()
        for n in (1, 2, 4):
            spec = dominant_spectrum(assemble_closed(m, geometric_potential(m), n))
            assert equilibrium_measure(spec) == pytest.approx(
                np.full(2**n, 2.0**-n))

    def test_equilibrium_examples(self):
        assert equilibrium_measure(ex1_spectrum(0.5)) == pytest.approx([1 / 3, 2 / 3])
        assert equilibrium_measure(ex2_spectrum(0.5)) == pytest.approx([0, 1 / 3, 2 / 3])

    def test_alpha_hat_example1(self):
        p = 0.5
        alpha = conditionally_stationary(ex1_spectrum(p))
        assert alpha.density == pytest.approx([2 * p / (1 + p), 2 / (1 + p)])
        assert alpha.masses == pytest.approx([1 / 3, 2 / 3])
        assert alpha.mass_flux == pytest.approx(alpha.eigenvalue)

    def test_alpha_hat_delta_zero(self):
        m = doubling_map()
        noise = NoiseModel(center=0.5, atoms=((0.0, 1.0),))
        spec = dominant_spectrum(assemble_open(m, geometric_potential(m), noise, 2))
        alpha = conditionally_stationary(spec)
        assert spec.eigenvalue == pytest.approx(1.0)
        assert alpha.density == pytest.approx(spec.rho)

    @pytest.mark.parametrize("p", [0.2, 0.6])
    def test_alpha_hat_total_mass(self, p):
        alpha = conditionally_stationary(ex2_spectrum(p, n=3))
        assert np.sum(alpha.masses) == pytest.approx(1.0, abs=1e-12)

    def test_alpha_hat_fixed_point_identity(self):
        """Brute-force oracle for the defining identity
        lam * alpha(A) = sum_h p_h alpha(T^{-1}(A minus hole_h))
        (the hole is tested at the image point) over all level-3
        cylinders, using pure interval arithmetic."""
        p, n = 0.5, 3
        m = doubling_map()
        spec = ex1_spectrum(p, n=n)
        alpha = conditionally_stationary(spec)
        holes = {0: [(0.0, 0.5)], 1: []}      # hole intervals per event
        probs = {0: 1.0 - p, 1: p}

        def alpha_of(intervals):
            total = 0.0
            for lo, hi in intervals:
                for (clo, chi), d in zip(alpha.intervals, alpha.density):
                    total += d * max(0.0, min(hi, chi) - max(lo, clo))
            return total

        def preimage(intervals):
            return [iv for lo, hi in intervals
                    for iv in ((lo / 2, hi / 2), (lo / 2 + 0.5, hi / 2 + 0.5))]

        def minus(intervals, holes_):
            out = intervals
            for hlo, hhi in holes_:
                nxt = []
                for lo, hi in out:
                    if hhi <= lo or hlo >= hi:
                        nxt.append((lo, hi))
                    else:
                        if lo < hlo:
                            nxt.append((lo, hlo))
                        if hhi < hi:
                            nxt.append((hhi, hi))
                out = nxt
            return out

        for clo, chi in spec.matrix.intervals:
            lhs = spec.eigenvalue * alpha_of([(clo, chi)])
            rhs = sum(
                probs[h] * alpha_of(preimage(minus([(clo, chi)], holes[h])))
                for h in holes
            )
            assert lhs == pytest.approx(rhs, abs=1e-12)


class TestEscapeRate:
    def test_example1(self):
        assert escape_rate(ex1_spectrum(0.5)) == pytest.approx(
            0.2876820724517809, abs=1e-12)

    def test_example2(self):
        assert escape_rate(ex2_spectrum(0.5)) == pytest.approx(math.log(2))

    def test_closed_zero(self):
        m = doubling_map()
        spec = dominant_spectrum(assemble_closed(m, geometric_potential(m), 1))
        assert escape_rate(spec) == 0.0

    def test_rejects_unnormalized(self):
        spec = dominant_spectrum(assemble_closed(doubling_map(), constant(0.0), 1))
        with pytest.raises(ValueError):
            escape_rate(spec)


class TestReduction:
    def test_example1_exact(self):
        m = doubling_map()
        assert verify_reduction(m, geometric_potential(m), ex1_noise(0.5), 1) == 0.0

    def test_example2_weight_mode(self):
        m = tripling_map()
        assert verify_reduction(m, geometric_potential(m), ex2_noise(0.5), 2) == 0.0

    def test_continuous_twin_of_example1(self):
        p = 0.5
        m = doubling_map()
        noise = NoiseModel(center=0.25, atoms=((0.0, p), (0.25, 1 - p)))
        assert verify_reduction(m, geometric_potential(m), noise, 4) == 0.0

    def test_smooth_map_holder_data(self):
        m = perturbed_full_map(2, 0.1)
        noise = NoiseModel(center=0.35, atoms=((0.0, 0.7),),
                           density_pieces=((0.05, 0.45, 0.75),))
        worst = verify_reduction(m, geometric_potential(m), noise, 8)
        assert worst < 1e-12


class TestConformality:
    def test_closed_doubling(self):
        m = doubling_map()
        for n in (1, 3, 5):
            spec = dominant_spectrum(assemble_closed(m, geometric_potential(m), n))
            assert conformality_check(spec) < 1e-13

    def test_example1(self):
        assert conformality_check(ex1_spectrum(0.5, n=4)) < 1e-12

    def test_example2_includes_support_statement(self):
        assert conformality_check(ex2_spectrum(0.5, n=3)) < 1e-12

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_random_piecewise_linear(self, seed):
        m = random_full_branch_map(seed)
        spec = dominant_spectrum(assemble_closed(m, geometric_potential(m), 3))
        assert conformality_check(spec) < 1e-10


class TestConvergenceIteration:
    def test_eigenfunction_is_fixed(self):
        spec = ex1_spectrum(0.5)
        seq = iterate_convergence(spec, spec.rho, 5)
        assert max(seq) < 1e-12

    def test_rank_one_converges_in_one_step(self):
        spec = ex1_spectrum(0.5)
        seq = iterate_convergence(spec, np.array([1.0, 0.0]), 3)
        assert seq[0] < 1e-12

    def test_counting_operator_rank_one(self):
        spec = dominant_spectrum(assemble_closed(doubling_map(), constant(0.0), 1))
        seq = iterate_convergence(spec, np.array([1.0, 0.0]), 3)
        assert seq[0] < 1e-12

    def test_geometric_decay_at_gap_rate(self):
        m = random_full_branch_map(8)
        spec = dominant_spectrum(assemble_closed(m, geometric_potential(m), 4))
        f = np.cos(7 * spec.matrix.midpoints)
        seq = iterate_convergence(spec, f, 30)
        assert seq[-1] < 1e-8 * max(seq[0], 1.0)


class TestSupport:
    def test_example2_support_excludes_first_cell(self):
        spec = ex2_spectrum(0.5, n=3)
        report = support_check(spec, ex2_noise(0.5))
        assert report.match
        assert all(0 not in w for w in report.mass_support)

    def test_full_support_with_mass_at_zero(self):
        m = doubling_map()
        spec = ex1_spectrum(0.5, n=3)
        report = support_check(spec, ex1_noise(0.5))
        assert report.match
        assert len(report.mass_support) == 2**3

    def test_delta_zero_full(self):
        m = doubling_map()
        noise = NoiseModel(center=0.5, atoms=((0.0, 1.0),))
        spec = dominant_spectrum(assemble_open(m, geometric_potential(m), noise, 2))
        report = support_check(spec, noise)
        assert report.match and len(report.mass_support) == 4


class TestInvariants:
    @settings(max_examples=15, deadline=None)
    @given(p=st.floats(min_value=0.05, max_value=0.95))
    def test_open_eigenvalue_below_closed(self, p):
        m = doubling_map()
        phi = geometric_potential(m)
        lam_open = dominant_spectrum(assemble_open(m, phi, ex1_noise(p), 2)).eigenvalue
        lam_closed = dominant_spectrum(assemble_closed(m, phi, 2)).eigenvalue
        assert lam_open <= lam_closed + 1e-12

    def test_monotone_in_mass_at_zero(self):
        m = doubling_map()
        phi = geometric_potential(m)
        lams = [
            dominant_spectrum(assemble_open(m, phi, ex1_noise(p), 1)).eigenvalue
            for p in (0.1, 0.3, 0.5, 0.7, 0.9)
        ]
        assert np.all(np.diff(lams) > 0)

    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_exact_mode_level_independence(self, n):
        spec = ex1_spectrum(0.5, n=n)
        assert spec.matrix.exact
        assert spec.eigenvalue == pytest.approx(0.75, abs=1e-13)

    def test_smooth_refinement_differences_shrink(self):
        m = perturbed_full_map(2, 0.1)
        phi = geometric_potential(m)
        noise = NoiseModel(center=0.35, atoms=((0.0, 0.6),),
                           density_pieces=((0.1, 0.5, 1.0),))
        lams = [
            dominant_spectrum(assemble_open(m, phi, noise, n)).eigenvalue
            for n in (4, 5, 6, 7)
        ]
        diffs = np.abs(np.diff(lams))
        assert np.all(np.diff(diffs) < 0)
