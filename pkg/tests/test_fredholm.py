import numpy as np
import pytest

from gue_spectra import fredholm
from gue_spectra.fredholm import (
    ResolutionWarning,
    brute_force_gamma,
    brute_force_joint_pmf,
    counting_joint_pmf,
    discretize,
    fredholm_det,
    hadamard_bound_check,
    independence_defect_det,
    iterated_kernel_sups,
    log_derivative,
    trace_powers,
)
from gue_spectra.kernels import ScaledWindow
from gue_spectra.specfun import gauss_legendre


def raw(index, a, b):
    return ScaledWindow(index, 0.0, (a, b), kappa=0.0)


BULK = ScaledWindow(1, 0.0, (-1.0, 1.0))
EDGE_PLUS = ScaledWindow(2, 2.0, (-1.0, 1.0))
EDGE_MINUS = ScaledWindow(3, -2.0, (-1.0, 1.0))


class TestDiscretize:
    def test_zero_weight_gives_unit_determinant(self):
        for m in (8, 24, 60):
            op = discretize(40, [BULK], m)
            assert fredholm_det(op, 1.0, 0.0) == 1.0

    def test_nystrom_self_convergence(self):
        d40 = fredholm_det(discretize(50, [BULK], 40), 1.0, 1.0)
        d80 = fredholm_det(discretize(50, [BULK], 80), 1.0, 1.0)
        assert abs(d40 - d80) < 1e-8

    def test_kernel_matrix_symmetric(self):
        op = discretize(60, [BULK, EDGE_PLUS])
        assert np.max(np.abs(op.kernel - op.kernel.T)) < 1e-12

    def test_rejects_overlap_and_degenerate(self):
        with pytest.raises(ValueError, match="overlap"):
            discretize(1, [ScaledWindow(1, -2.0, (-3.0, 3.0)), ScaledWindow(2, 2.0, (-3.0, 3.0))])
        with pytest.raises(ValueError, match="zero length"):
            discretize(10, [raw(1, 0.5, 0.5)])
        with pytest.raises(ValueError):
            discretize(10, [BULK], m=3)

    def test_resolution_warning(self):
        # unscaled bulk window spans ~ n * rho * |interval| oscillations
        with pytest.warns(ResolutionWarning):
            discretize(200, [raw(1, -1.0, 1.0)], m=12)

    def test_restrict_matches_single_window_build(self):
        op = discretize(30, [EDGE_MINUS, EDGE_PLUS])
        sub = op.restrict(1)
        rebuilt = discretize(30, [EDGE_PLUS])
        assert np.allclose(sub.nodes, rebuilt.nodes)
        assert np.allclose(sub.kernel, rebuilt.kernel)


class TestFredholmDeterminant:
    def test_unit_at_z_zero(self):
        op = discretize(25, [BULK, EDGE_PLUS])
        assert fredholm_det(op, 0.0, np.array([1.0, 1.0])) == 1.0

    def test_series_truncation_is_cubic(self):
        op = discretize(100, [BULK, EDGE_PLUS])
        lam = np.array([1.0, 1.0])
        traces = trace_powers(op, lam, 2)
        t1, t2 = traces.totals

        def defect(z):
            return abs(fredholm_det(op, z, lam) - (1.0 - z * t1 + z * z / 2.0 * (t1 ** 2 - t2)))

        d1, d2, d3 = defect(0.1), defect(0.05), defect(0.025)
        assert d1 / d2 == pytest.approx(8.0, rel=0.25)
        assert d2 / d3 == pytest.approx(8.0, rel=0.25)
        assert d1 <= 2.0 * (d1 / 0.1 ** 3) * 0.1 ** 3

    def test_whole_spectrum_gap_probability_vanishes(self):
        # all n=20 eigenvalues lie in (-3, 3) with overwhelming probability
        op = discretize(20, [raw(1, -3.0, 3.0)], 120)
        assert abs(fredholm_det(op, 1.0, 1.0)) < 1e-3
        from gue_spectra.sampling import sample_gue_tridiag
        hits = sum(
            1
            for r in range(400)
            if abs(sample_gue_tridiag(20, 1000 + r).eigenvalues).max() >= 3.0
        )
        assert hits == 0  # Monte Carlo agrees: the gap event never occurs

    def test_complex_arguments(self):
        op = discretize(20, [BULK], 16)
        value = fredholm_det(op, 0.5 + 0.25j, 1.0)
        assert isinstance(value, complex)
        real_value = fredholm_det(op, 0.5, 1.0)
        assert isinstance(real_value, float)


class TestTraces:
    def test_full_support_trace_is_n(self):
        op = discretize(20, [raw(1, -3.0, 3.0)], 120)
        traces = trace_powers(op, 1.0, 1)
        assert traces.totals[0] == pytest.approx(20.0, abs=0.01)

    def test_split_remainder_zero_at_first_order(self):
        op = discretize(80, [BULK, EDGE_PLUS])
        traces = trace_powers(op, np.array([1.0, 1.0]), 4)
        assert traces.remainder[0] == 0.0

    def test_split_remainder_decays(self):
        values = []
        for n in (100, 200, 400):
            op = discretize(n, [BULK, EDGE_PLUS])
            traces = trace_powers(op, np.array([1.0, 1.0]), 2)
            values.append(abs(traces.remainder[1]))
        assert values[0] > values[1] > values[2]

    def test_kmax_validation(self):
        op = discretize(10, [BULK], 8)
        with pytest.raises(ValueError):
            trace_powers(op, 1.0, 0)


class TestLogDerivative:
    def test_value_at_zero_is_minus_first_trace(self):
        op = discretize(60, [BULK, EDGE_PLUS])
        lam = np.array([1.0, 1.0])
        traces = trace_powers(op, lam, 1)
        assert log_derivative(op, lam, 0.0) == pytest.approx(-traces.totals[0], rel=1e-14)

    def test_matches_truncated_trace_series(self):
        op = discretize(60, [BULK, EDGE_PLUS])
        lam = np.array([1.0, 1.0])
        traces = trace_powers(op, lam, 10)
        z = 0.05
        series = -sum(traces.totals[k] * z ** k for k in range(10))
        assert log_derivative(op, lam, z) == pytest.approx(series, abs=1e-8)

    def test_matches_centered_finite_difference(self):
        op = discretize(60, [BULK, EDGE_PLUS])
        lam = np.array([1.0, 1.0])
        z, h = 0.05, 1e-6
        fd = (np.log(fredholm_det(op, z + h, lam)) - np.log(fredholm_det(op, z - h, lam))) / (2 * h)
        assert log_derivative(op, lam, z) == pytest.approx(fd, abs=1e-5)

    def test_singular_resolvent_raises(self):
        from gue_spectra.fredholm import MultiWindowOperator
        op = MultiWindowOperator(
            n=5, windows=(BULK,), nodes=np.array([0.1]), weights=np.array([0.5]),
            window_index=np.zeros(1, dtype=np.intp), kernel=np.array([[2.0]]),
        )
        with pytest.raises(ArithmeticError):
            log_derivative(op, 1.0, 1.0)  # 1 - z w K = 0 exactly


class TestCountingPmf:
    def test_zero_cell_is_gap_probability(self):
        windows = [EDGE_MINUS, EDGE_PLUS]
        dist = counting_joint_pmf(50, windows, lmax=1)
        op = discretize(50, windows)
        gap = fredholm_det(op, 1.0, np.array([1.0, 1.0]))
        assert dist.joint[0, 0] == pytest.approx(gap, abs=1e-10)

    def test_matches_brute_force_n2(self):
        windows = [raw(1, -1.0, 0.0), raw(2, 0.5, 1.5)]
        brute = brute_force_joint_pmf(2, windows)
        contour = counting_joint_pmf(2, windows, lmax=2, m=40)
        assert np.max(np.abs(brute.joint - contour.joint)) < 1e-6

    def test_total_probability_with_full_table(self):
        windows = [raw(1, -1.0, 0.0), raw(2, 0.5, 1.5)]
        dist = counting_joint_pmf(2, windows, lmax=(8, 8), m=8)
        assert dist.joint.sum() == pytest.approx(1.0, abs=1e-8)

    def test_marginal_of_joint_matches_direct_marginal(self):
        # lmax deep enough that the discarded occupancy tail is below 1e-8
        dist = counting_joint_pmf(40, [EDGE_MINUS, BULK, EDGE_PLUS], lmax=10, m=16)
        assert dist.tail_mass < 1e-8
        for i in range(3):
            assert np.max(np.abs(dist.marginal_from_joint(i) - dist.marginals[i])) < 1e-8

    def test_occupancy_beyond_rank_is_exact_zero(self):
        dist = counting_joint_pmf(10, [raw(1, -0.5, 0.5)], lmax=12, m=8)
        assert np.all(dist.joint[9:] == 0.0)

    def test_lmax_validation(self):
        with pytest.raises(ValueError):
            counting_joint_pmf(10, [BULK], lmax=70, m=8)
        with pytest.raises(ValueError):
            counting_joint_pmf(10, [BULK], lmax=-1)

    def test_core_spectrum_is_contractive(self):
        op = discretize(60, [EDGE_MINUS, BULK, EDGE_PLUS])
        spectrum = np.linalg.eigvalsh(op.core)
        assert spectrum.min() > -1e-9
        assert spectrum.max() < 1.0 + 1e-6
        det = fredholm_det(op, 1.0, 1.0)
        assert -1e-9 <= det <= 1.0 + 1e-6


class TestIndependenceDefect:
    def test_exact_zeros(self):
        assert independence_defect_det(40, [BULK, EDGE_PLUS], z=0.0) == 0.0
        assert independence_defect_det(40, [BULK]) == 0.0

    def test_decay_with_n(self):
        values = [
            abs(independence_defect_det(n, [BULK, EDGE_PLUS]))
            for n in (50, 100, 200, 400)
        ]
        assert all(b < a for a, b in zip(values, values[1:]))

    def test_complex_lambda(self):
        value = independence_defect_det(30, [BULK, EDGE_PLUS], z=1.0, lam=np.array([0.5 + 0.1j, 1.0]))
        assert abs(value) < 0.05


class TestHadamardBound:
    def test_first_order_trivial(self):
        op = discretize(30, [BULK])
        assert hadamard_bound_check(op, 1.0, 1, seed=0)

    def test_bulk_minors(self):
        op = discretize(50, [BULK])
        assert all(hadamard_bound_check(op, 1.0, 3, seed=s) for s in range(50))

    def test_mixed_window_minors(self):
        op = discretize(50, [EDGE_MINUS, BULK, EDGE_PLUS])
        lam = np.array([1.0, -0.5, 2.0])
        assert all(hadamard_bound_check(op, lam, 5, seed=s) for s in range(50))

    def test_order_validation(self):
        op = discretize(20, [BULK], 8)
        with pytest.raises(ValueError):
            hadamard_bound_check(op, 1.0, 9)


class TestBruteForce:
    def test_single_point_mass_n1(self):
        window = raw(1, -1.0, 0.5)
        dist = brute_force_joint_pmf(1, [window])
        # independent one-dimensional quadrature of the spectral density
        rule = gauss_legendre(400, (-1.0, 0.5))
        from gue_spectra.kernels import gue_kernel
        expected = rule.integrate(gue_kernel(1, rule.nodes, rule.nodes))
        assert dist.joint[1] == pytest.approx(expected, abs=1e-8)
        contour = counting_joint_pmf(1, [window], lmax=1, m=40)
        assert np.max(np.abs(dist.joint[:2] - contour.joint)) < 1e-8

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_total_mass(self, n):
        dist = brute_force_joint_pmf(n, [raw(1, -1.0, 0.0), raw(2, 0.5, 1.5)])
        assert dist.meta["total_mass"] == pytest.approx(1.0, abs=1e-6)

    def test_rejects_large_n(self):
        with pytest.raises(ValueError):
            brute_force_joint_pmf(4, [raw(1, -1.0, 1.0)])

    def test_gamma_identity_n2(self):
        windows = [raw(1, -1.0, 0.0), raw(2, 0.5, 1.5)]
        op = discretize(2, windows, 40)
        rng = np.random.default_rng(17)
        for _ in range(5):
            lam = rng.uniform(-1.5, 1.5, 2)
            direct = brute_force_gamma(2, windows, lam)
            assert fredholm_det(op, 1.0, lam) == pytest.approx(direct, abs=1e-6)

    def test_gamma_identity_n3(self):
        windows = [raw(1, -1.0, 0.0), raw(2, 0.5, 1.5)]
        op = discretize(3, windows, 40)
        lam = np.array([0.8, -0.6])
        assert fredholm_det(op, 1.0, lam) == pytest.approx(
            brute_force_gamma(3, windows, lam), abs=1e-6)


class TestIteratedKernel:
    def test_block_sups_bounded_by_power_law(self):
        # sup of |S|^(k) over window i x i divided by n^kappa_i must admit
        # a fixed geometric envelope beta^k across the n grid
        for n in (100, 200, 400):
            op = discretize(n, [BULK, EDGE_PLUS])
            sups = iterated_kernel_sups(op, np.array([1.0, 1.0]), 4)
            for i, w in enumerate(op.windows):
                ratios = sups[:, i, i] / n ** w.kappa
                assert np.all(ratios < 0.75 ** np.arange(1, 5) * 2.0)

    def test_pmf_level_defect_decreases(self):
        windows = [EDGE_MINUS, BULK, EDGE_PLUS]
        defects = [
            counting_joint_pmf(n, windows, lmax=2, m=16).max_defect(2)
            for n in (50, 100)
        ]
        assert defects[1] < defects[0]
