"""Transition matrices, spectral gaps, mixing bounds, and scaling fits."""

import math
import warnings

import numpy as np
import pytest

import isinglab as il
from isinglab import spectral
from isinglab.errors import ReducibleChainWarning, ResourceLimitError


def metropolis_reversible_matrix(dim, seed):
    """Random reversible row-stochastic matrix via Metropolis on random energies."""
    rng = np.random.default_rng(seed)
    e = rng.standard_normal(dim)
    Q = np.full((dim, dim), 1.0 / dim)
    A = np.exp(np.minimum(0.0, e[:, None] - e[None, :]))
    P = Q * A
    np.fill_diagonal(P, P.diagonal() + 1.0 - P.sum(axis=1))
    mu = np.exp(-e)
    return P, mu / mu.sum()


def power_iteration_subdominant(P, mu, iterations=20_000, seed=0):
    """Oracle: deflated power iteration on the mu-symmetrized matrix."""
    root = np.sqrt(mu)
    S = (root[:, None] / root[None, :]) * P  # similar to P, symmetric for reversible P
    lead = root / np.linalg.norm(root)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(P.shape[0])
    v -= (v @ lead) * lead
    v /= np.linalg.norm(v)
    value = 0.0
    for _ in range(iterations):
        w = S @ v
        w -= (w @ lead) * lead
        norm = np.linalg.norm(w)
        if norm == 0:
            return 0.0
        value = norm
        v = w / norm
    return value


class TestClassicalMatrices:
    def test_uniform_infinite_temperature(self):
        inst = il.generate_instance(5, "fully_connected", 1)
        tm = il.build_P_classical(inst, "uniform", 1e9)
        assert abs(tm.gap - 1.0) < 1e-8
        assert np.allclose(tm.proposal, 1.0 / 32)

    def test_local_two_spin_closed_form(self):
        # n = 2 with no couplings or fields: the 4x4 doubly stochastic flip
        # matrix is periodic between parity classes, eigenvalues {1, 0, 0, -1}
        inst = il.IsingInstance(n=2, couplings=np.zeros((2, 2)), fields=np.zeros(2))
        tm = il.build_P_classical(inst, "local_flip", 3.7)
        eigs = np.sort_complex(tm.eigenvalues)
        assert np.allclose(np.sort(eigs.real), [-1.0, 0.0, 0.0, 1.0], atol=1e-10)
        assert tm.gap == pytest.approx(0.0, abs=1e-10)

    def test_stationarity(self):
        inst = il.generate_instance(6, "fully_connected", 2)
        dist = il.exact_distribution(inst, 1.0)
        for kind in ("uniform", "local_flip"):
            tm = il.build_P_classical(inst, kind, 1.0)
            assert spectral.stationarity_deviation(tm, dist.probabilities) < 1e-10
            assert spectral.detailed_balance_violation(tm, dist.probabilities) < 1e-10

    def test_row_stochastic(self):
        inst = il.generate_instance(6, "fully_connected", 3)
        tm = il.build_P_classical(inst, "local_flip", 0.8)
        assert np.max(np.abs(tm.transition.sum(axis=1) - 1.0)) < 1e-8

    def test_cap(self):
        inst = il.generate_instance(5, "fully_connected", 4)
        with pytest.raises(ResourceLimitError):
            il.build_P_classical(inst, "uniform", 1.0, cap=4)

    def test_unknown_kind(self):
        inst = il.generate_instance(4, "fully_connected", 5)
        with pytest.raises(ValueError):
            il.build_P_classical(inst, "qemcmc_full", 1.0)


class TestSpectralGap:
    def test_identity_is_reducible(self):
        with pytest.warns(ReducibleChainWarning):
            assert il.spectral_gap(np.eye(8)) == 0.0

    def test_rank_one(self):
        assert il.spectral_gap(np.full((16, 16), 1.0 / 16)) == pytest.approx(1.0, abs=1e-12)

    def test_against_power_iteration(self):
        for seed in (1, 2, 3):
            P, mu = metropolis_reversible_matrix(16, seed)
            sub = power_iteration_subdominant(P, mu)
            assert il.spectral_gap(P) == pytest.approx(1.0 - sub, abs=1e-6)

    def test_exactly_one_unit_eigenvalue(self):
        inst = il.generate_instance(5, "fully_connected", 6)
        tm = il.build_P_classical(inst, "uniform", 1.0)
        unit = np.abs(tm.eigenvalues - 1.0) <= 1e-6
        assert unit.sum() == 1
        assert np.max(np.abs(tm.eigenvalues)) <= 1.0 + 1e-8


class TestRowwiseEstimation:
    def test_paired_symmetry_is_exact(self):
        inst = il.generate_instance(4, "fully_connected", 7)
        for kind, q in (("qemcmc_full", None), ("cg_naive_local_group", 2),
                        ("cg_improved_local_group", 2)):
            strategy = il.make_strategy(kind, q=q)
            tm = il.build_Q_quantum_rowwise(inst, strategy, 1.0, samples_per_row=10, seed=8)
            assert tm.asymmetry == 0.0
            assert np.array_equal(tm.proposal, tm.proposal.T)

    def test_independent_mode_asymmetry_shrinks(self):
        inst = il.generate_instance(3, "fully_connected", 9)
        strategy = il.make_strategy("cg_improved_local_group", q=2)
        small = il.build_Q_quantum_rowwise(
            inst, strategy, 1.0, samples_per_row=10, seed=10, paired=False
        )
        large = il.build_Q_quantum_rowwise(
            inst, strategy, 1.0, samples_per_row=400, seed=11, paired=False
        )
        assert large.asymmetry < small.asymmetry
        assert large.asymmetry > 0.0

    def test_zero_coupling_product_closed_form(self):
        # pinned hyperparameters and a zero Hamiltonian give an exact product
        # matrix with per-qubit eigenvalues {1, 2c - 1}, c = cos^2(gamma t)
        inst = il.IsingInstance(n=4, couplings=np.zeros((4, 4)), fields=np.zeros(4))
        gamma, t = 0.4, 6
        strategy = il.make_strategy("qemcmc_full", gamma_range=(gamma, gamma), t_range=(t, t))
        tm = il.build_Q_quantum_rowwise(inst, strategy, 1.0, samples_per_row=3, seed=12)
        c = math.cos(gamma * t) ** 2
        single = np.array([[c, 1 - c], [1 - c, c]])
        expected = single
        for _ in range(3):
            expected = np.kron(expected, single)
        assert np.max(np.abs(tm.proposal - expected)) < 1e-10
        assert tm.gap == pytest.approx(1.0 - abs(2 * c - 1.0), abs=1e-8)

    def test_independent_estimates_agree(self):
        # two 200-sample estimates agree within 3 combined bootstrap sigmas
        inst = il.generate_instance(4, "fully_connected", 13)
        strategy = il.make_strategy("qemcmc_full")

        def estimate(seed):
            tm = il.build_Q_quantum_rowwise(
                inst, strategy, 1.0, samples_per_row=200, seed=seed, keep_samples=True
            )
            stack = np.stack(tm.samples)
            rng = np.random.default_rng(seed + 1000)
            gaps = []
            for _ in range(40):
                pick = rng.integers(0, 200, size=200)
                Q = stack[pick].mean(axis=0)
                gaps.append(spectral.transition_from_proposal(
                    inst, 0.5 * (Q + Q.T), 1.0, "boot").gap)
            return tm.gap, float(np.std(gaps, ddof=1))

        g1, s1 = estimate(14)
        g2, s2 = estimate(15)
        assert abs(g1 - g2) <= 3.0 * math.hypot(s1, s2)

    def test_detailed_balance_below_noise_floor(self):
        inst = il.generate_instance(4, "fully_connected", 16)
        dist = il.exact_distribution(inst, 1.0)
        strategy = il.make_strategy("cg_improved_local_group", q=2)
        tm = il.build_Q_quantum_rowwise(
            inst, strategy, 1.0, samples_per_row=30, seed=17, keep_samples=True
        )
        violation = spectral.detailed_balance_violation(tm, dist.probabilities)
        floor = spectral.detailed_balance_noise_floor(tm, inst, dist.probabilities, seed=18)
        assert violation <= floor

    def test_rejects_multi_group(self):
        inst = il.generate_instance(4, "fully_connected", 18)
        with pytest.raises(ValueError):
            il.build_Q_quantum_rowwise(inst, il.make_strategy("cg_multiple_groups", q=2), 1.0)


class TestBruteForceEstimation:
    def test_rows_sum_to_one(self):
        inst = il.generate_instance(4, "fully_connected", 19)
        strategy = il.make_strategy("cg_multiple_groups", q=2)
        tm = il.build_Q_quantum_bruteforce(inst, strategy, 1.0, seed=20)
        assert np.max(np.abs(tm.proposal.sum(axis=1) - 1.0)) < 1e-12
        assert tm.n_samples == (2**4) ** 2  # default (2^n)^2

    def test_asymmetry_reported(self):
        inst = il.generate_instance(4, "fully_connected", 21)
        strategy = il.make_strategy("cg_multiple_groups", q=2)
        tm = il.build_Q_quantum_bruteforce(inst, strategy, 1.0, seed=22)
        assert tm.asymmetry > 0.0

    def test_cross_estimator_consistency(self):
        # q = n multi-group degenerates to the improved single group; the two
        # estimators must agree within combined Monte-Carlo error
        inst = il.generate_instance(4, "fully_connected", 23)
        multi = il.make_strategy("cg_multiple_groups", q=4)
        single = il.make_strategy("cg_improved_local_group", q=4)
        brute_gaps = [
            il.build_Q_quantum_bruteforce(inst, multi, 1.0, n_samples=20_000, seed=s).gap
            for s in (24, 25, 26)
        ]
        row_gaps = [
            il.build_Q_quantum_rowwise(inst, single, 1.0, samples_per_row=60, seed=s).gap
            for s in (27, 28, 29)
        ]
        spread = math.hypot(np.std(brute_gaps, ddof=1), np.std(row_gaps, ddof=1))
        assert abs(np.mean(brute_gaps) - np.mean(row_gaps)) <= 4.0 * max(spread, 1e-3)

    def test_sample_scaling(self):
        # doubling the sample count shrinks the gap standard error by ~sqrt(2)
        inst = il.generate_instance(5, "fully_connected", 30)
        strategy = il.make_strategy("cg_multiple_groups", q=2)
        small = [
            il.build_Q_quantum_bruteforce(inst, strategy, 1.0, n_samples=2_000, seed=40 + s).gap
            for s in range(14)
        ]
        large = [
            il.build_Q_quantum_bruteforce(inst, strategy, 1.0, n_samples=4_000, seed=80 + s).gap
            for s in range(14)
        ]
        ratio = np.std(small, ddof=1) / np.std(large, ddof=1)
        assert 1.0 < ratio < 2.1

    def test_quantum_beats_classical_at_low_temperature(self):
        # ensemble average ordering in the low-temperature regime
        gaps_u, gaps_l = [], []
        for seed in range(12):
            inst = il.generate_instance(5, "fully_connected", 100 + seed)
            gaps_u.append(il.build_P_classical(inst, "uniform", 0.3).gap)
            gaps_l.append(il.build_P_classical(inst, "local_flip", 0.3).gap)
        assert np.mean(gaps_u) > np.mean(gaps_l)


class TestThermalisationBounds:
    def test_unit_gap_lower_bound_zero(self):
        b = il.thermalisation_bounds(1.0, 0.05, 0.01)
        assert b.lower == 0.0

    def test_hand_computed(self):
        b = il.thermalisation_bounds(0.5, 0.25, 0.25)
        assert b.lower == pytest.approx(math.log(2.0), abs=1e-12)
        assert b.upper == pytest.approx(2.0 * math.log(16.0), abs=1e-12)

    def test_domain_validation(self):
        with pytest.raises(ValueError):
            il.thermalisation_bounds(0.0, 0.1, 0.1)
        with pytest.raises(ValueError):
            il.thermalisation_bounds(0.5, 0.6, 0.1)
        with pytest.raises(ValueError):
            il.thermalisation_bounds(0.5, 0.1, 0.0)

    def test_measured_mixing_within_bounds(self):
        for seed in (31, 32):
            inst = il.generate_instance(4, "fully_connected", seed)
            dist = il.exact_distribution(inst, 1.0)
            tm = il.build_P_classical(inst, "local_flip", 1.0)
            bounds = il.thermalisation_bounds(tm.gap, 0.05, dist.min_probability)
            tau = spectral.worst_start_mixing_steps(
                tm.transition, dist.probabilities, 0.05, max_steps=200_000
            )
            assert bounds.lower <= tau <= bounds.upper


class TestInterpolation:
    def test_integral_root_passthrough(self):
        assert il.interpolate_sqrt_n_gap({2: (0.3, 0.05)}, 4) == (0.3, 0.05)
        assert il.interpolate_sqrt_n_gap({3: (0.2, 0.01)}, 9) == (0.2, 0.01)

    def test_equal_endpoints(self):
        mean, err = il.interpolate_sqrt_n_gap({2: (0.4, 0.0), 3: (0.4, 0.0)}, 6)
        assert mean == pytest.approx(0.4)

    def test_hand_propagated_example(self):
        mean, err = il.interpolate_sqrt_n_gap({2: (0.2, 0.01), 3: (0.4, 0.02)}, 8)
        w = math.sqrt(8) - 2
        assert mean == pytest.approx(0.2 + w * 0.2, abs=1e-12)
        assert err == pytest.approx(math.hypot((1 - w) * 0.01, w * 0.02), abs=1e-12)

    def test_missing_bracket(self):
        with pytest.raises(ValueError):
            il.interpolate_sqrt_n_gap({2: (0.2, 0.01)}, 8)


class TestScalingFit:
    def test_exact_recovery(self):
        pts = [(n, 0.8 * 2 ** (-0.5 * n), 0.0) for n in range(4, 10)]
        fit = il.fit_scaling(pts)
        assert fit.exponent == pytest.approx(0.5, abs=1e-10)
        assert fit.prefactor == pytest.approx(0.8, abs=1e-10)

    def test_bootstrap_with_noise(self):
        rng = np.random.default_rng(33)
        estimates = []
        for _ in range(100):
            pts = [
                (n, 0.8 * 2 ** (-0.5 * n) * (1 + 0.05 * rng.standard_normal()),
                 0.05 * 0.8 * 2 ** (-0.5 * n))
                for n in range(4, 10)
            ]
            estimates.append(il.fit_scaling(pts).exponent)
        assert abs(np.mean(estimates) - 0.5) <= 3.0 * np.std(estimates, ddof=1)

    def test_vertical_shift_leaves_slope(self):
        pts = [(n, 0.8 * 2 ** (-0.5 * n), 0.01 * 2 ** (-0.5 * n)) for n in range(4, 10)]
        halved = [(n, g / 2, e / 2) for n, g, e in pts]
        assert il.fit_scaling(halved).exponent == pytest.approx(
            il.fit_scaling(pts).exponent, abs=1e-10
        )
        assert il.fit_scaling(halved).prefactor == pytest.approx(
            il.fit_scaling(pts).prefactor / 2, rel=1e-10
        )

    def test_degenerate_rejected(self):
        with pytest.raises(ValueError):
            il.fit_scaling([(4, 0.5, 0.0), (4, 0.4, 0.0), (4, 0.3, 0.0)])


class TestEnhancementFactor:
    def test_reference_values(self):
        assert il.quantum_enhancement_factor(0.50, 0.92) == pytest.approx(1.84)
        assert il.quantum_enhancement_factor(0.335, 0.92) == pytest.approx(2.746, abs=0.01)
        assert il.quantum_enhancement_factor(0.7, 0.7) == 1.0

    def test_validation(self):
        with pytest.raises(ValueError):
            il.quantum_enhancement_factor(0.0, 1.0)
