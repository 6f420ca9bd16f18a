import math

import numpy as np
import pytest

from certify.bounds.service import (
    c1_bound,
    c2_bound,
    ctd_bound,
    dis_bound,
    fo_bound,
    kl_bernoulli,
    kl_inv_lower,
    kl_inv_upper,
    oracle_bounds,
    tnd_bound,
)
from certify.constants import C1, C2, CTD, DIS, FO, TND
from certify.data.synthetic import DisjointErrors, IndependentErrors
from certify.domain import OracleStats
from certify.exceptions import InvalidConfigError, UnsupportedTaskError
from certify.losses.service import aggregate_pair, compute_loss_stats, oracle_stats
from certify.optimize.service import optimal_lambda


def random_realizable_stats(rng, max_size=8, max_points=12):
    """Exact statistics of a random finite population of binary hypotheses."""
    size = int(rng.integers(2, max_size + 1))
    points = int(rng.integers(2, max_points + 1))
    mass = rng.dirichlet(np.ones(points))
    errors = (rng.random((size, points)) < rng.uniform(0.05, 0.45)).astype(np.float64)
    risks = errors @ mass
    tandem = (errors * mass) @ errors.T
    np.fill_diagonal(tandem, risks)
    return oracle_stats(risks, tandem, n_classes=2)


class TestKlBernoulli:

    def test_identical_arguments(self):
        assert kl_bernoulli(0.5, 0.5) == 0.0

    def test_zero_mean_closed_form(self):
        assert kl_bernoulli(0.0, 0.3) == pytest.approx(-math.log(0.7), abs=1e-15)

    def test_direct_formula(self):
        expected = 0.1 * math.log(0.1 / 0.3) + 0.9 * math.log(0.9 / 0.7)
        assert kl_bernoulli(0.1, 0.3) == pytest.approx(expected, rel=1e-12)

    def test_boundary_mismatch_is_infinite(self):
        assert kl_bernoulli(0.3, 0.0) == math.inf
        assert kl_bernoulli(0.3, 1.0) == math.inf
        assert kl_bernoulli(1.0, 1.0) == 0.0

    def test_out_of_range(self):
        with pytest.raises(InvalidConfigError):
            kl_bernoulli(1.2, 0.5)


class TestKlInverse:

    def test_zero_budget_returns_mean(self):
        assert kl_inv_upper(0.37, 0.0) == 0.37
        assert kl_inv_lower(0.37, 0.0) == 0.37

    def test_upper_from_zero_closed_form(self):
        for eps in (0.01, 0.3, 2.0):
            assert kl_inv_upper(0.0, eps) == pytest.approx(1.0 - math.exp(-eps), abs=1e-11)

    def test_lower_from_one_closed_form(self):
        for eps in (0.01, 0.3, 2.0):
            assert kl_inv_lower(1.0, eps) == pytest.approx(math.exp(-eps), abs=1e-11)

    def test_upper_matches_grid_scan(self):
        grid = np.linspace(0.2, 1.0, 10**6, endpoint=False)
        values = 0.2 * np.log(0.2 / grid) + 0.8 * np.log(0.8 / (1.0 - grid))
        scan = grid[values <= 0.0599].max()
        result = kl_inv_upper(0.2, 0.0599)
        assert result == pytest.approx(scan, abs=1e-6)
        assert kl_bernoulli(0.2, result) == pytest.approx(0.0599, abs=1e-9)

    def test_residuals_on_random_inputs(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            p = float(rng.random())
            eps = float(rng.uniform(0.0, 5.0))
            upper = kl_inv_upper(p, eps)
            lower = kl_inv_lower(p, eps)
            assert p <= upper <= 1.0
            assert 0.0 <= lower <= p
            for q in (upper, lower):
                assert kl_bernoulli(p, q) <= eps + 1e-15
                if 1e-2 < q < 0.99:
                    assert kl_bernoulli(p, q) >= eps - 1e-9

    def test_monotone_in_budget(self):
        budgets = np.linspace(0.0, 3.0, 40)
        uppers = [kl_inv_upper(0.3, eps) for eps in budgets]
        lowers = [kl_inv_lower(0.3, eps) for eps in budgets]
        assert all(b >= a for a, b in zip(uppers, uppers[1:]))
        assert all(b <= a for a, b in zip(lowers, lowers[1:]))

    def test_saturation(self):
        assert kl_inv_upper(1.0, 0.5) == 1.0
        assert kl_inv_lower(0.0, 0.5) == 0.0

    def test_negative_budget(self):
        with pytest.raises(InvalidConfigError):
            kl_inv_upper(0.3, -0.1)


class TestFirstOrderBound:

    def test_kl_form(self):
        entry = fo_bound(0.2, 0.0, 100, 0.05)
        assert entry.name == FO
        assert entry.value == pytest.approx(2 * kl_inv_upper(0.2, math.log(400) / 100), abs=1e-10)
        assert entry.delta_allocation == [0.05]
        assert not entry.exceeds_one

    def test_vanishes_with_many_samples(self):
        assert fo_bound(0.0, 0.0, 10**9, 0.05).value < 1e-6

    def test_lambda_form_relaxes_kl_form(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            gibbs = float(rng.uniform(0.0, 0.6))
            kl = float(rng.uniform(0.0, 3.0))
            n = int(rng.integers(10, 5000))
            kl_term = kl + math.log(2 * math.sqrt(n) / 0.05)
            best = optimal_lambda(gibbs, n, kl_term)
            exact = fo_bound(gibbs, kl, n, 0.05).value
            for lam in (best, float(rng.uniform(0.01, 1.99))):
                assert fo_bound(gibbs, kl, n, 0.05, form="lambda", lam=lam).value >= exact - 1e-12

    @pytest.mark.parametrize("lam", [0.0, 2.0, -1.0])
    def test_lambda_out_of_range(self, lam):
        with pytest.raises(InvalidConfigError):
            fo_bound(0.2, 0.0, 100, 0.05, form="lambda", lam=lam)

    def test_lambda_form_needs_lambda(self):
        with pytest.raises(InvalidConfigError):
            fo_bound(0.2, 0.0, 100, 0.05, form="lambda")

    @pytest.mark.parametrize("delta", [0.0, 1.0, 1.5])
    def test_invalid_delta(self, delta):
        with pytest.raises(InvalidConfigError):
            fo_bound(0.2, 0.0, 100, delta)


class TestTandemBound:

    def test_zero_tandem_closed_form(self):
        n, delta = 500, 0.05
        expected = 4 * (1 - (delta / (2 * math.sqrt(n))) ** (1 / n))
        assert tnd_bound(0.0, 0.0, n, delta).value == pytest.approx(expected, abs=1e-10)

    def test_kl_enters_twice(self):
        tandem = tnd_bound(0.1, 0.5, 300, 0.05).value
        first_order = fo_bound(0.1, 1.0, 300, 0.05).value
        assert tandem == pytest.approx(2 * first_order, rel=1e-10)

    def test_kl_rounding_noise_reads_as_zero(self):
        entry = tnd_bound(0.1, -5.551115123125782e-17, 1000, 0.05)
        assert entry.value == tnd_bound(0.1, 0.0, 1000, 0.05).value
        assert entry.inputs["kl"] == 0.0

    @pytest.mark.parametrize("kl", [-1e-6, math.inf, math.nan])
    def test_invalid_kl(self, kl):
        with pytest.raises(InvalidConfigError):
            tnd_bound(0.1, kl, 1000, 0.05)

    def test_lambda_form_at_optimal_lambda(self):
        n, delta = 1000, 0.05
        lam = optimal_lambda(0.1, n, math.log(2 * math.sqrt(n) / delta))
        assert lam == pytest.approx(0.3132, abs=1e-4)
        assert tnd_bound(0.1, 0.0, n, delta, form="lambda", lam=lam).value == pytest.approx(0.582, abs=1e-3)

    def test_lambda_form_relaxes_kl_form(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            tandem = float(rng.uniform(0.0, 0.4))
            kl = float(rng.uniform(0.0, 2.0))
            n = int(rng.integers(10, 3000))
            lam = float(rng.uniform(0.01, 1.99))
            relaxed = tnd_bound(tandem, kl, n, 0.05, form="lambda", lam=lam).value
            assert relaxed >= tnd_bound(tandem, kl, n, 0.05).value - 1e-12


class TestDisagreementBound:

    def test_zero_disagreement(self):
        n = 400
        entry = dis_bound(0.2, 0.0, 0.0, n, n, 0.05)
        expected = 4 * kl_inv_upper(0.2, math.log(4 * math.sqrt(n) / 0.05) / n)
        assert entry.value == pytest.approx(expected, abs=1e-10)
        assert entry.value >= fo_bound(0.2, 0.0, n, 0.05).value
        assert entry.delta_allocation == [0.025, 0.025]

    def test_huge_unlabeled_pool(self):
        n = 1000
        upper = kl_inv_upper(0.2, math.log(4 * math.sqrt(n) / 0.05) / n)
        value = dis_bound(0.2, 0.3, 0.0, n, 10**12, 0.05).value
        assert value == pytest.approx(4 * upper - 2 * 0.3, abs=1e-5)

    def test_floored_at_zero(self):
        assert dis_bound(0.0, 0.5, 0.0, 10**12, 10**12, 0.05).value == 0.0

    def test_multiclass_rejected(self):
        with pytest.raises(UnsupportedTaskError):
            dis_bound(0.2, 0.3, 0.0, 100, 100, 0.05, n_classes=3)

    def test_lambda_form_relaxes_kl_form(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            gibbs = float(rng.uniform(0.0, 0.5))
            dis = float(rng.uniform(0.0, 0.5))
            kl = float(rng.uniform(0.0, 2.0))
            n, m = int(rng.integers(10, 3000)), int(rng.integers(10, 10**5))
            lam = float(rng.uniform(0.01, 1.99))
            gamma = float(rng.uniform(0.01, 3.0))
            relaxed = dis_bound(gibbs, dis, kl, n, m, 0.05, form="lambda", lam=lam, gamma=gamma).value
            assert relaxed >= dis_bound(gibbs, dis, kl, n, m, 0.05).value - 1e-12

    def test_lambda_form_without_gamma_drops_disagreement(self):
        with_gamma = dis_bound(0.2, 0.3, 0.0, 500, 10**6, 0.05, form="lambda", lam=0.5, gamma=0.1).value
        without = dis_bound(0.2, 0.3, 0.0, 500, 10**6, 0.05, form="lambda", lam=0.5).value
        assert without > with_gamma

    def test_nonpositive_gamma(self):
        with pytest.raises(InvalidConfigError):
            dis_bound(0.2, 0.3, 0.0, 500, 500, 0.05, form="lambda", lam=0.5, gamma=0.0)


class TestCTandemBound:

    def test_vacuous_when_gibbs_upper_reaches_half(self):
        entry = ctd_bound(0.45, 0.3, 0.0, 50, 50, 0.05)
        assert entry.vacuous
        assert entry.value == math.inf
        assert entry.exceeds_one
        assert entry.to_dict()["exceeds_one"] is True

    def test_zero_when_numerator_vanishes(self):
        assert ctd_bound(0.25, 0.0, 0.0, 10**12, 10**12, 0.05).value == 0.0

    def test_approaches_oracle_value(self):
        value = ctd_bound(0.3, 0.111, 0.0, 10**12, 10**12, 0.05).value
        assert value == pytest.approx((0.111 - 0.09) / (0.111 - 0.3 + 0.25), abs=1e-4)

    def test_plug_ins_are_recorded(self):
        entry = ctd_bound(0.2, 0.1, 0.0, 1000, 800, 0.05)
        assert entry.delta_allocation == [0.025, 0.025]
        assert entry.inputs["gibbs_lower"] <= 0.2 <= entry.inputs["gibbs_upper"]
        assert entry.inputs["tandem_upper"] >= 0.1

    def test_tighter_than_single_denominator_composition(self):
        entry = ctd_bound(0.2, 0.08, 0.0, 400, 150, 0.05)
        lower, upper = entry.inputs["gibbs_lower"], entry.inputs["gibbs_upper"]
        tandem_upper = entry.inputs["tandem_upper"]
        single = (tandem_upper - lower**2) / (tandem_upper - upper + 0.25)
        assert entry.value == pytest.approx(0.784, abs=1e-3)
        assert single == pytest.approx(1.107, abs=5e-3)

    def test_never_above_single_denominator_composition(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            gibbs = float(rng.uniform(0.0, 0.35))
            tandem = float(rng.uniform(gibbs**2, gibbs))
            n_first, n_pair = int(rng.integers(200, 5000)), int(rng.integers(100, 5000))
            entry = ctd_bound(gibbs, tandem, float(rng.uniform(0.0, 1.0)), n_first, n_pair, 0.05)
            if entry.vacuous or entry.value == 0.0:
                continue
            lower, upper = entry.inputs["gibbs_lower"], entry.inputs["gibbs_upper"]
            tandem_upper = entry.inputs["tandem_upper"]
            denominator = tandem_upper - upper + 0.25
            if denominator <= 0.0:
                continue
            assert entry.value <= (tandem_upper - lower**2) / denominator + 1e-12


class TestCBounds:

    def test_c1_approaches_oracle(self):
        assert c1_bound(0.25, 0.0, 0.0, 10**12, 10**12, 0.05).value == pytest.approx(0.75, abs=1e-4)

    def test_c1_floor_when_gibbs_upper_crosses_half(self):
        entry = c1_bound(0.6, 0.2, 0.0, 1000, 1000, 0.05)
        assert entry.value == 1.0
        assert not entry.vacuous

    def test_c1_vacuous_denominator(self):
        entry = c1_bound(0.3, 0.6, 0.0, 10**6, 10**6, 0.05)
        assert entry.vacuous
        assert entry.value == math.inf

    def test_c2_splits_delta_in_three(self):
        entry = c2_bound(0.1, 0.2, 0.0, 500, 500, 0.06)
        assert entry.delta_allocation == pytest.approx([0.02, 0.02, 0.02])
        assert entry.inputs["disagreement_lower"] <= 0.2 <= entry.inputs["disagreement_upper"]

    def test_binary_only(self):
        with pytest.raises(UnsupportedTaskError):
            c1_bound(0.2, 0.3, 0.0, 100, 100, 0.05, n_classes=4)
        with pytest.raises(UnsupportedTaskError):
            c2_bound(0.2, 0.3, 0.0, 100, 100, 0.05, n_classes=4)


class TestOracleBounds:

    def test_disjoint_errors_best_case(self):
        bounds = oracle_bounds(DisjointErrors(4).oracle())
        assert bounds[FO].value == 0.5
        assert bounds[TND].value == 0.25
        assert bounds[CTD].value == 0.0

    def test_identical_hypotheses_worst_case(self):
        risks = np.full(5, 0.3)
        bounds = oracle_bounds(oracle_stats(risks, np.full((5, 5), 0.3)))
        assert bounds[TND].value == pytest.approx(2 * bounds[FO].value, abs=1e-12)
        assert bounds[CTD].value == pytest.approx(0.84, abs=1e-12)

    def test_independent_errors(self):
        bounds = oracle_bounds(IndependentErrors(10, 0.3).oracle())
        assert bounds[FO].value == pytest.approx(0.6, abs=1e-12)
        assert bounds[TND].value == pytest.approx(0.444, abs=1e-12)

    def test_c_bounds_coincide_on_binary_populations(self):
        rng = np.random.default_rng(4)
        checked = 0
        while checked < 500:
            stats = random_realizable_stats(rng)
            rho = rng.dirichlet(np.ones(stats.size))
            if rho @ stats.gibbs >= 0.45:
                continue
            bounds = oracle_bounds(stats, rho)
            assert bounds[C1].value == pytest.approx(bounds[CTD].value, abs=1e-12)
            assert bounds[C2].value == pytest.approx(bounds[CTD].value, abs=1e-12)
            checked += 1

    def test_ctd_never_exceeds_tnd(self):
        rng = np.random.default_rng(5)
        gibbs = rng.uniform(0.0, 0.5, size=10**4)
        tandem = rng.uniform(gibbs**2, gibbs)
        violations = 0
        for g, t in zip(gibbs, tandem):
            bounds = oracle_bounds(OracleStats(np.array([g]), np.array([[t]])))
            if bounds[CTD].value > bounds[TND].value + 1e-12:
                violations += 1
        assert violations == 0

    def test_first_order_dominates_half_tandem(self):
        rng = np.random.default_rng(6)
        for _ in range(100):
            bounds = oracle_bounds(random_realizable_stats(rng))
            assert bounds[TND].value <= 2 * bounds[FO].value + 1e-12

    def test_dis_equals_tnd_on_binary_populations(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            stats = random_realizable_stats(rng)
            rho = rng.dirichlet(np.ones(stats.size))
            bounds = oracle_bounds(stats, rho)
            assert bounds[DIS].value == pytest.approx(bounds[TND].value, abs=1e-12)

    def test_multiclass_skips_binary_only_bounds(self):
        stats = oracle_stats([0.2, 0.3], [[0.2, 0.1], [0.1, 0.3]], n_classes=3)
        assert set(oracle_bounds(stats)) == {FO, TND, CTD}

    def test_ctd_vacuous_above_half(self):
        stats = oracle_stats([0.6, 0.6], [[0.6, 0.6], [0.6, 0.6]])
        assert oracle_bounds(stats)[CTD].vacuous


class TestStatisticalValidity:

    def test_tandem_bound_covers_true_risk(self):
        population = IndependentErrors(10, 0.3)
        true_risk = population.mv_risk()
        rng = np.random.default_rng(8)
        covered = 0
        for _ in range(200):
            stats = compute_loss_stats(population.sample(2000, rng))
            tandem = aggregate_pair(stats.tandem, np.full(10, 0.1))
            if tnd_bound(tandem, 0.0, stats.n_min_pair, 0.05).value >= true_risk:
                covered += 1
        assert covered >= 190
