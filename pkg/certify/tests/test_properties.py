"""Cross-module properties of the empirical bounds."""
import numpy as np
import pytest

from certify.bounds.report import compute_bound_report
from certify.constants import DIS, TND
from certify.data.service import split_unlabeled
from certify.data.synthetic import IndependentErrors, make_blobs_dataset
from certify.domain import LossStats
from certify.forest.service import train_forest
from certify.losses.service import compute_loss_stats, prediction_matrix


def bagged_stats(oracle, n: int, m: int) -> LossStats:
    """Plug-in statistics at the oracle values with the validation-set sizes of a fully bagged forest on n points."""
    return LossStats(
        gibbs=oracle.gibbs,
        tandem=oracle.tandem,
        disagreement=oracle.disagreement,
        n_min_first=int(n * np.exp(-1.0)),
        n_min_pair=int(n * np.exp(-2.0)),
        m_min=m,
        n_classes=2,
    )


class TestUnlabeledDisagreement:
    def setup_method(self):
        self.oracle = IndependentErrors(10, 0.3).oracle()

    def report(self, n, m):
        return compute_bound_report(bagged_stats(self.oracle, n, m), bounds=[TND, DIS])

    def test_quadratic_unlabeled_pool_beats_the_tandem_bound(self):
        report = self.report(500, 500**2)
        assert report.value(DIS) < report.value(TND)

    def test_linear_unlabeled_pool_loses_the_advantage(self):
        report = self.report(500, 500)
        assert report.value(TND) - report.value(DIS) < 0.02

    def test_gap_grows_with_the_pool(self):
        gaps = [self.report(500, m).value(TND) - self.report(500, m).value(DIS) for m in (500, 5000, 50000, 250000)]
        assert gaps == sorted(gaps)

    def test_unlabeled_pool_does_not_change_tnd(self):
        assert self.report(500, 500).value(TND) == pytest.approx(self.report(500, 250000).value(TND))


class TestUnlabeledPoolOnForest:
    n = 200

    @pytest.fixture(scope="class")
    def forest_and_pool(self):
        data = make_blobs_dataset(self.n + self.n**2, 4, separation=1.0, label_noise=0.1, seed=13)
        labeled, pool = split_unlabeled(data, self.n / data.n_samples, seed=5)
        ensemble = train_forest(labeled, 10, seed=6)
        return ensemble, labeled, pool

    def stats(self, ensemble, labeled, pool):
        pm = prediction_matrix(ensemble, labeled.features, labeled.labels)
        return compute_loss_stats(pm, ensemble.oob_masks, prediction_matrix(ensemble, pool))

    def test_quadratic_pool_tightens_the_disagreement_bound(self, forest_and_pool):
        ensemble, labeled, pool = forest_and_pool
        small = self.stats(ensemble, labeled, pool[:labeled.n_samples])
        large = self.stats(ensemble, labeled, pool)
        assert small.m_min == labeled.n_samples
        assert large.m_min == pool.shape[0] >= labeled.n_samples**2 // 2

        np.testing.assert_array_equal(small.gibbs, large.gibbs)
        np.testing.assert_array_equal(small.tandem, large.tandem)
        small_report = compute_bound_report(small, bounds=[TND, DIS])
        large_report = compute_bound_report(large, bounds=[TND, DIS])
        assert large_report.value(TND) == small_report.value(TND)
        assert large_report.value(DIS) < small_report.value(DIS)
