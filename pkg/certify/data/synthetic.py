"""Synthetic datasets and hypothesis populations with known error structure."""
import logging

import numpy as np
from scipy.stats import binom

from certify.domain import Dataset, OracleStats, PredictionMatrix
from certify.exceptions import InvalidConfigError

logger = logging.getLogger('mvcert')


def make_blobs_dataset(
    n: int,
    d: int,
    n_classes: int = 2,
    separation: float = 1.5,
    label_noise: float = 0.0,
    seed: int = 0,
) -> Dataset:
    """
    Gaussian class clusters with unit covariance around random centers.

    Args:
        n (int): Number of samples; classes get n // n_classes samples (+1 for the first n % n_classes).
        d (int): Feature dimension.
        n_classes (int): Number of classes.
        separation (float): Scale of the class centers.
        label_noise (float): Probability of replacing a label by a different random class.
        seed (int): Generator seed.

    Returns:
        Dataset: Samples in shuffled order with labels "0".."c-1".
    """
    if n < n_classes or d < 1 or n_classes < 2:
        raise InvalidConfigError("need n >= n_classes >= 2 and d >= 1")
    if not 0.0 <= label_noise < 1.0:
        raise InvalidConfigError(f"label noise {label_noise} outside [0, 1)")

    rng = np.random.default_rng(seed)
    centers = rng.normal(scale=separation, size=(n_classes, d))
    labels = rng.permutation(np.arange(n) % n_classes)
    features = centers[labels] + rng.normal(size=(n, d))

    flip = rng.random(n) < label_noise
    if flip.any():
        shift = rng.integers(1, n_classes, size=int(flip.sum()))
        labels[flip] = (labels[flip] + shift) % n_classes

    return Dataset(
        features=features,
        labels=labels,
        n_classes=n_classes,
        classes=tuple(str(k) for k in range(n_classes)),
    )


class ErrorPopulation:
    """Binary task where each of M hypotheses errs according to a known law."""

    def __init__(self, size: int, positive_rate: float = 0.5):
        if size < 1:
            raise InvalidConfigError("a population needs at least one hypothesis")
        if not 0.0 <= positive_rate <= 1.0:
            raise InvalidConfigError(f"positive rate {positive_rate} outside [0, 1]")
        self.size = size
        self.positive_rate = positive_rate

    def error_matrix(self, n: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def oracle(self) -> OracleStats:
        raise NotImplementedError

    def mv_risk(self) -> float:
        raise NotImplementedError

    def sample(self, n: int, rng: np.random.Generator) -> PredictionMatrix:
        """Draws n labeled samples; a hypothesis that errs predicts the flipped label."""
        labels = (rng.random(n) < self.positive_rate).astype(np.int64)
        errors = self.error_matrix(n, rng)
        preds = np.where(errors, 1 - labels[np.newaxis, :], labels[np.newaxis, :])
        return PredictionMatrix(preds=preds, labels=labels, n_classes=2)

    def sample_unlabeled(self, m: int, rng: np.random.Generator) -> PredictionMatrix:
        labeled = self.sample(m, rng)
        return PredictionMatrix(preds=labeled.preds, labels=None, n_classes=2)


class IndependentErrors(ErrorPopulation):
    """Every hypothesis errs independently with the same rate."""

    def __init__(self, size: int, rate: float, positive_rate: float = 0.5):
        super().__init__(size, positive_rate)
        if not 0.0 <= rate <= 1.0:
            raise InvalidConfigError(f"error rate {rate} outside [0, 1]")
        self.rate = rate

    def error_matrix(self, n, rng):
        return rng.random((self.size, n)) < self.rate

    def oracle(self) -> OracleStats:
        rate = self.rate
        tandem = np.full((self.size, self.size), rate * rate)
        np.fill_diagonal(tandem, rate)
        disagreement = np.full((self.size, self.size), 2.0 * rate * (1.0 - rate))
        np.fill_diagonal(disagreement, 0.0)
        return OracleStats(
            gibbs=np.full(self.size, rate), tandem=tandem, disagreement=disagreement, n_classes=2
        )

    def mv_risk(self) -> float:
        """Uniform-weight vote risk; a tied vote goes to class 0, wrong when the label is 1."""
        half = self.size / 2.0
        risk = binom.sf(np.floor(half), self.size, self.rate)
        if self.size % 2 == 0:
            risk += binom.pmf(self.size // 2, self.size, self.rate) * self.positive_rate
        return float(risk)


class DisjointErrors(ErrorPopulation):
    """Each sample falls in one of M equally likely regions; only hypothesis h errs in region h."""

    def error_matrix(self, n, rng):
        region = rng.integers(0, self.size, size=n)
        return region[np.newaxis, :] == np.arange(self.size)[:, np.newaxis]

    def oracle(self) -> OracleStats:
        mass = 1.0 / self.size
        tandem = np.diag(np.full(self.size, mass))
        disagreement = np.full((self.size, self.size), 2.0 * mass)
        np.fill_diagonal(disagreement, 0.0)
        return OracleStats(
            gibbs=np.full(self.size, mass), tandem=tandem, disagreement=disagreement, n_classes=2
        )

    def mv_risk(self) -> float:
        if self.size == 1:
            return 1.0
        if self.size == 2:
            # one vote each way on every sample
            return self.positive_rate
        return 0.0
