"""Domain types shared by the data, forest, losses, bounds and optimize packages.

Database-backed entities live in certify.models; everything here is an
in-memory value object over numpy arrays.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from certify.constants import BAGGING_MODES, IRPROP_DELTA_ZERO, PROBABILITY_TOLERANCE
from certify.exceptions import (
    DegenerateDatasetError,
    DimensionMismatchError,
    InvalidConfigError,
    InvalidPosteriorError,
)


@dataclass(eq=False)
class Dataset:
    """Labeled samples with contiguous integer labels 0..n_classes-1."""

    features: np.ndarray
    labels: np.ndarray
    n_classes: int
    classes: tuple = ()

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise DimensionMismatchError("features must be a two-dimensional matrix")
        if self.features.shape[0] < 1:
            raise DegenerateDatasetError("dataset has no samples")
        if self.features.shape[1] < 1:
            raise DegenerateDatasetError("dataset has no features")
        if self.labels.shape != (self.features.shape[0],):
            raise DimensionMismatchError(
                f"{self.labels.shape[0]} labels for {self.features.shape[0]} samples"
            )
        if self.n_classes < 2:
            raise DegenerateDatasetError(
                f"fewer than two classes (found {self.n_classes})"
            )
        if self.labels.min() < 0 or self.labels.max() >= self.n_classes:
            raise DegenerateDatasetError(f"labels outside [0, {self.n_classes - 1}]")
        if self.classes and len(self.classes) != self.n_classes:
            raise DegenerateDatasetError("label map does not cover every class")
        self.classes = tuple(self.classes)

    @property
    def n_samples(self) -> int:
        return int(self.features.shape[0])

    @property
    def feature_count(self) -> int:
        return int(self.features.shape[1])

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)

    def subset(self, indices) -> "Dataset":
        """Rows ``indices`` (in the given order), keeping the class map."""
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(
            features=self.features[indices],
            labels=self.labels[indices],
            n_classes=self.n_classes,
            classes=self.classes,
        )


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float = 0.2
    labeled_fraction: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise InvalidConfigError(f"test fraction {self.test_fraction} outside (0, 1)")
        if not 0.0 < self.labeled_fraction <= 1.0:
            raise InvalidConfigError(f"labeled fraction {self.labeled_fraction} outside (0, 1]")


@dataclass(eq=False)
class Tree:
    """CART tree as parallel node arrays in preorder; leaves have feature == -1."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    label: np.ndarray
    n_features: int
    n_classes: int

    def __post_init__(self):
        self.feature = np.asarray(self.feature, dtype=np.int64)
        self.threshold = np.asarray(self.threshold, dtype=np.float64)
        self.left = np.asarray(self.left, dtype=np.int64)
        self.right = np.asarray(self.right, dtype=np.int64)
        self.label = np.asarray(self.label, dtype=np.int64)

    @property
    def node_count(self) -> int:
        return int(self.feature.shape[0])

    @property
    def leaf_count(self) -> int:
        return int(np.sum(self.feature < 0))


@dataclass(eq=False)
class Ensemble:
    """Trained trees with their out-of-bag masks (True = sample out of bag)."""

    trees: tuple
    oob_masks: np.ndarray
    bagging_mode: str
    seed: int
    tree_seeds: tuple = ()
    dataset_hash: str = ""

    def __post_init__(self):
        self.trees = tuple(self.trees)
        self.oob_masks = np.asarray(self.oob_masks, dtype=bool)
        if not self.trees:
            raise InvalidConfigError("an ensemble needs at least one tree")
        if self.oob_masks.ndim != 2 or self.oob_masks.shape[0] != len(self.trees):
            raise DimensionMismatchError("one out-of-bag mask per tree is required")
        if self.bagging_mode not in BAGGING_MODES:
            raise InvalidConfigError(f"unknown bagging mode {self.bagging_mode!r}")
        self.tree_seeds = tuple(int(s) for s in self.tree_seeds)

    @property
    def size(self) -> int:
        return len(self.trees)

    @property
    def n_samples(self) -> int:
        return int(self.oob_masks.shape[1])

    @property
    def n_features(self) -> int:
        return self.trees[0].n_features

    @property
    def n_classes(self) -> int:
        return self.trees[0].n_classes


@dataclass(eq=False)
class PredictionMatrix:
    """Entry (h, i) is hypothesis h's predicted label for sample i."""

    preds: np.ndarray
    labels: Optional[np.ndarray]
    n_classes: int

    def __post_init__(self):
        self.preds = np.asarray(self.preds, dtype=np.int64)
        if self.preds.ndim != 2:
            raise DimensionMismatchError("predictions must be an M x N matrix")
        if self.preds.size and (self.preds.min() < 0 or self.preds.max() >= self.n_classes):
            raise InvalidConfigError(f"predictions outside [0, {self.n_classes - 1}]")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (self.preds.shape[1],):
                raise DimensionMismatchError("one label per prediction column is required")
            if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
                raise InvalidConfigError(f"labels outside [0, {self.n_classes - 1}]")

    @property
    def n_hypotheses(self) -> int:
        return int(self.preds.shape[0])

    @property
    def n_samples(self) -> int:
        return int(self.preds.shape[1])

    def errors(self) -> np.ndarray:
        """Boolean M x N matrix of 0-1 losses."""
        if self.labels is None:
            raise InvalidConfigError("labels are required to compute losses")
        return self.preds != self.labels[np.newaxis, :]


@dataclass(eq=False)
class Posterior:
    """Weights rho over the hypotheses together with the prior pi."""

    rho: np.ndarray
    pi: np.ndarray

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=np.float64)
        self.pi = np.asarray(self.pi, dtype=np.float64)
        if self.rho.ndim != 1 or self.rho.shape != self.pi.shape:
            raise InvalidPosteriorError("rho and pi must be vectors of equal length")
        for name, weights in (("rho", self.rho), ("pi", self.pi)):
            if np.any(weights < 0) or not np.all(np.isfinite(weights)):
                raise InvalidPosteriorError(f"{name} has negative or non-finite weights")
            if abs(weights.sum() - 1.0) > PROBABILITY_TOLERANCE:
                raise InvalidPosteriorError(f"{name} sums to {weights.sum()!r}, not 1")
        if np.any((self.rho > 0) & (self.pi <= 0)):
            raise InvalidPosteriorError("rho puts mass where pi is zero (infinite KL)")

    @classmethod
    def uniform(cls, size: int) -> "Posterior":
        weights = np.full(size, 1.0 / size)
        return cls(rho=weights, pi=weights.copy())

    @classmethod
    def from_weights(cls, weights, prior=None) -> "Posterior":
        """Normalizes nonnegative ``weights``; the prior defaults to uniform."""
        weights = np.asarray(weights, dtype=np.float64)
        total = weights.sum()
        if total <= 0:
            raise InvalidPosteriorError("weights must have positive mass")
        if prior is None:
            prior = np.full(weights.shape[0], 1.0 / weights.shape[0])
        return cls(rho=weights / total, pi=np.asarray(prior, dtype=np.float64))

    @property
    def size(self) -> int:
        return int(self.rho.shape[0])


@dataclass(eq=False)
class LossStats:
    """Empirical first and second order statistics on out-of-bag sets."""

    gibbs: np.ndarray
    tandem: np.ndarray
    disagreement: np.ndarray
    n_min_first: int
    n_min_pair: int
    m_min: int
    n_classes: int
    oob_sizes: np.ndarray = field(default=None)
    overlap_sizes: np.ndarray = field(default=None)

    def __post_init__(self):
        self.gibbs = np.asarray(self.gibbs, dtype=np.float64)
        self.tandem = np.asarray(self.tandem, dtype=np.float64)
        self.disagreement = np.asarray(self.disagreement, dtype=np.float64)
        size = self.gibbs.shape[0]
        if self.tandem.shape != (size, size) or self.disagreement.shape != (size, size):
            raise DimensionMismatchError("tandem and disagreement must be M x M for M gibbs losses")
        if min(self.n_min_first, self.n_min_pair, self.m_min) < 1:
            raise InvalidConfigError("validation set sizes must be positive")

    @property
    def size(self) -> int:
        return int(self.gibbs.shape[0])

    @property
    def is_binary(self) -> bool:
        return self.n_classes == 2

    def to_dict(self) -> dict:
        payload = {
            "gibbs": self.gibbs,
            "tandem": self.tandem,
            "disagreement": self.disagreement,
            "n_min_first": self.n_min_first,
            "n_min_pair": self.n_min_pair,
            "m_min": self.m_min,
            "n_classes": self.n_classes,
        }
        if self.oob_sizes is not None:
            payload["oob_sizes"] = self.oob_sizes
        return payload


@dataclass(eq=False)
class OracleStats:
    """Exact population quantities: risks, tandem and (binary only) disagreement."""

    gibbs: np.ndarray
    tandem: np.ndarray
    disagreement: Optional[np.ndarray] = None
    n_classes: int = 2

    @property
    def size(self) -> int:
        return int(self.gibbs.shape[0])

    @property
    def is_binary(self) -> bool:
        return self.n_classes == 2


@dataclass(frozen=True)
class BoundConfig:
    """Confidence level and optional PAC-Bayes-lambda parameters of one bound evaluation."""

    delta: float
    lam: Optional[float] = None
    gamma: Optional[float] = None

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise InvalidConfigError(f"delta {self.delta} outside (0, 1)")
        if self.lam is not None and not 0.0 < self.lam < 2.0:
            raise InvalidConfigError(f"lambda {self.lam} outside (0, 2)")
        if self.gamma is not None and not self.gamma > 0.0:
            raise InvalidConfigError(f"gamma {self.gamma} must be positive")


@dataclass
class BoundEntry:
    name: str
    form: str
    value: float
    vacuous: bool = False
    delta_allocation: list = field(default_factory=list)
    inputs: dict = field(default_factory=dict)

    @property
    def exceeds_one(self) -> bool:
        return self.vacuous or self.value > 1.0

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "form": self.form,
            "value": self.value,
            "exceeds_one": self.exceeds_one,
            "vacuous": self.vacuous,
            "delta_allocation": self.delta_allocation,
            "inputs": self.inputs,
        }


@dataclass
class BoundReport:
    entries: dict
    inputs: dict
    provenance: dict = field(default_factory=dict)

    def value(self, name: str) -> float:
        return self.entries[name].value

    def to_dict(self) -> dict:
        return {
            "bounds": {name: entry.to_dict() for name, entry in self.entries.items()},
            "inputs": self.inputs,
            "provenance": self.provenance,
        }


@dataclass
class OptimizerState:
    """iRProp+ state over the softmax parameters rho_tilde."""

    rho_tilde: np.ndarray
    step_sizes: np.ndarray
    previous_gradient: np.ndarray
    lam: float
    gamma: Optional[float] = None
    best_bound: float = np.inf
    stall_counter: int = 0
    previous_value: float = np.inf
    previous_step: Optional[np.ndarray] = None

    @classmethod
    def start(cls, rho_tilde, lam: float = 1.0, gamma: Optional[float] = None, step_size: float = IRPROP_DELTA_ZERO):
        rho_tilde = np.array(rho_tilde, dtype=np.float64)
        return cls(
            rho_tilde=rho_tilde,
            step_sizes=np.full(rho_tilde.shape, step_size),
            previous_gradient=np.zeros_like(rho_tilde),
            lam=lam,
            gamma=gamma,
            previous_step=np.zeros_like(rho_tilde),
        )


@dataclass
class OptimizeResult:
    bound: str
    posterior: Posterior
    lam: float
    gamma: Optional[float]
    trace: list
    iterations: int
    inner_iterations: int
    converged: bool
    initial_lambda_bound: float
    final_lambda_bound: float
    final_kl_bound: float

    def to_dict(self) -> dict:
        return {
            "bound": self.bound,
            "rho": self.posterior.rho,
            "prior": self.posterior.pi,
            "lambda": self.lam,
            "gamma": self.gamma,
            "trace": self.trace,
            "iterations": self.iterations,
            "inner_iterations": self.inner_iterations,
            "converged": self.converged,
            "initial_lambda_bound": self.initial_lambda_bound,
            "final_lambda_bound": self.final_lambda_bound,
            "final_kl_bound": self.final_kl_bound,
        }
