import logging

import numpy as np
from scipy.special import rel_entr

from certify.domain import Ensemble, LossStats, OracleStats, Posterior, PredictionMatrix
from certify.exceptions import (
    DimensionMismatchError,
    EmptyOverlapError,
    InvalidConfigError,
)
from certify.forest.service import predict_tree

logger = logging.getLogger('mvcert')

# Vote masses closer than this count as a tie.
VOTE_TIE_TOLERANCE = 1e-12
ORACLE_TOLERANCE = 1e-12


def _weights(rho, size: int) -> np.ndarray:
    weights = rho.rho if isinstance(rho, Posterior) else np.asarray(rho, dtype=np.float64)
    if weights.shape != (size,):
        raise DimensionMismatchError(f"posterior has {weights.shape[0]} weights for {size} hypotheses")
    return weights


def prediction_matrix(ensemble: Ensemble, X, labels=None) -> PredictionMatrix:
    """Row h holds tree h's predictions on X."""
    preds = np.stack([predict_tree(tree, X) for tree in ensemble.trees])
    return PredictionMatrix(preds=preds, labels=labels, n_classes=ensemble.n_classes)


def vote_masses(pm: PredictionMatrix, rho) -> np.ndarray:
    """c x N matrix of rho-weighted votes per class and sample."""
    weights = _weights(rho, pm.n_hypotheses)
    return np.stack([weights @ (pm.preds == k) for k in range(pm.n_classes)])


def mv_predict(pm: PredictionMatrix, rho) -> np.ndarray:
    """
    Weighted majority vote per sample; ties go to the lowest class index.

    Args:
        pm (PredictionMatrix): Hypothesis predictions.
        rho (Posterior | array): Weights over the hypotheses.

    Returns:
        np.ndarray: Predicted label per sample.
    """
    masses = vote_masses(pm, rho)
    top = masses.max(axis=0)
    return np.argmax(masses >= top - VOTE_TIE_TOLERANCE, axis=0)


def mv_loss(pm: PredictionMatrix, rho) -> float:
    if pm.labels is None:
        raise InvalidConfigError("labels are required to compute the majority-vote loss")
    return float(np.mean(mv_predict(pm, rho) != pm.labels))


def _first_empty_pair(overlap: np.ndarray) -> tuple:
    h, h_prime = np.argwhere(overlap == 0)[0]
    return int(min(h, h_prime)), int(max(h, h_prime))


def _agreement_counts(preds: np.ndarray, weights: np.ndarray, n_classes: int) -> np.ndarray:
    """Entry (h, h') counts samples (weighted by the masks) where h and h' predict the same label."""
    agreement = np.zeros((preds.shape[0], preds.shape[0]))
    for k in range(n_classes):
        votes = weights * (preds == k)
        agreement += votes @ votes.T
    return agreement


def _symmetric(matrix: np.ndarray) -> np.ndarray:
    return np.clip((matrix + matrix.T) / 2.0, 0.0, 1.0)


def compute_loss_stats(pm: PredictionMatrix, masks=None, unlabeled_pm: PredictionMatrix = None) -> LossStats:
    """
    Out-of-bag Gibbs, tandem and disagreement statistics.

    gibbs[h] is the error rate on S_h, tandem[h, h'] the rate of joint errors on
    S_h & S_h'. Disagreement uses the same overlaps unless an unlabeled
    prediction matrix is given, in which case it is measured on all of its
    columns and m_min is the unlabeled sample count.

    Args:
        pm (PredictionMatrix): Labeled predictions (M x n).
        masks: M x n boolean out-of-bag masks; None means every sample validates every hypothesis.
        unlabeled_pm (PredictionMatrix): Optional predictions on unlabeled samples (M x m).

    Returns:
        LossStats: The statistics with their minimal validation-set sizes.
    """
    errors = pm.errors().astype(np.float64)
    if masks is None:
        overlap_weights = np.ones_like(errors)
    else:
        overlap_weights = np.asarray(masks, dtype=bool).astype(np.float64)
        if overlap_weights.shape != errors.shape:
            raise DimensionMismatchError(
                f"masks of shape {overlap_weights.shape} for predictions of shape {errors.shape}"
            )

    oob_sizes = overlap_weights.sum(axis=1)
    if np.any(oob_sizes == 0):
        h = int(np.flatnonzero(oob_sizes == 0)[0])
        raise EmptyOverlapError((h, h))
    overlap = overlap_weights @ overlap_weights.T
    if np.any(overlap == 0):
        raise EmptyOverlapError(_first_empty_pair(overlap))

    masked_errors = errors * overlap_weights
    gibbs = masked_errors.sum(axis=1) / oob_sizes
    tandem = _symmetric((masked_errors @ masked_errors.T) / overlap)

    if unlabeled_pm is None:
        agreement = _agreement_counts(pm.preds, overlap_weights, pm.n_classes)
        disagreement = _symmetric((overlap - agreement) / overlap)
        m_min = int(overlap.min())
    else:
        if unlabeled_pm.n_hypotheses != pm.n_hypotheses or unlabeled_pm.n_samples < 1:
            raise DimensionMismatchError("unlabeled predictions must cover the same hypotheses")
        m = unlabeled_pm.n_samples
        ones = np.ones(unlabeled_pm.preds.shape)
        agreement = _agreement_counts(unlabeled_pm.preds, ones, pm.n_classes)
        disagreement = _symmetric(1.0 - agreement / m)
        m_min = m
    np.fill_diagonal(disagreement, 0.0)

    stats = LossStats(
        gibbs=gibbs,
        tandem=tandem,
        disagreement=disagreement,
        n_min_first=int(oob_sizes.min()),
        n_min_pair=int(overlap.min()),
        m_min=m_min,
        n_classes=pm.n_classes,
        oob_sizes=oob_sizes.astype(np.int64),
        overlap_sizes=overlap.astype(np.int64),
    )
    logger.info(
        "Loss statistics for %d hypotheses: n_min_first=%d, n_min_pair=%d, m_min=%d.",
        stats.size, stats.n_min_first, stats.n_min_pair, stats.m_min,
    )
    return stats


def aggregate_first(stats, rho) -> float:
    """E_rho of the Gibbs losses; ``stats`` is LossStats, OracleStats or a loss vector."""
    losses = np.asarray(getattr(stats, "gibbs", stats), dtype=np.float64)
    return float(_weights(rho, losses.shape[0]) @ losses)


def aggregate_pair(matrix, rho) -> float:
    """Bilinear form rho^T A rho."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DimensionMismatchError(f"expected a square matrix, got shape {matrix.shape}")
    weights = _weights(rho, matrix.shape[0])
    return float(weights @ matrix @ weights)


def oracle_stats(true_risks, pairwise_tandem, n_classes: int = 2) -> OracleStats:
    """
    Wraps exact population risks and tandem losses.

    The disagreement is derived as L(h) + L(h') - 2 L(h, h') for binary tasks.

    Args:
        true_risks: Length-M risks L(h).
        pairwise_tandem: M x M tandem losses with L(h, h) = L(h).
        n_classes (int): Number of classes.

    Returns:
        OracleStats: The validated population statistics.
    """
    risks = np.asarray(true_risks, dtype=np.float64)
    tandem = np.asarray(pairwise_tandem, dtype=np.float64)
    size = risks.shape[0]
    if risks.ndim != 1 or tandem.shape != (size, size):
        raise DimensionMismatchError("tandem must be M x M for M risks")
    if np.any(risks < -ORACLE_TOLERANCE) or np.any(risks > 1.0 + ORACLE_TOLERANCE):
        raise InvalidConfigError("risks must lie in [0, 1]")
    if np.any(tandem < -ORACLE_TOLERANCE) or np.any(tandem > 1.0 + ORACLE_TOLERANCE):
        raise InvalidConfigError("tandem losses must lie in [0, 1]")
    risks = np.clip(risks, 0.0, 1.0)
    tandem = np.clip(tandem, 0.0, 1.0)
    if not np.allclose(tandem, tandem.T, rtol=0.0, atol=ORACLE_TOLERANCE):
        raise InvalidConfigError("tandem matrix is not symmetric")
    if not np.allclose(np.diag(tandem), risks, rtol=0.0, atol=ORACLE_TOLERANCE):
        raise InvalidConfigError("tandem diagonal must equal the risks")
    upper = np.minimum.outer(risks, risks)
    lower = np.maximum(np.add.outer(risks, risks) - 1.0, 0.0)
    if np.any(tandem > upper + ORACLE_TOLERANCE) or np.any(tandem < lower - ORACLE_TOLERANCE):
        raise InvalidConfigError("inconsistent oracle statistics: tandem outside its feasible range")

    disagreement = None
    if n_classes == 2:
        disagreement = np.clip(np.add.outer(risks, risks) - 2.0 * tandem, 0.0, 1.0)
        np.fill_diagonal(disagreement, 0.0)
    return OracleStats(gibbs=risks, tandem=tandem, disagreement=disagreement, n_classes=n_classes)


def kl_divergence(posterior: Posterior) -> float:
    """KL(rho || pi) in nats."""
    return max(0.0, float(np.sum(rel_entr(posterior.rho, posterior.pi))))
