"""Train, certify, optimize and replicate: the workflows behind the management commands."""
import logging
from multiprocessing import Pool

import numpy as np

from certify.bounds.report import compute_bound_report, resolve_bounds
from certify.constants import ARTIFACT_VERSION, BINARY_ONLY_BOUNDS, FULL_BAGGING, KL_FORM, OPTIMIZABLE_BOUNDS
from certify.data.service import dataset_hash, split_unlabeled, stratified_split
from certify.domain import Dataset, Ensemble, Posterior, SplitSpec
from certify.exceptions import EnsembleDocumentError, HashMismatchError, InvalidConfigError, UnsupportedTaskError
from certify.forest.document import ensemble_hash
from certify.forest.service import train_forest
from certify.losses.service import compute_loss_stats, mv_loss, prediction_matrix
from certify.optimize.service import minimize_bound
from certify.utils import derive_seeds

logger = logging.getLogger('mvcert')


def provenance(data: Dataset, ensemble: Ensemble = None, config: dict = None) -> dict:
    """Hashes, configuration and artifact version embedded in every report."""
    return {
        "artifact_version": ARTIFACT_VERSION,
        "dataset_hash": dataset_hash(data),
        "ensemble_hash": ensemble_hash(ensemble) if ensemble is not None else None,
        "config": dict(config or {}),
    }


def check_optimizable(names, n_classes: int) -> list:
    """Validates the bounds to optimize against the task, keeping their table order."""
    names = list(names or [])
    unknown = sorted(set(names) - set(OPTIMIZABLE_BOUNDS))
    if unknown:
        raise InvalidConfigError(f"cannot optimize {', '.join(unknown)}; choose from {', '.join(OPTIMIZABLE_BOUNDS)}")
    if n_classes != 2 and any(name in BINARY_ONLY_BOUNDS for name in names):
        raise UnsupportedTaskError(f"DIS is only defined for binary data ({n_classes} classes given)")
    return [name for name in OPTIMIZABLE_BOUNDS if name in names]


def run_train(
    data: Dataset, trees: int, bagging: str = FULL_BAGGING, seed: int = 0, test_fraction: float = 0.2,
    max_features: int = None, workers: int = 1,
) -> tuple:
    """
    Splits ``data`` and trains a forest on the training part.

    The split spec and source hash go into the ensemble metadata so the
    bounds and optimize workflows can rebuild the same split.

    Returns:
        tuple: (Ensemble, metadata, train Dataset, test Dataset)
    """
    spec = SplitSpec(test_fraction=test_fraction, seed=seed)
    train, test = stratified_split(data, spec)
    ensemble = train_forest(
        train, trees, mode=bagging, seed=seed, max_features=max_features, workers=workers,
        dataset_hash=dataset_hash(train),
    )
    metadata = {
        "split": {"test_fraction": spec.test_fraction, "seed": spec.seed},
        "source_dataset_hash": dataset_hash(data),
        "max_features": max_features,
    }
    return ensemble, metadata, train, test


def restore_split(data: Dataset, ensemble: Ensemble, metadata: dict) -> tuple:
    """
    Rebuilds the (train, test) split recorded in the ensemble metadata.

    Raises:
        EnsembleDocumentError: The document records no split.
        HashMismatchError: The rebuilt training set is not the one the ensemble was trained on.
    """
    split = (metadata or {}).get("split")
    if not split:
        raise EnsembleDocumentError("ensemble document does not record the split it was trained on")
    train, test = stratified_split(data, SplitSpec(test_fraction=split["test_fraction"], seed=split["seed"]))
    actual = dataset_hash(train)
    if actual != ensemble.dataset_hash or train.n_samples != ensemble.n_samples:
        raise HashMismatchError(
            f"ensemble was trained on dataset {ensemble.dataset_hash[:12]}, "
            f"the split of this file gives {actual[:12]}"
        )
    return train, test


def evaluate(ensemble: Ensemble, train: Dataset, test: Dataset, unlabeled=None) -> tuple:
    """Out-of-bag statistics on ``train`` (disagreement on ``unlabeled`` if given) and test predictions."""
    train_pm = prediction_matrix(ensemble, train.features, train.labels)
    unlabeled_pm = None
    if unlabeled is not None and len(unlabeled):
        unlabeled_pm = prediction_matrix(ensemble, unlabeled)
    stats = compute_loss_stats(train_pm, ensemble.oob_masks, unlabeled_pm)
    test_pm = prediction_matrix(ensemble, test.features, test.labels)
    return stats, test_pm


def run_bounds(
    ensemble: Ensemble, train: Dataset, test: Dataset, delta: float, bounds=None, form: str = KL_FORM,
    provenance_info: dict = None,
) -> dict:
    """Bound report at uniform rho together with the test loss of the uniform majority vote."""
    stats, test_pm = evaluate(ensemble, train, test)
    uniform = Posterior.uniform(ensemble.size)
    report = compute_bound_report(stats, uniform, delta=delta, bounds=bounds, form=form, provenance=provenance_info)
    document = report.to_dict()
    document["test_mv_loss"] = mv_loss(test_pm, uniform)
    document["stats"] = stats.to_dict()
    return document


def run_optimize(
    ensemble: Ensemble, train: Dataset, test: Dataset, delta: float, optimize, bounds=None,
    provenance_info: dict = None,
) -> dict:
    """
    Minimizes each requested bound and compares the test losses of the resulting majority votes.

    Args:
        ensemble (Ensemble): Trained forest.
        train (Dataset): Its training set (out-of-bag statistics).
        test (Dataset): Held-out data for the majority-vote losses.
        delta (float): Confidence parameter.
        optimize: Names among FO, TND, DIS.
        bounds: Bounds reported at uniform rho and at each optimum.
        provenance_info (dict): Copied into the document.

    Returns:
        dict: ``uniform`` and ``optimized`` sections; each optimum carries rho, the
        trace, its kl-form bound, its test loss and its weights in decreasing order.
    """
    names = check_optimizable(optimize, ensemble.n_classes)
    if not names:
        raise InvalidConfigError("nothing to optimize")
    stats, test_pm = evaluate(ensemble, train, test)
    uniform = Posterior.uniform(ensemble.size)
    document = {
        "provenance": dict(provenance_info or {}),
        "uniform": {
            "test_mv_loss": mv_loss(test_pm, uniform),
            "report": compute_bound_report(stats, uniform, delta=delta, bounds=bounds).to_dict(),
        },
        "optimized": {},
    }
    for name in names:
        result = minimize_bound(name, stats, delta=delta)
        entry = result.to_dict()
        entry["test_mv_loss"] = mv_loss(test_pm, result.posterior)
        entry["sorted_rho"] = np.sort(result.posterior.rho)[::-1]
        entry["report"] = compute_bound_report(stats, result.posterior, delta=delta, bounds=bounds).to_dict()
        document["optimized"][name] = entry
        logger.info(
            "%s: test MV loss %.5f at uniform rho, %.5f at the optimum.",
            name, document["uniform"]["test_mv_loss"], entry["test_mv_loss"],
        )
    return document


def _repetition(job) -> list:
    """One repetition: a fresh split, then one forest per (bagging mode, labeled fraction) cell."""
    data, rep_seed, settings = job
    split_seed, forest_seed, unlabeled_seed = derive_seeds(rep_seed, 3)
    train, test = stratified_split(data, SplitSpec(test_fraction=settings["test_fraction"], seed=split_seed))
    cells = []
    for mode in settings["bagging"]:
        for fraction in settings["labeled_fractions"]:
            labeled, unlabeled = split_unlabeled(train, fraction, unlabeled_seed)
            ensemble = train_forest(
                labeled, settings["trees"], mode=mode, seed=forest_seed, max_features=settings["max_features"],
            )
            stats, test_pm = evaluate(ensemble, labeled, test, unlabeled)
            uniform = Posterior.uniform(ensemble.size)
            report = compute_bound_report(stats, uniform, delta=settings["delta"], bounds=settings["bounds"])
            metrics = {
                "test_mv_loss": mv_loss(test_pm, uniform),
                "bounds": {name: entry.value for name, entry in report.entries.items()},
                "n_min_first": stats.n_min_first,
                "n_min_pair": stats.n_min_pair,
                "m_min": stats.m_min,
                "optimized": {},
            }
            for name in settings["optimize"]:
                result = minimize_bound(name, stats, delta=settings["delta"])
                metrics["optimized"][name] = {
                    "bound": result.final_kl_bound,
                    "test_mv_loss": mv_loss(test_pm, result.posterior),
                }
            cells.append({"bagging": mode, "labeled_fraction": fraction, "metrics": metrics})
    return cells


def aggregate(records: list):
    """Mean and population standard deviation of every numeric leaf across repetitions."""
    first = records[0]
    if isinstance(first, dict):
        return {key: aggregate([record[key] for record in records]) for key in first}
    values = np.asarray(records, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        return {"mean": float("inf"), "std": None}
    return {"mean": float(values.mean()), "std": float(values.std())}


def run_experiment(
    data: Dataset, trees: int, reps: int = 1, seed: int = 0, bagging=(FULL_BAGGING,), labeled_fractions=(1.0,),
    delta: float = 0.05, bounds=None, optimize=(), test_fraction: float = 0.2, max_features: int = None,
    workers: int = 1,
) -> dict:
    """
    Replicates train, certify and optimize over ``reps`` derived seeds.

    Each repetition draws a fresh stratified split; every bagging mode and
    labeled fraction is evaluated on that same split. Below a labeled fraction
    of 1 the rest of the training part is stripped of its labels and the
    disagreement is measured on it.

    Returns:
        dict: Per-cell repetitions and their mean and standard deviation.
    """
    if reps < 1:
        raise InvalidConfigError(f"need at least one repetition (got {reps})")
    labeled_fractions = sorted({float(fraction) for fraction in labeled_fractions}, reverse=True)
    if any(fraction < 1.0 for fraction in labeled_fractions) and data.n_classes != 2:
        raise UnsupportedTaskError("the unlabeled sweep certifies DIS, which needs binary data")
    settings = {
        "trees": trees,
        "bagging": list(dict.fromkeys(bagging)),
        "labeled_fractions": labeled_fractions,
        "delta": delta,
        "bounds": resolve_bounds(bounds, data.n_classes),
        "optimize": check_optimizable(optimize, data.n_classes),
        "test_fraction": test_fraction,
        "max_features": max_features,
    }
    seeds = derive_seeds(seed, reps)
    jobs = [(data, rep_seed, settings) for rep_seed in seeds]
    logger.info(
        "Experiment: %d repetitions x %d bagging modes x %d labeled fractions.",
        reps, len(settings["bagging"]), len(labeled_fractions),
    )
    if workers > 1:
        with Pool(workers) as pool:
            repetitions = pool.map(_repetition, jobs)
    else:
        repetitions = [_repetition(job) for job in jobs]

    cells = []
    for position, first in enumerate(repetitions[0]):
        records = [cells_of_rep[position]["metrics"] for cells_of_rep in repetitions]
        cells.append({
            "bagging": first["bagging"],
            "labeled_fraction": first["labeled_fraction"],
            "repetitions": [dict(metrics, seed=rep_seed) for metrics, rep_seed in zip(records, seeds)],
            "summary": aggregate(records),
        })
    return {
        "settings": settings,
        "seeds": seeds,
        "cells": cells,
        "provenance": provenance(data, config=dict(settings, reps=reps, seed=seed)),
    }
