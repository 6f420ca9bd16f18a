import logging
import math

from certify.bounds.service import c1_bound, c2_bound, ctd_bound, dis_bound, fo_bound, tnd_bound
from certify.constants import (
    ALL_BOUNDS,
    BINARY_ONLY_BOUNDS,
    C1,
    C2,
    CTD,
    DIS,
    FO,
    KL_FORM,
    LAMBDA_FORM,
    TND,
)
from certify.domain import BoundConfig, BoundReport, LossStats, Posterior
from certify.exceptions import InvalidConfigError, UnsupportedTaskError
from certify.losses.service import aggregate_first, aggregate_pair, kl_divergence
from certify.optimize.service import optimal_gamma, optimal_lambda

logger = logging.getLogger('mvcert')


def resolve_bounds(requested, n_classes: int) -> list:
    """
    Orders and checks a requested bound subset.

    None selects every bound applicable to the task; binary-only bounds
    requested explicitly on multiclass data are rejected.
    """
    if requested is None:
        return [name for name in ALL_BOUNDS if n_classes == 2 or name not in BINARY_ONLY_BOUNDS]
    unknown = sorted(set(requested) - set(ALL_BOUNDS))
    if unknown:
        raise InvalidConfigError(f"unknown bounds: {', '.join(unknown)}")
    if n_classes != 2:
        binary_only = [name for name in ALL_BOUNDS if name in requested and name in BINARY_ONLY_BOUNDS]
        if binary_only:
            raise UnsupportedTaskError(
                f"{', '.join(binary_only)} only defined for binary data ({n_classes} classes given)"
            )
    return [name for name in ALL_BOUNDS if name in requested]


def aggregated_inputs(stats: LossStats, posterior: Posterior, delta: float) -> dict:
    return {
        "gibbs": aggregate_first(stats, posterior),
        "tandem": aggregate_pair(stats.tandem, posterior),
        "disagreement": aggregate_pair(stats.disagreement, posterior),
        "kl": kl_divergence(posterior),
        "n_min_first": stats.n_min_first,
        "n_min_pair": stats.n_min_pair,
        "m_min": stats.m_min,
        "n_classes": stats.n_classes,
        "size": stats.size,
        "delta": delta,
    }


def _lambda_parameters(name: str, inputs: dict) -> dict:
    """Closed-form optimal lambda (and gamma for DIS) at the current posterior."""
    kl, delta = inputs["kl"], inputs["delta"]
    n_first, n_pair, m = inputs["n_min_first"], inputs["n_min_pair"], inputs["m_min"]
    if name == FO:
        return {"lam": optimal_lambda(inputs["gibbs"], n_first, kl + math.log(2.0 * math.sqrt(n_first) / delta))}
    if name == TND:
        return {
            "lam": optimal_lambda(inputs["tandem"], n_pair, 2.0 * kl + math.log(2.0 * math.sqrt(n_pair) / delta))
        }
    gamma = None
    if inputs["disagreement"] > 0.0:
        gamma = optimal_gamma(inputs["disagreement"], m, kl, delta)
    return {
        "lam": optimal_lambda(inputs["gibbs"], n_first, kl + math.log(4.0 * math.sqrt(n_first) / delta)),
        "gamma": gamma,
    }


def compute_bound_report(
    stats: LossStats, posterior: Posterior = None, delta: float = 0.05, bounds=None, form: str = KL_FORM,
    provenance: dict = None,
) -> BoundReport:
    """
    Evaluates the requested bounds at one posterior.

    FO, TND and DIS honour ``form``; in the lambda form they use the
    closed-form optimal lambda (and gamma). CTD, C1 and C2 are always kl-form.

    Args:
        stats (LossStats): Out-of-bag statistics.
        posterior (Posterior): Weights and prior; uniform when omitted.
        delta (float): Confidence parameter.
        bounds: Subset of bound names, or None for every applicable bound.
        form (str): "kl" or "lambda".
        provenance (dict): Hashes and versions copied into the report.

    Returns:
        BoundReport: Entries in table order plus the aggregated inputs.
    """
    BoundConfig(delta)
    if form not in (KL_FORM, LAMBDA_FORM):
        raise InvalidConfigError(f"unknown bound form {form!r}")
    if posterior is None:
        posterior = Posterior.uniform(stats.size)
    if posterior.size != stats.size:
        raise InvalidConfigError(f"posterior has {posterior.size} weights for {stats.size} hypotheses")
    names = resolve_bounds(bounds, stats.n_classes)
    inputs = aggregated_inputs(stats, posterior, delta)
    gibbs, tandem, dis, kl = inputs["gibbs"], inputs["tandem"], inputs["disagreement"], inputs["kl"]
    n_first, n_pair, m = inputs["n_min_first"], inputs["n_min_pair"], inputs["m_min"]

    entries = {}
    for name in names:
        parameters = _lambda_parameters(name, inputs) if form == LAMBDA_FORM and name in (FO, TND, DIS) else {}
        if name == FO:
            entries[name] = fo_bound(gibbs, kl, n_first, delta, form=form, **parameters)
        elif name == TND:
            entries[name] = tnd_bound(tandem, kl, n_pair, delta, form=form, **parameters)
        elif name == DIS:
            entries[name] = dis_bound(
                gibbs, dis, kl, n_first, m, delta, form=form, n_classes=stats.n_classes, **parameters
            )
        elif name == CTD:
            entries[name] = ctd_bound(gibbs, tandem, kl, n_first, n_pair, delta)
        elif name == C1:
            entries[name] = c1_bound(gibbs, dis, kl, n_first, m, delta, n_classes=stats.n_classes)
        elif name == C2:
            entries[name] = c2_bound(tandem, dis, kl, n_pair, m, delta, n_classes=stats.n_classes)

    logger.info(
        "Bound report (%s form) for %d hypotheses: %s.",
        form, stats.size, ", ".join(f"{name}={entry.value:.5f}" for name, entry in entries.items()),
    )
    return BoundReport(entries=entries, inputs=inputs, provenance=dict(provenance or {}))
