import logging
import math

import numpy as np
from scipy.special import rel_entr

from certify.constants import (
    C1,
    C2,
    CTD,
    DIS,
    FO,
    KL_FORM,
    KL_INV_MAX_ITER,
    KL_INV_TOLERANCE,
    LAMBDA_FORM,
    TND,
)
from certify.domain import BoundConfig, BoundEntry, OracleStats
from certify.exceptions import InvalidConfigError, UnsupportedTaskError
from certify.losses.service import aggregate_first, aggregate_pair

logger = logging.getLogger('mvcert')

ORACLE_FORM = "oracle"
KL_TOLERANCE = 1e-12


def kl_bernoulli(p: float, q: float) -> float:
    """
    kl(p || q) between Bernoulli distributions, in nats.

    Uses 0 ln 0 = 0; returns +inf when q is 0 or 1 and p differs from it.
    """
    if not 0.0 <= p <= 1.0 or not 0.0 <= q <= 1.0:
        raise InvalidConfigError(f"kl arguments ({p}, {q}) outside [0, 1]")
    return float(rel_entr(p, q) + rel_entr(1.0 - p, 1.0 - q))


def _check_inversion_args(p: float, eps: float):
    if not 0.0 <= p <= 1.0:
        raise InvalidConfigError(f"empirical mean {p} outside [0, 1]")
    if eps < 0.0 or math.isnan(eps):
        raise InvalidConfigError(f"kl budget {eps} must be nonnegative")


def kl_inv_upper(
    p: float, eps: float, tolerance: float = KL_INV_TOLERANCE, max_iter: int = KL_INV_MAX_ITER
) -> float:
    """
    Largest q in [p, 1] with kl(p || q) <= eps, by bisection.

    The returned q always satisfies the constraint; the true maximizer lies
    within ``tolerance`` above it.

    Args:
        p (float): Empirical mean in [0, 1].
        eps (float): Nonnegative budget.

    Returns:
        float: Upper confidence value.
    """
    _check_inversion_args(p, eps)
    if eps == 0.0 or p >= 1.0:
        return float(p)
    low, high = float(p), 1.0
    for _ in range(max_iter):
        if high - low < tolerance:
            break
        mid = (low + high) / 2.0
        if kl_bernoulli(p, mid) > eps:
            high = mid
        else:
            low = mid
    return low


def kl_inv_lower(
    p: float, eps: float, tolerance: float = KL_INV_TOLERANCE, max_iter: int = KL_INV_MAX_ITER
) -> float:
    """Smallest q in [0, p] with kl(p || q) <= eps; mirror image of kl_inv_upper."""
    _check_inversion_args(p, eps)
    if eps == 0.0 or p <= 0.0:
        return float(p)
    low, high = 0.0, float(p)
    for _ in range(max_iter):
        if high - low < tolerance:
            break
        mid = (low + high) / 2.0
        if kl_bernoulli(p, mid) > eps:
            low = mid
        else:
            high = mid
    return high


def _check_counts(**counts):
    for name, value in counts.items():
        if value < 1:
            raise InvalidConfigError(f"{name} must be at least 1 (got {value})")


def _check_kl(kl_rho_pi: float) -> float:
    """Rejects negative or non-finite KL values; rounding noise within KL_TOLERANCE below 0 reads as 0."""
    if not math.isfinite(kl_rho_pi) or kl_rho_pi < -KL_TOLERANCE:
        raise InvalidConfigError(f"KL(rho || pi) = {kl_rho_pi} must be finite and nonnegative")
    return max(0.0, float(kl_rho_pi))


def _require_binary(name: str, n_classes: int):
    if n_classes != 2:
        raise UnsupportedTaskError(f"{name} is only defined for binary classification (got {n_classes} classes)")


def _lambda_upper(loss: float, complexity: float, lam: float) -> float:
    """PAC-Bayes-lambda upper bound loss/(1-lam/2) + complexity/(lam(1-lam/2))."""
    shrink = 1.0 - lam / 2.0
    return loss / shrink + complexity / (lam * shrink)


def _lambda_lower(loss: float, complexity: float, gamma) -> float:
    """PAC-Bayes-lambda lower bound (1-gamma/2) loss - complexity/gamma, floored at 0."""
    if gamma is None:
        return 0.0
    return max(0.0, (1.0 - gamma / 2.0) * loss - complexity / gamma)


def _entry(name, form, value, config: BoundConfig, allocation, inputs, vacuous=False) -> BoundEntry:
    inputs = dict(inputs, delta=config.delta)
    if config.lam is not None:
        inputs["lambda"] = config.lam
    if config.gamma is not None:
        inputs["gamma"] = config.gamma
    if vacuous:
        logger.warning("%s bound is vacuous for inputs %s.", name, inputs)
        value = math.inf
    return BoundEntry(
        name=name, form=form, value=float(value), vacuous=vacuous,
        delta_allocation=allocation, inputs=inputs,
    )


def fo_bound(gibbs_hat, kl_rho_pi, n, delta, form=KL_FORM, lam=None) -> BoundEntry:
    """
    First order bound 2 E_rho[L], with PAC-Bayes-kl or PAC-Bayes-lambda.

    Args:
        gibbs_hat (float): E_rho of the out-of-bag Gibbs losses.
        kl_rho_pi (float): KL(rho || pi).
        n (int): n_min_first.
        delta (float): Confidence parameter.
        form (str): "kl" or "lambda".
        lam (float): lambda in (0, 2), required for the lambda form.

    Returns:
        BoundEntry: The bound value.
    """
    config = BoundConfig(delta, lam=lam)
    _check_counts(n=n)
    kl_rho_pi = _check_kl(kl_rho_pi)
    complexity = (kl_rho_pi + math.log(2.0 * math.sqrt(n) / delta)) / n
    inputs = {"gibbs": gibbs_hat, "kl": kl_rho_pi, "n": n}
    if form == LAMBDA_FORM:
        if lam is None:
            raise InvalidConfigError("the lambda form needs lambda")
        value = 2.0 * _lambda_upper(gibbs_hat, complexity, lam)
    elif form == KL_FORM:
        value = 2.0 * kl_inv_upper(gibbs_hat, complexity)
    else:
        raise InvalidConfigError(f"unknown bound form {form!r}")
    return _entry(FO, form, value, config, [delta], inputs)


def tnd_bound(tandem_hat, kl_rho_pi, n, delta, form=KL_FORM, lam=None) -> BoundEntry:
    """Tandem bound 4 E_rho^2[L(h, h')]; the product posterior doubles the KL term."""
    config = BoundConfig(delta, lam=lam)
    _check_counts(n=n)
    kl_rho_pi = _check_kl(kl_rho_pi)
    complexity = (2.0 * kl_rho_pi + math.log(2.0 * math.sqrt(n) / delta)) / n
    inputs = {"tandem": tandem_hat, "kl": kl_rho_pi, "n": n}
    if form == LAMBDA_FORM:
        if lam is None:
            raise InvalidConfigError("the lambda form needs lambda")
        value = 4.0 * _lambda_upper(tandem_hat, complexity, lam)
    elif form == KL_FORM:
        value = 4.0 * kl_inv_upper(tandem_hat, complexity)
    else:
        raise InvalidConfigError(f"unknown bound form {form!r}")
    return _entry(TND, form, value, config, [delta], inputs)


def dis_bound(
    gibbs_hat, dis_hat, kl_rho_pi, n, m, delta, form=KL_FORM, lam=None, gamma=None, n_classes=2
) -> BoundEntry:
    """
    Disagreement bound 4 E_rho[L] - 2 E_rho^2[D] for binary tasks, floored at 0.

    delta is split evenly between the Gibbs upper bound and the disagreement
    lower bound. In the lambda form a missing gamma drops the disagreement term.
    """
    _require_binary(DIS, n_classes)
    config = BoundConfig(delta, lam=lam, gamma=gamma)
    _check_counts(n=n, m=m)
    kl_rho_pi = _check_kl(kl_rho_pi)
    gibbs_complexity = (kl_rho_pi + math.log(4.0 * math.sqrt(n) / delta)) / n
    dis_complexity = (2.0 * kl_rho_pi + math.log(4.0 * math.sqrt(m) / delta)) / m
    inputs = {"gibbs": gibbs_hat, "disagreement": dis_hat, "kl": kl_rho_pi, "n": n, "m": m}
    if form == LAMBDA_FORM:
        if lam is None:
            raise InvalidConfigError("the lambda form needs lambda")
        value = 4.0 * _lambda_upper(gibbs_hat, gibbs_complexity, lam) - 2.0 * _lambda_lower(
            dis_hat, dis_complexity, gamma
        )
    elif form == KL_FORM:
        value = 4.0 * kl_inv_upper(gibbs_hat, gibbs_complexity) - 2.0 * kl_inv_lower(
            dis_hat, dis_complexity
        )
    else:
        raise InvalidConfigError(f"unknown bound form {form!r}")
    return _entry(DIS, form, max(0.0, value), config, [delta / 2.0, delta / 2.0], inputs)


def c_tandem_value(tandem_upper: float, gibbs_lower: float, gibbs_upper: float) -> float:
    """
    Worst case of A / (A + B) over the confidence box, A = T - L^2 and B = (1/2 - L)^2.

    Requires gibbs_upper < 1/2. The ratio grows with A and shrinks with B, so the
    largest A and the smallest B are taken.
    """
    numerator = tandem_upper - gibbs_lower * gibbs_lower
    if numerator <= 0.0:
        return 0.0
    return numerator / (numerator + (0.5 - gibbs_upper) ** 2)


def ctd_bound(gibbs_hat, tandem_hat, kl_rho_pi, n_first, n_pair, delta) -> BoundEntry:
    """
    C-tandem bound from kl-inverse plug-ins, delta/2 for the Gibbs loss and delta/2 for the tandem loss.

    Vacuous when the Gibbs upper bound reaches 1/2.
    """
    config = BoundConfig(delta)
    _check_counts(n_first=n_first, n_pair=n_pair)
    kl_rho_pi = _check_kl(kl_rho_pi)
    gibbs_complexity = (kl_rho_pi + math.log(4.0 * math.sqrt(n_first) / delta)) / n_first
    tandem_complexity = (2.0 * kl_rho_pi + math.log(4.0 * math.sqrt(n_pair) / delta)) / n_pair
    gibbs_upper = kl_inv_upper(gibbs_hat, gibbs_complexity)
    gibbs_lower = kl_inv_lower(gibbs_hat, gibbs_complexity)
    tandem_upper = kl_inv_upper(tandem_hat, tandem_complexity)
    inputs = {
        "gibbs": gibbs_hat, "tandem": tandem_hat, "kl": kl_rho_pi,
        "n_first": n_first, "n_pair": n_pair,
        "gibbs_upper": gibbs_upper, "gibbs_lower": gibbs_lower, "tandem_upper": tandem_upper,
    }
    allocation = [delta / 2.0, delta / 2.0]
    if gibbs_upper >= 0.5:
        return _entry(CTD, KL_FORM, math.inf, config, allocation, inputs, vacuous=True)
    value = c_tandem_value(tandem_upper, gibbs_lower, gibbs_upper)
    return _entry(CTD, KL_FORM, value, config, allocation, inputs)


def c_bound_value(margin_upper: float, dis_lower: float) -> tuple:
    """
    1 - (1 - margin_upper)^2 / (1 - 2 dis_lower), the squared term floored at 0.

    Returns:
        tuple: (value, vacuous) with vacuous True when the denominator is not positive.
    """
    denominator = 1.0 - 2.0 * dis_lower
    if denominator <= 0.0:
        return math.inf, True
    first_moment = max(0.0, 1.0 - margin_upper)
    return 1.0 - first_moment * first_moment / denominator, False


def c1_bound(gibbs_hat, dis_hat, kl_rho_pi, n, m, delta, n_classes=2) -> BoundEntry:
    """C1 = 1 - (1 - 2 UB(gibbs))^2 / (1 - 2 LB(dis)), delta/2 per plug-in."""
    _require_binary(C1, n_classes)
    config = BoundConfig(delta)
    _check_counts(n=n, m=m)
    kl_rho_pi = _check_kl(kl_rho_pi)
    gibbs_upper = kl_inv_upper(gibbs_hat, (kl_rho_pi + math.log(4.0 * math.sqrt(n) / delta)) / n)
    dis_lower = kl_inv_lower(dis_hat, (2.0 * kl_rho_pi + math.log(4.0 * math.sqrt(m) / delta)) / m)
    value, vacuous = c_bound_value(2.0 * gibbs_upper, dis_lower)
    inputs = {
        "gibbs": gibbs_hat, "disagreement": dis_hat, "kl": kl_rho_pi, "n": n, "m": m,
        "gibbs_upper": gibbs_upper, "disagreement_lower": dis_lower,
    }
    return _entry(C1, KL_FORM, value, config, [delta / 2.0, delta / 2.0], inputs, vacuous=vacuous)


def c2_bound(tandem_hat, dis_hat, kl_rho_pi, n_pair, m, delta, n_classes=2) -> BoundEntry:
    """C2 = 1 - (1 - (2 UB(tandem) + UB(dis)))^2 / (1 - 2 LB(dis)), delta/3 per plug-in."""
    _require_binary(C2, n_classes)
    config = BoundConfig(delta)
    _check_counts(n_pair=n_pair, m=m)
    kl_rho_pi = _check_kl(kl_rho_pi)
    tandem_upper = kl_inv_upper(
        tandem_hat, (2.0 * kl_rho_pi + math.log(6.0 * math.sqrt(n_pair) / delta)) / n_pair
    )
    dis_complexity = (2.0 * kl_rho_pi + math.log(6.0 * math.sqrt(m) / delta)) / m
    dis_upper = kl_inv_upper(dis_hat, dis_complexity)
    dis_lower = kl_inv_lower(dis_hat, dis_complexity)
    value, vacuous = c_bound_value(2.0 * tandem_upper + dis_upper, dis_lower)
    inputs = {
        "tandem": tandem_hat, "disagreement": dis_hat, "kl": kl_rho_pi, "n_pair": n_pair, "m": m,
        "tandem_upper": tandem_upper, "disagreement_upper": dis_upper, "disagreement_lower": dis_lower,
    }
    return _entry(C2, KL_FORM, value, config, [delta / 3.0] * 3, inputs, vacuous=vacuous)


def _oracle_entry(name: str, value: float, inputs: dict, vacuous: bool = False) -> BoundEntry:
    return BoundEntry(
        name=name,
        form=ORACLE_FORM,
        value=math.inf if vacuous else float(value),
        vacuous=vacuous,
        inputs=inputs,
    )


def oracle_bounds(stats: OracleStats, rho=None) -> dict:
    """
    Population values of all bounds, without estimation terms.

    Args:
        stats (OracleStats): Exact risks, tandem losses and (binary) disagreements.
        rho: Weights over the hypotheses; uniform when omitted.

    Returns:
        dict: BoundEntry per bound name; DIS, C1 and C2 only for binary stats.
    """
    if rho is None:
        rho = np.full(stats.size, 1.0 / stats.size)
    gibbs = aggregate_first(stats, rho)
    tandem = aggregate_pair(stats.tandem, rho)
    inputs = {"gibbs": gibbs, "tandem": tandem}
    entries = {
        FO: _oracle_entry(FO, 2.0 * gibbs, inputs),
        TND: _oracle_entry(TND, 4.0 * tandem, inputs),
    }
    if gibbs < 0.5:
        entries[CTD] = _oracle_entry(CTD, (tandem - gibbs**2) / (tandem - gibbs + 0.25), inputs)
    else:
        entries[CTD] = _oracle_entry(CTD, math.inf, inputs, vacuous=True)

    if stats.is_binary and stats.disagreement is not None:
        dis = aggregate_pair(stats.disagreement, rho)
        inputs = dict(inputs, disagreement=dis)
        entries[DIS] = _oracle_entry(DIS, 4.0 * gibbs - 2.0 * dis, inputs)
        for name, margin in ((C1, 2.0 * gibbs), (C2, 2.0 * tandem + dis)):
            value, vacuous = c_bound_value(margin, dis)
            entries[name] = _oracle_entry(name, value, inputs, vacuous=vacuous)
    return entries
