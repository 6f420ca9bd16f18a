import logging
import math
from dataclasses import replace

import numpy as np
from scipy.special import rel_entr, softmax

from certify.bounds.service import dis_bound, fo_bound, tnd_bound
from certify.constants import (
    CONVERGENCE_TOLERANCE,
    DIS,
    FO,
    IRPROP_DELTA_MAX,
    IRPROP_DELTA_MIN,
    IRPROP_ETA_MINUS,
    IRPROP_ETA_PLUS,
    KL_FORM,
    LAMBDA_FORM,
    MAX_INNER_ITERATIONS,
    MAX_OUTER_ITERATIONS,
    STALL_ITERATIONS,
    TND,
)
from certify.domain import LossStats, OptimizeResult, OptimizerState, Posterior
from certify.exceptions import InvalidConfigError, InvalidPosteriorError, UnsupportedTaskError
from certify.losses.service import aggregate_first, aggregate_pair

logger = logging.getLogger('mvcert')


def optimal_lambda(loss_hat: float, n: int, kl_term: float) -> float:
    """
    Minimizer over lambda of loss/(1-lam/2) + kl_term/(lam (1-lam/2) n).

    Args:
        loss_hat (float): Empirical loss, nonnegative.
        n (int): Sample count of the estimate.
        kl_term (float): Complexity numerator (KL part plus the log term), positive.

    Returns:
        float: lambda in (0, 2).
    """
    if loss_hat < 0.0 or kl_term <= 0.0 or n < 1:
        raise InvalidConfigError("optimal lambda needs loss >= 0, kl_term > 0 and n >= 1")
    return 2.0 / (math.sqrt(2.0 * n * loss_hat / kl_term + 1.0) + 1.0)


def optimal_gamma(dis_hat: float, m: int, kl_rho_pi: float, delta: float) -> float:
    """Maximizer over gamma of (1-gamma/2) dis - (2KL + ln(4 sqrt(m)/delta))/(gamma m)."""
    if dis_hat <= 0.0:
        raise InvalidConfigError("optimal gamma is undefined for zero disagreement")
    if m < 1:
        raise InvalidConfigError("m must be at least 1")
    return math.sqrt((4.0 * kl_rho_pi + math.log(16.0 * m / delta**2)) / (m * dis_hat))


def _log_ratio(rho: np.ndarray, pi: np.ndarray) -> np.ndarray:
    # softmax can underflow to exact zeros far from the optimum
    return np.log(np.maximum(rho, np.finfo(np.float64).tiny)) - np.log(pi)


def _kl(rho: np.ndarray, pi: np.ndarray) -> float:
    return max(0.0, float(np.sum(rel_entr(rho, pi))))


def tnd_objective(rho, tandem, lam, n, pi) -> float:
    """rho^T T rho + 2 KL(rho || pi) / (lam n); the TND lambda-form bound is increasing in it."""
    rho = np.asarray(rho, dtype=np.float64)
    return float(rho @ tandem @ rho) + 2.0 * _kl(rho, pi) / (lam * n)


def grad_tnd(rho, tandem, lam, n, pi) -> np.ndarray:
    """Gradient of tnd_objective with respect to rho (rho strictly positive)."""
    rho = np.asarray(rho, dtype=np.float64)
    return 2.0 * (np.asarray(tandem) @ rho + (1.0 + _log_ratio(rho, pi)) / (lam * n))


def _dis_coefficients(lam, gamma, n, m) -> tuple:
    a = 1.0 / (1.0 - lam / 2.0)
    c = 1.0 / (lam * (1.0 - lam / 2.0) * n)
    if gamma is None:
        return a, 0.0, c
    return a, 1.0 - gamma / 2.0, c + 1.0 / (gamma * m)


def dis_objective(rho, gibbs, dis, lam, gamma, n, m, pi) -> float:
    """2a E_rho[L] - b E_rho^2[D] + 2c KL; a missing gamma drops the disagreement term."""
    rho = np.asarray(rho, dtype=np.float64)
    a, b, c = _dis_coefficients(lam, gamma, n, m)
    return 2.0 * a * float(rho @ gibbs) - b * float(rho @ dis @ rho) + 2.0 * c * _kl(rho, pi)


def grad_dis(rho, gibbs, dis, lam, gamma, n, m, pi) -> np.ndarray:
    rho = np.asarray(rho, dtype=np.float64)
    a, b, c = _dis_coefficients(lam, gamma, n, m)
    return 2.0 * (a * np.asarray(gibbs) - b * (np.asarray(dis) @ rho) + c * (1.0 + _log_ratio(rho, pi)))


def softmax_gradient(rho, grad_rho) -> np.ndarray:
    """Chain rule through rho = softmax(rho_tilde): J^T g = rho * (g - <rho, g>)."""
    rho = np.asarray(rho, dtype=np.float64)
    grad_rho = np.asarray(grad_rho, dtype=np.float64)
    return rho * (grad_rho - rho @ grad_rho)


def irprop_step(
    state: OptimizerState,
    grad,
    value: float = None,
    eta_plus: float = IRPROP_ETA_PLUS,
    eta_minus: float = IRPROP_ETA_MINUS,
    delta_min: float = IRPROP_DELTA_MIN,
    delta_max: float = IRPROP_DELTA_MAX,
) -> OptimizerState:
    """
    One iRProp+ update of ``state.rho_tilde``.

    Coordinates whose gradient kept its sign grow their step size, those that
    flipped shrink it and, when ``value`` is worse than the previous one, undo
    their last step. A flipped coordinate forgets its gradient so the next
    update moves it again.

    Args:
        state (OptimizerState): Current parameters and step sizes.
        grad: Gradient at ``state.rho_tilde``.
        value (float): Objective at ``state.rho_tilde``; None never reverts.

    Returns:
        OptimizerState: A new state; the input is not modified.
    """
    grad = np.asarray(grad, dtype=np.float64)
    previous_step = state.previous_step if state.previous_step is not None else np.zeros_like(grad)
    agreement = state.previous_gradient * grad
    grow, flip = agreement > 0, agreement < 0

    step_sizes = state.step_sizes.copy()
    step_sizes[grow] = np.minimum(step_sizes[grow] * eta_plus, delta_max)
    step_sizes[flip] = np.maximum(step_sizes[flip] * eta_minus, delta_min)

    step = np.where(flip, 0.0, -np.sign(grad) * step_sizes)
    worsened = value is not None and value > state.previous_value
    if worsened:
        step = np.where(flip, -previous_step, step)

    stored_gradient = np.where(flip, 0.0, grad)
    return replace(
        state,
        rho_tilde=state.rho_tilde + step,
        step_sizes=step_sizes,
        previous_gradient=stored_gradient,
        previous_step=np.where(flip, previous_step if not worsened else 0.0, step),
        previous_value=state.previous_value if value is None else value,
    )


def _prior(prior, size: int) -> np.ndarray:
    if prior is None:
        return np.full(size, 1.0 / size)
    pi = prior.pi if isinstance(prior, Posterior) else np.asarray(prior, dtype=np.float64)
    if pi.shape != (size,):
        raise InvalidPosteriorError(f"prior has {pi.shape[0]} weights for {size} hypotheses")
    if np.any(pi <= 0):
        raise InvalidPosteriorError("optimization needs a strictly positive prior")
    Posterior(pi, pi)
    return pi


def _check_delta(delta: float):
    if not 0.0 < delta < 1.0:
        raise InvalidConfigError(f"delta {delta} outside (0, 1)")


class _BoundProblem:
    """Lambda-form bound of one kind as a function of (rho, lambda, gamma)."""

    name = None

    def __init__(self, stats: LossStats, pi: np.ndarray, delta: float):
        self.stats = stats
        self.pi = pi
        self.delta = delta

    def kl(self, rho) -> float:
        return _kl(rho, self.pi)

    def value(self, rho, lam, gamma=None) -> float:
        return self.entry(rho, LAMBDA_FORM, lam, gamma).value

    def final_value(self, rho) -> float:
        return self.entry(rho, KL_FORM).value

    def update_parameters(self, rho, lam, gamma):
        raise NotImplementedError

    def gradient(self, rho, lam, gamma) -> np.ndarray:
        raise NotImplementedError

    def entry(self, rho, form, lam=None, gamma=None):
        raise NotImplementedError


class _TandemProblem(_BoundProblem):
    name = TND

    def entry(self, rho, form, lam=None, gamma=None):
        stats = self.stats
        return tnd_bound(
            aggregate_pair(stats.tandem, rho), self.kl(rho), stats.n_min_pair, self.delta, form=form, lam=lam
        )

    def update_parameters(self, rho, lam, gamma):
        n = self.stats.n_min_pair
        kl_term = 2.0 * self.kl(rho) + math.log(2.0 * math.sqrt(n) / self.delta)
        return optimal_lambda(aggregate_pair(self.stats.tandem, rho), n, kl_term), None

    def gradient(self, rho, lam, gamma):
        return grad_tnd(rho, self.stats.tandem, lam, self.stats.n_min_pair, self.pi)


class _DisagreementProblem(_BoundProblem):
    name = DIS

    def entry(self, rho, form, lam=None, gamma=None):
        stats = self.stats
        return dis_bound(
            aggregate_first(stats, rho), aggregate_pair(stats.disagreement, rho), self.kl(rho),
            stats.n_min_first, stats.m_min, self.delta, form=form, lam=lam, gamma=gamma,
            n_classes=stats.n_classes,
        )

    def update_parameters(self, rho, lam, gamma):
        stats = self.stats
        kl = self.kl(rho)
        n = stats.n_min_first
        lam = optimal_lambda(aggregate_first(stats, rho), n, kl + math.log(4.0 * math.sqrt(n) / self.delta))
        dis = aggregate_pair(stats.disagreement, rho)
        if dis > 0.0:
            gamma = optimal_gamma(dis, stats.m_min, kl, self.delta)
        return lam, gamma

    def gradient(self, rho, lam, gamma):
        stats = self.stats
        return grad_dis(
            rho, stats.gibbs, stats.disagreement, lam, gamma, stats.n_min_first, stats.m_min, self.pi
        )


def _accept_parameters(problem: _BoundProblem, rho, lam, gamma, current: float) -> tuple:
    """Closed-form parameter update, kept only if it does not increase the bound."""
    new_lam, new_gamma = problem.update_parameters(rho, lam, gamma)
    candidate = problem.value(rho, new_lam, new_gamma)
    if candidate <= current:
        return new_lam, new_gamma, candidate
    return lam, gamma, current


def _descend(problem: _BoundProblem, rho_tilde, lam, gamma, start_value: float) -> tuple:
    """
    iRProp+ on rho_tilde at fixed (lambda, gamma).

    Stops after STALL_ITERATIONS updates without strict improvement or
    MAX_INNER_ITERATIONS updates, and returns the best iterate seen.
    """
    state = OptimizerState.start(rho_tilde, lam=lam, gamma=gamma)
    state.best_bound = start_value
    best_rho_tilde = state.rho_tilde
    iterations = 0
    value = start_value
    while iterations < MAX_INNER_ITERATIONS and state.stall_counter < STALL_ITERATIONS:
        rho = softmax(state.rho_tilde)
        grad = softmax_gradient(rho, problem.gradient(rho, lam, gamma))
        state = irprop_step(state, grad, value)
        iterations += 1
        value = problem.value(softmax(state.rho_tilde), lam, gamma)
        if value < state.best_bound:
            state.best_bound = value
            state.stall_counter = 0
            best_rho_tilde = state.rho_tilde
        else:
            state.stall_counter += 1
    if iterations >= MAX_INNER_ITERATIONS:
        logger.debug("Inner iRProp+ loop hit its cap of %d iterations.", MAX_INNER_ITERATIONS)
    return best_rho_tilde, state.best_bound, iterations


def _alternate(problem: _BoundProblem, size: int, max_outer: int, tolerance: float) -> OptimizeResult:
    rho_tilde = np.zeros(size)
    rho = softmax(rho_tilde)
    lam, gamma = problem.update_parameters(rho, None, None)
    value = problem.value(rho, lam, gamma)
    trace = [value]
    inner_total = 0
    converged = False
    outer = 0
    while outer < max_outer:
        outer += 1
        rho_tilde, value_after_rho, inner = _descend(problem, rho_tilde, lam, gamma, value)
        inner_total += inner
        rho = softmax(rho_tilde)
        lam, gamma, new_value = _accept_parameters(problem, rho, lam, gamma, value_after_rho)
        trace.append(new_value)
        logger.debug("%s outer iteration %d: bound %.10f (lambda=%s, gamma=%s).", problem.name, outer, new_value, lam, gamma)
        improvement = value - new_value
        value = new_value
        if improvement < tolerance:
            converged = True
            break
    return _result(problem, rho, lam, gamma, trace, outer, inner_total, converged)


def _result(problem, rho, lam, gamma, trace, outer, inner_total, converged) -> OptimizeResult:
    if not converged:
        logger.warning("%s optimization stopped at the cap of %d outer iterations.", problem.name, outer)
    rho = rho / rho.sum()
    result = OptimizeResult(
        bound=problem.name,
        posterior=Posterior(rho, problem.pi),
        lam=lam,
        gamma=gamma,
        trace=trace,
        iterations=outer,
        inner_iterations=inner_total,
        converged=converged,
        initial_lambda_bound=trace[0],
        final_lambda_bound=trace[-1],
        final_kl_bound=problem.final_value(rho),
    )
    logger.info(
        "%s optimization finished after %d outer iterations: lambda-form %.6f -> %.6f, kl-form %.6f.",
        problem.name, outer, result.initial_lambda_bound, result.final_lambda_bound, result.final_kl_bound,
    )
    return result


def minimize_tnd(
    stats: LossStats, prior=None, delta: float = 0.05,
    max_outer: int = MAX_OUTER_ITERATIONS, tolerance: float = CONVERGENCE_TOLERANCE,
) -> OptimizeResult:
    """
    Minimizes the tandem bound over rho.

    Alternates iRProp+ on the softmax parameters with the closed-form lambda,
    starting from uniform rho, until an outer iteration improves the
    lambda-form bound by less than ``tolerance``.

    Args:
        stats (LossStats): Out-of-bag statistics.
        prior: Strictly positive prior (array or Posterior); uniform when omitted.
        delta (float): Confidence parameter.

    Returns:
        OptimizeResult: rho*, parameters, trace and the final kl-form bound.
    """
    _check_delta(delta)
    problem = _TandemProblem(stats, _prior(prior, stats.size), delta)
    return _alternate(problem, stats.size, max_outer, tolerance)


def minimize_dis(
    stats: LossStats, prior=None, delta: float = 0.05,
    max_outer: int = MAX_OUTER_ITERATIONS, tolerance: float = CONVERGENCE_TOLERANCE,
) -> OptimizeResult:
    """Minimizes the disagreement bound, alternating rho with closed-form lambda and gamma."""
    if not stats.is_binary:
        raise UnsupportedTaskError(f"DIS is only defined for binary classification (got {stats.n_classes} classes)")
    _check_delta(delta)
    problem = _DisagreementProblem(stats, _prior(prior, stats.size), delta)
    return _alternate(problem, stats.size, max_outer, tolerance)


def fo_posterior(gibbs, pi, lam: float, n: int) -> np.ndarray:
    """rho proportional to pi exp(-lam n L), the minimizer of E_rho[L] + KL(rho || pi)/(lam n)."""
    return softmax(np.log(pi) - lam * n * np.asarray(gibbs, dtype=np.float64))


class _FirstOrderProblem(_BoundProblem):
    name = FO

    def entry(self, rho, form, lam=None, gamma=None):
        return fo_bound(aggregate_first(self.stats, rho), self.kl(rho), self.stats.n_min_first, self.delta,
                        form=form, lam=lam)

    def update_parameters(self, rho, lam, gamma):
        n = self.stats.n_min_first
        kl_term = self.kl(rho) + math.log(2.0 * math.sqrt(n) / self.delta)
        return optimal_lambda(aggregate_first(self.stats, rho), n, kl_term), None

    def update_posterior(self, lam) -> np.ndarray:
        return fo_posterior(self.stats.gibbs, self.pi, lam, self.stats.n_min_first)


def minimize_fo(
    stats: LossStats, prior=None, delta: float = 0.05,
    max_outer: int = MAX_OUTER_ITERATIONS, tolerance: float = CONVERGENCE_TOLERANCE,
) -> OptimizeResult:
    """Minimizes the first order bound by alternating the closed-form rho and lambda updates."""
    _check_delta(delta)
    problem = _FirstOrderProblem(stats, _prior(prior, stats.size), delta)
    rho = np.full(stats.size, 1.0 / stats.size)
    lam, _ = problem.update_parameters(rho, None, None)
    value = problem.value(rho, lam)
    trace = [value]
    converged = False
    outer = 0
    while outer < max_outer:
        outer += 1
        candidate_rho = problem.update_posterior(lam)
        candidate = problem.value(candidate_rho, lam)
        if candidate <= value:
            rho, value_after_rho = candidate_rho, candidate
        else:
            value_after_rho = value
        lam, _, new_value = _accept_parameters(problem, rho, lam, None, value_after_rho)
        trace.append(new_value)
        logger.debug("FO outer iteration %d: bound %.10f (lambda=%s).", outer, new_value, lam)
        improvement = value - new_value
        value = new_value
        if improvement < tolerance:
            converged = True
            break
    return _result(problem, rho, lam, None, trace, outer, 0, converged)


MINIMIZERS = {FO: minimize_fo, TND: minimize_tnd, DIS: minimize_dis}


def minimize_bound(name: str, stats: LossStats, prior=None, delta: float = 0.05, **kwargs) -> OptimizeResult:
    """Dispatches to the minimizer of ``name`` (FO, TND or DIS)."""
    try:
        minimizer = MINIMIZERS[name]
    except KeyError:
        raise InvalidConfigError(f"{name!r} cannot be optimized; choose one of {', '.join(MINIMIZERS)}")
    logger.info("Minimizing %s over %d hypotheses (delta=%s).", name, stats.size, delta)
    return minimizer(stats, prior=prior, delta=delta, **kwargs)
