"""Scalar belief propagation for marginal data association.

Messages are kept as two ``n x m`` arrays indexed ``[i, j]``:
``mu[i, j]`` is the target-to-measurement message and ``nu[i, j]`` the
measurement-to-target message. Each full iteration recomputes every
``mu`` from the previous ``nu`` and then every ``nu`` from the new ``mu``.

Besides the solver itself this module carries the contraction machinery
used to bound and certify convergence: the log-ratio message distance,
the contraction factor ``alpha(L, c)``, a-priori iteration bounds and the
online stopping guarantee.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import (
    DomainError,
    IterationCap,
    MismatchedZeroPattern,
    NotContracting,
    ShapeMismatch,
)
from ._kernels import run_block
from .model import BeliefTable, WeightMatrix

DEFAULT_CHECK_INTERVAL = 10
DEFAULT_MAX_ITERATIONS = 10**6

AlphaRule = Literal["exp", "raw"]


@dataclass(frozen=True, eq=False)
class MessageState:
    mu: np.ndarray
    nu: np.ndarray
    iteration: int = 0

    def check(self, w: WeightMatrix, atol: float = 0.0) -> None:
        """Assert the range invariants of both message arrays."""
        psi = w.weights
        if self.mu.shape != psi.shape or self.nu.shape != psi.shape:
            raise ShapeMismatch("message arrays do not match the weight matrix")
        if np.any(self.mu < 0) or np.any(self.mu > psi * (1 + atol)):
            raise AssertionError("mu outside [0, psi]")
        if np.any((self.mu == 0) != (psi == 0)):
            raise AssertionError("mu zero pattern differs from psi")
        if np.any(self.nu <= 0) or np.any(self.nu > 1 + atol):
            raise AssertionError("nu outside (0, 1]")


@dataclass(frozen=True)
class ContractionParams:
    w_star: float
    w_sup: float
    per_row: np.ndarray
    per_col: np.ndarray


@dataclass(frozen=True)
class ConvergenceReport:
    iterations_used: int
    final_message_delta: float
    guaranteed_belief_deviation: float
    converged: bool


def update_mu(w: WeightMatrix, nu: np.ndarray) -> np.ndarray:
    """Target-to-measurement half iteration."""
    psi = w.weights
    pn = psi * nu
    s = 1.0 + pn.sum(axis=1, keepdims=True)
    # the exclusion sum is >= 0; clamp away cancellation error in s - pn
    return psi / np.maximum(s - pn, 1.0)


def update_nu(mu: np.ndarray) -> np.ndarray:
    """Measurement-to-target half iteration."""
    s = 1.0 + mu.sum(axis=0, keepdims=True)
    return 1.0 / np.maximum(s - mu, 1.0)


def iterate(w: WeightMatrix, state: MessageState, iterations: int) -> MessageState:
    """Run ``iterations`` full iterations from ``state``."""
    nu = state.nu
    mu = state.mu
    for _ in range(iterations):
        mu = update_mu(w, nu)
        nu = update_nu(mu)
    return MessageState(mu, nu, state.iteration + iterations)


def initial_state(w: WeightMatrix, nu0: np.ndarray | None = None) -> MessageState:
    nu = np.ones(w.shape) if nu0 is None else np.array(nu0, dtype=float)
    if nu.shape != w.shape:
        raise ShapeMismatch(f"initial nu has shape {nu.shape}, expected {w.shape}")
    return MessageState(np.zeros(w.shape), nu, 0)


def beliefs_from_messages(w: WeightMatrix, state: MessageState) -> BeliefTable:
    psi = w.weights
    n, m = psi.shape
    pn = psi * state.nu
    s = 1.0 + pn.sum(axis=1, keepdims=True)
    target = np.concatenate([1.0 / s, pn / s], axis=1)

    mu_t = state.mu.T
    sm = 1.0 + mu_t.sum(axis=1, keepdims=True)
    meas = np.concatenate([1.0 / sm, mu_t / sm], axis=1) if m else np.zeros((0, n + 1))
    return BeliefTable(target, meas)


# --- full-alphabet sum-product, kept as an independent check on the scalar form


def _pair_compat(a: int, b: int, i: int, j: int) -> float:
    # a, b, i, j all 1-based; 0 = unassigned
    if (a == j and b != i) or (b == i and a != j):
        return 0.0
    return 1.0


def full_update_mu(w: WeightMatrix, nu_full: np.ndarray) -> np.ndarray:
    """Target-to-measurement messages over the full alphabet of ``b^j``.

    ``nu_full[i, j, a]`` is the measurement-``j``-to-target-``i`` message at
    ``a^i = a``; the result ``mu_full[i, j, b]`` is indexed by ``b^j = b``.
    """
    psi = w.weights
    n, m = psi.shape
    mu_full = np.zeros((n, m, n + 1))
    for i in range(n):
        node = np.concatenate([[1.0], psi[i]])
        for j in range(m):
            others = np.prod(np.delete(nu_full[i], j, axis=0), axis=0)
            for b in range(n + 1):
                mu_full[i, j, b] = sum(
                    node[a] * _pair_compat(a, b, i + 1, j + 1) * others[a] for a in range(m + 1)
                )
    return mu_full


def full_update_nu(w: WeightMatrix, mu_full: np.ndarray) -> np.ndarray:
    """Measurement-to-target messages over the full alphabet of ``a^i``."""
    n, m = w.shape
    nu_full = np.zeros((n, m, m + 1))
    for j in range(m):
        for i in range(n):
            others = np.prod(np.delete(mu_full[:, j, :], i, axis=0), axis=0)
            for a in range(m + 1):
                nu_full[i, j, a] = sum(
                    _pair_compat(a, b, i + 1, j + 1) * others[b] for b in range(n + 1)
                )
    return nu_full


def full_message_update(w: WeightMatrix, nu_full: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """One unnormalised full iteration: returns ``(mu_full, nu_full)``."""
    mu_full = full_update_mu(w, nu_full)
    return mu_full, full_update_nu(w, mu_full)


def full_beliefs(w: WeightMatrix, mu_full: np.ndarray, nu_full: np.ndarray) -> BeliefTable:
    psi = w.weights
    n, m = psi.shape
    target = np.zeros((n, m + 1))
    for i in range(n):
        node = np.concatenate([[1.0], psi[i]])
        target[i] = node * np.prod(nu_full[i], axis=0)
    meas = np.zeros((m, n + 1))
    for j in range(m):
        meas[j] = np.prod(mu_full[:, j, :], axis=0)
    target /= target.sum(axis=1, keepdims=True)
    if m:
        meas /= meas.sum(axis=1, keepdims=True)
    return BeliefTable(target, meas)


def full_bp(w: WeightMatrix, tol: float = 1e-13, max_iterations: int = 100_000) -> BeliefTable:
    """Iterate the full-alphabet updates until the beliefs stop moving."""
    n, m = w.shape
    nu_full = np.ones((n, m, m + 1))
    mu_full = np.ones((n, m, n + 1))
    prev = None
    for _ in range(max_iterations):
        mu_full, nu_full = full_message_update(w, nu_full)
        mu_full /= mu_full.sum(axis=2, keepdims=True)
        nu_full /= nu_full.sum(axis=2, keepdims=True)
        cur = full_beliefs(w, mu_full, nu_full)
        if prev is not None and np.max(np.abs(cur.target_marginals - prev.target_marginals)) < tol:
            return cur
        prev = cur
    raise IterationCap("full-alphabet BP did not settle", iterations=max_iterations)


# --- contraction machinery


def message_distance(m1, m2, mask: np.ndarray | None = None) -> float:
    """Max absolute log-ratio between two message arrays (0/0 counts as 1)."""
    a = np.asarray(m1, dtype=float)
    b = np.asarray(m2, dtype=float)
    if a.shape != b.shape:
        raise ShapeMismatch(f"message shapes differ: {a.shape} vs {b.shape}")
    if mask is not None:
        a = a[mask]
        b = b[mask]
    za = a == 0
    zb = b == 0
    if np.any(za != zb):
        raise MismatchedZeroPattern("exactly one message of a pair is zero")
    keep = ~za
    if not keep.any():
        return 0.0
    return float(np.max(np.abs(np.log(a[keep] / b[keep]))))


def _alpha_at_distance(d: float, c: float) -> float:
    """alpha(exp(d), c) for d >= 0, c >= 0, stable as d -> 0."""
    if c == 0.0:
        return 0.0
    if d == 0.0:
        return c / (1.0 + c)
    if d < 1.0:
        return math.log1p(c * math.expm1(d) / (1.0 + c)) / d
    return float(np.logaddexp(0.0, math.log(c) + d) - math.log1p(c)) / d


def contraction_factor(L: float, c: float) -> float:
    """``log((1 + c L) / (1 + c)) / log L`` for ``L > 1`` and ``c > 0``."""
    if not (L > 1.0) or not math.isfinite(L):
        raise DomainError(f"contraction factor needs finite L > 1, got {L}")
    if not (c > 0.0) or not math.isfinite(c):
        raise DomainError(f"contraction factor needs finite c > 0, got {c}")
    return float(_alpha_at_distance(math.log(L), c))


def _alpha_literal(d: float, c: float) -> float:
    # the raw distance d stands in for L itself (alpha_rule="raw")
    if c == 0.0 or d == 0.0:
        return 0.0
    if d == 1.0:
        return c / (1.0 + c)
    return math.log((1.0 + c * d) / (1.0 + c)) / math.log(d)


def compute_contraction_params(w: WeightMatrix) -> ContractionParams:
    per_row = w.weights.sum(axis=1)
    per_col = w.weights.sum(axis=0)
    return ContractionParams(
        w_star=float(per_row.max()) if per_row.size else 0.0,
        w_sup=float(per_col.max()) if per_col.size else 0.0,
        per_row=per_row,
        per_col=per_col,
    )


def belief_deviation_from_message_deviation(eps: float) -> float:
    """Worst-case belief change caused by a message log-ratio deviation ``eps``."""
    if eps < 0:
        raise DomainError(f"deviation must be non-negative, got {eps}")
    return math.expm1(2.0 * eps)


def iteration_bound_closed_form(
    params: ContractionParams,
    eps: float,
    variant: Literal["combined", "mu_only", "nu_only"] = "mu_only",
) -> int:
    """Smallest iteration count ``k`` the closed-form bound certifies for deviation ``eps``.

    A zero convergence parameter means the messages never change, so the
    answer is 1.
    """
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps}")
    target = math.log(math.expm1(2.0 * eps)) if math.isfinite(eps) else math.inf
    ws, wu = params.w_star, params.w_sup
    if variant in ("combined", "mu_only"):
        if ws == 0.0:
            return 1
        lbar = 1.0 + ws
        num = target - math.log(math.log(lbar))
        den = math.log(contraction_factor(lbar, ws))
        if variant == "combined":
            if wu == 0.0:
                return 1
            den += math.log(contraction_factor(lbar, wu))
        if num >= 0:
            return 1
        return 1 + max(0, math.ceil(num / den))
    if variant == "nu_only":
        if wu == 0.0:
            return 1
        lbar = 1.0 + wu
        num = target - math.log(math.log(lbar))
        if num >= 0:
            return 1
        return max(1, math.ceil(num / math.log(contraction_factor(lbar, wu))))
    raise ValueError(f"unknown variant {variant!r}")


def iteration_bound_computable(params: ContractionParams, eps: float) -> int:
    """Tighter bound obtained by re-evaluating the contraction factor as the error shrinks."""
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps}")
    target = math.expm1(2.0 * eps) if math.isfinite(eps) else math.inf
    ws = params.w_star
    level = math.log1p(ws)
    k = 1
    while level > target:
        level *= _alpha_at_distance(level, ws)
        k += 1
    return k


def stopping_guarantee(params: ContractionParams, message_delta: float) -> float:
    """Bound on the distance to the fixed point given the last one-step message change."""
    if message_delta < 0:
        raise DomainError(f"message delta must be non-negative, got {message_delta}")
    if message_delta == 0.0:
        return 0.0
    alpha = _alpha_at_distance(message_delta, params.w_star) * _alpha_at_distance(
        message_delta, params.w_sup
    )
    if not alpha < 1.0:
        raise NotContracting(f"contraction factor {alpha} is not below one")
    return alpha / (1.0 - alpha) * message_delta


def solve_state(
    w: WeightMatrix,
    delta: float = 1e-3,
    check_interval: int = DEFAULT_CHECK_INTERVAL,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    nu0: np.ndarray | None = None,
    alpha_rule: AlphaRule = "exp",
) -> tuple[MessageState, ConvergenceReport]:
    """Iterate to the online stopping criterion and return the final messages.

    Every ``check_interval`` iterations the last one-step change ``d`` of
    ``nu`` is measured and iteration stops once ``alpha d / (1 - alpha)``
    drops below ``log(1 + delta) / 2``, which caps the deviation of every
    belief from its converged value at ``delta``. ``alpha`` uses the
    target-side convergence parameter only, evaluated at ``L = exp(d)``
    (``alpha_rule="exp"``) or, for comparison, at ``L = d`` (``"raw"``).
    """
    if not delta > 0:
        raise DomainError(f"delta must be positive, got {delta}")
    if check_interval < 1:
        raise DomainError(f"check interval must be >= 1, got {check_interval}")
    if alpha_rule not in ("exp", "raw"):
        raise ValueError(f"unknown alpha rule {alpha_rule!r}")

    psi = w.weights
    state = initial_state(w, nu0)
    mask = psi > 0
    if not mask.any():
        mu = np.zeros(psi.shape)
        return MessageState(mu, update_nu(mu), 0), ConvergenceReport(0, 0.0, 0.0, True)

    w_star = compute_contraction_params(w).w_star
    threshold = 0.5 * math.log1p(delta)
    alpha_of = _alpha_at_distance if alpha_rule == "exp" else _alpha_literal
    nu = np.array(state.nu, dtype=float, order="C")
    mu = np.zeros_like(nu)
    nu_prev = np.empty_like(nu)
    it = 0
    while True:
        run_block(psi, nu, mu, nu_prev, check_interval)
        it += check_interval

        d = message_distance(nu, nu_prev, mask)
        alpha = alpha_of(d, w_star)
        if not alpha < 1.0:
            raise NotContracting(f"contraction factor {alpha} at distance {d}")
        guarantee = alpha * d / (1.0 - alpha)
        if guarantee < threshold:
            report = ConvergenceReport(
                iterations_used=it,
                final_message_delta=d,
                guaranteed_belief_deviation=math.expm1(2.0 * guarantee),
                converged=True,
            )
            return MessageState(mu.copy(), nu.copy(), it), report
        if it >= max_iterations:
            raise IterationCap(
                f"no convergence after {it} iterations (last delta {d:.3g})",
                iterations=it,
                message_delta=d,
            )


def solve(
    w: WeightMatrix,
    delta: float = 1e-3,
    check_interval: int = DEFAULT_CHECK_INTERVAL,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    nu0: np.ndarray | None = None,
    alpha_rule: AlphaRule = "exp",
) -> tuple[BeliefTable, ConvergenceReport]:
    """Approximate marginal association probabilities by belief propagation."""
    state, report = solve_state(w, delta, check_interval, max_iterations, nu0, alpha_rule)
    return beliefs_from_messages(w, state), report
