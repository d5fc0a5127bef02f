"""Policy search over the two-threshold switching family.

The objective along a slice with the false-alarm threshold fixed is a ratio
``g(x) / h(x)`` of smooth functions of the missed-alarm threshold ``x``.
Its derivative is positive from an explicit turn point onwards, so each
slice only needs to be scanned up to that point.  The mirrored slices are
obtained by relabelling the source states (see :meth:`ModelParams.swapped`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .analytic import (
    PolicyMetrics,
    SwitchingPolicy,
    fa_coefficients,
    psi,
    switching_metrics,
)
from .model import ModelParams

__all__ = [
    "SliceBound",
    "SearchResult",
    "SearchError",
    "slice_turn_point",
    "slice_objective",
    "sigma_bound",
    "choose_truncation",
    "algorithm1",
    "symmetric_search",
    "exhaustive_search",
]


class SearchError(RuntimeError):
    pass


@dataclass(frozen=True)
class SliceBound:
    """Turn point of one slice and the coefficients it was derived from.

    With ``x`` the free threshold, ``g'(x) = (alpha0 + alpha1 x) r**(x-1)``
    and ``h'(x) = alpha2 r**(x-1)``, where ``r`` is the free branch's
    pre-threshold persistence probability.
    """

    fixed_threshold: int
    turn_point: float
    alpha0: float
    alpha1: float
    alpha2: float
    axis: str = "fa"

    @property
    def scan_limit(self) -> float:
        return math.ceil(self.turn_point) if math.isfinite(self.turn_point) else math.inf


@dataclass(frozen=True)
class SearchResult:
    best_policy: SwitchingPolicy
    best_metrics: PolicyMetrics
    evaluations: int
    candidate_set_size: int
    n: int
    sigma_bound: float
    family_restricted: bool = False


def _slice_parts(params: ModelParams, fa_threshold: int):
    """Constants of the ``g/h`` decomposition for a fixed false-alarm threshold >= 1."""
    b1, bd = fa_coefficients(params, fa_threshold)
    swapped = params.swapped()
    fa_psi = psi(swapped, swapped.q_bar, fa_threshold)
    k = params.lam * (params.p_bar + params.q_bar) * bd + (1.0 - params.beta) * params.q * params.q_bar * fa_psi
    return b1, bd, k


def slice_objective(params: ModelParams, x: float, fa_threshold: int) -> tuple[float, float]:
    """``(g(x), h(x))`` for a real missed-alarm threshold ``x >= 1``; ``g/h`` is the objective."""
    p, pb, qb, pf, beta = params.p, params.p_bar, params.q_bar, params.p_f, params.beta
    b1, bd, k = _slice_parts(params, fa_threshold)
    a_x = p * qb ** (x - 1) / (1.0 - qb * pf)
    zeta_x = p * (1.0 - qb ** (x - 1)) / (1.0 - qb)
    g = beta * p * pb * bd * psi(params, qb, x) + k * a_x
    h = pb * bd * (1.0 + zeta_x) + (qb * (1.0 + b1) + pb * bd) * a_x
    return g, h


def slice_turn_point(params: ModelParams, fixed: str, value: int) -> SliceBound:
    """Turn point of the slice with the ``fixed`` threshold (``"fa"`` or ``"ma"``) held at ``value``.

    For ``fixed="fa"`` the objective is increasing in the missed-alarm
    threshold beyond the returned point; ``fixed="ma"`` is the mirror image.
    """
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ValueError(f"slice threshold must be an integer >= 1, got {value!r}")
    axis = fixed.lower()
    if axis == "ma":
        bound = slice_turn_point(params.swapped(), "fa", value)
        return SliceBound(value, bound.turn_point, bound.alpha0, bound.alpha1, bound.alpha2, axis="ma")
    if axis != "fa":
        raise ValueError(f"fixed axis must be 'fa' or 'ma', got {fixed!r}")

    p, pb, qb, ps, pf, beta = params.p, params.p_bar, params.q_bar, params.p_s, params.p_f, params.beta
    b1, bd, k = _slice_parts(params, value)
    ln_qb = math.log(qb)
    r_f = 1.0 - qb * pf
    psi_c0 = -qb * ps / ((1.0 - qb) * r_f) + qb * pf * ln_qb / r_f**2 - qb * ln_qb / (1.0 - qb) ** 2
    psi_c1 = -qb * ps * ln_qb / ((1.0 - qb) * r_f)
    alpha0 = k * p * ln_qb / r_f + beta * p * pb * bd * psi_c0
    alpha1 = beta * p * pb * bd * psi_c1
    alpha2 = p * qb * ln_qb / r_f * ((1.0 + b1) - pb * bd * ps / (1.0 - qb))

    if alpha0 >= 0.0:
        turn = 1.0
    elif alpha1 > 0.0:
        turn = max(1.0, -alpha0 / alpha1)
    else:
        # beta == 0: the slice may decrease indefinitely
        turn = math.inf
    return SliceBound(value, turn, alpha0, alpha1, alpha2, axis="fa")


def sigma_bound(params: ModelParams, n: int) -> float:
    """Upper bound on the truncation gap of every switching policy with thresholds below ``n``.

    Uses synced masses <= 1 and the largest admissible threshold, which
    leaves the factor ``p_f**2``.
    """
    pf2 = params.p_f**2
    ma = params.beta * params.p * params.q_bar**n * pf2 / (1.0 - params.q_bar * params.p_f) ** 2
    fa = (1.0 - params.beta) * params.q * params.p_bar**n * pf2 / (1.0 - params.p_bar * params.p_f) ** 2
    return ma + fa


def choose_truncation(params: ModelParams, epsilon: float, n_max: int, n_min: int = 2) -> int:
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    for n in range(max(2, n_min), n_max + 1):
        if sigma_bound(params, n) < epsilon:
            return n
    raise SearchError(f"no truncation size <= {n_max} brings the truncation gap below {epsilon:g}")


def _scan(params: ModelParams, n: int) -> tuple[tuple[float, int, int], int, int]:
    # per-axis limits: x <= ceil(x*_y) on the slice y, y <= ceil(y*_x) on the slice x
    x_limit = {y: slice_turn_point(params, "fa", y).scan_limit for y in range(1, n + 1)}
    y_limit = {x: slice_turn_point(params, "ma", x).scan_limit for x in range(1, n + 1)}

    best = None
    evaluations = 0
    candidates = 0
    for y in range(n + 1):
        for x in range(n + 1):
            if x >= 1 and y >= 1:
                if x > x_limit[y]:
                    break
                if y > y_limit[x]:
                    continue
            candidates += 1
            L = switching_metrics(params, SwitchingPolicy(x, y)).objective
            evaluations += 1
            key = (L, x, y)
            if best is None or key < best:
                best = key
    return best, evaluations, candidates


def algorithm1(params: ModelParams, epsilon: float = 1e-10, n_max: int = 5000, n_min: int = 2) -> SearchResult:
    """Minimize the average cost over switching policies with thresholds in ``{0..N}``.

    ``N`` is the smallest size whose truncation-gap bound is below
    ``epsilon``.  If the minimizer sits on the edge of the grid, ``N`` is
    doubled (up to ``n_max``) and the scan repeated.
    """
    n = choose_truncation(params, epsilon, n_max, n_min)
    while True:
        (L, x, y), evaluations, candidates = _scan(params, n)
        if max(x, y) < n:
            break
        if n >= n_max:
            raise SearchError(f"minimizer {(x, y)} reaches the search edge at N={n_max}")
        n = min(2 * n, n_max)
    policy = SwitchingPolicy(x, y)
    return SearchResult(
        best_policy=policy,
        best_metrics=switching_metrics(params, policy),
        evaluations=evaluations,
        candidate_set_size=candidates,
        n=n,
        sigma_bound=sigma_bound(params, n),
        family_restricted=params.p > params.q_bar,
    )


def symmetric_search(params: ModelParams, epsilon: float = 1e-10, n_max: int = 5000, n_min: int = 2) -> SearchResult:
    """Search identical thresholds only; valid for a symmetric, non-prioritized source."""
    if not math.isclose(params.p, params.q, rel_tol=0.0, abs_tol=1e-15) or params.beta != 0.5:
        raise ValueError(f"diagonal search needs p == q and beta == 0.5, got p={params.p}, q={params.q}, beta={params.beta}")
    n = choose_truncation(params, epsilon, n_max, n_min)
    while True:
        best = min((switching_metrics(params, SwitchingPolicy(x, x)).objective, x) for x in range(n + 1))
        if best[1] < n:
            break
        if n >= n_max:
            raise SearchError(f"diagonal minimizer reaches the search edge at N={n_max}")
        n = min(2 * n, n_max)
    policy = SwitchingPolicy(best[1], best[1])
    return SearchResult(policy, switching_metrics(params, policy), n + 1, n + 1, n, sigma_bound(params, n))


def exhaustive_search(params: ModelParams, n: int, diagonal: bool = False) -> SearchResult:
    """Evaluate every policy in ``{0..n}^2`` (or its diagonal). Reference for tests and reports."""
    if diagonal:
        pairs = [(x, x) for x in range(n + 1)]
    else:
        pairs = [(x, y) for y in range(n + 1) for x in range(n + 1)]
    L, x, y = min((switching_metrics(params, SwitchingPolicy(x, y)).objective, x, y) for x, y in pairs)
    policy = SwitchingPolicy(x, y)
    return SearchResult(policy, switching_metrics(params, policy), len(pairs), len(pairs), n, sigma_bound(params, n))
