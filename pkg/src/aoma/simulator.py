"""Monte Carlo trajectories of the remote estimation loop.

Source moves, channel outcomes and randomized-policy coin flips come from
three generators spawned from one seed, so changing the policy leaves the
source and channel sample paths untouched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .analytic import PolicyMetrics, RandomizedPolicy, StationaryDistribution, SwitchingPolicy
from .mdp import PolicyTable
from .model import FalseAlarm, MissedAlarm, ModelParams, Synced, SystemState

__all__ = [
    "SimConfig",
    "EmpiricalReport",
    "SimulationError",
    "simulate",
    "performance_gap",
    "kl_policy_distance",
]

CHUNK = 1 << 20


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SimConfig:
    horizon: int = 10_000_000
    seed: int = 0
    burn_in: int = 10_000
    batches: int = 100
    histogram_horizon: int = 200

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("simulation horizon must be positive")
        if not 0 <= self.burn_in < self.horizon:
            raise ValueError("burn-in must satisfy 0 <= burn_in < horizon")
        if self.batches < 2 or (self.horizon - self.burn_in) < self.batches:
            raise ValueError("need at least two batches and one slot per batch")
        if self.histogram_horizon < 1:
            raise ValueError("histogram horizon must be positive")


@dataclass(frozen=True, eq=False)
class EmpiricalReport:
    """Time averages after burn-in, with batch-means standard errors.

    ``histogram`` is laid out as ``Synced(0), Synced(1), MA(1..H), FA(1..H),
    MA(>H), FA(>H)``.
    """

    metrics: PolicyMetrics
    standard_errors: dict
    histogram: np.ndarray
    histogram_se: np.ndarray
    histogram_horizon: int
    slots: int
    transmissions: int

    def _bin(self, s: SystemState) -> int:
        h = self.histogram_horizon
        if isinstance(s, MissedAlarm):
            return 1 + s.delta if s.delta <= h else 2 * h + 2
        if isinstance(s, FalseAlarm):
            return 1 + h + s.delta if s.delta <= h else 2 * h + 3
        return s.x

    def mass(self, s: SystemState) -> float:
        return float(self.histogram[self._bin(s)])

    def mass_se(self, s: SystemState) -> float:
        return float(self.histogram_se[self._bin(s)])


def _branch_tables(policy, k: int) -> tuple[np.ndarray, np.ndarray]:
    ma = [policy.transmit_probability(Synced(0))] + [policy.transmit_probability(MissedAlarm(d)) for d in range(1, k + 1)]
    fa = [policy.transmit_probability(Synced(1))] + [policy.transmit_probability(FalseAlarm(d)) for d in range(1, k + 1)]
    return np.asarray(ma, dtype=float), np.asarray(fa, dtype=float)


def _policy_tables(policy) -> tuple[np.ndarray, np.ndarray]:
    """Transmit probability by branch position (0 = synced, k = age k); the last entry covers all older ages."""
    if isinstance(policy, SwitchingPolicy):
        return _branch_tables(policy, max(policy.ma_threshold, policy.fa_threshold) + 1)
    if isinstance(policy, RandomizedPolicy):
        return _branch_tables(policy, 1)
    if isinstance(policy, PolicyTable):
        return policy.ma_sequence().astype(float), policy.fa_sequence().astype(float)
    raise TypeError(f"unsupported policy type {type(policy).__name__}")


@numba.njit(cache=True)
def _advance(
    p, q, p_s, beta, lam,
    ma_prob, fa_prob,
    u_src, u_ch, u_pol,
    state, t0, burn_in, batch_len, batches, hist_h,
    batch_cost, batch_tx, batch_hist, hist, totals,
):  # fmt: skip
    x, xh, age = state[0], state[1], state[2]
    k_ma = ma_prob.shape[0] - 1
    k_fa = fa_prob.shape[0] - 1
    for i in range(u_src.shape[0]):
        t = t0 + i
        # mutual exclusion of the two ages is encoded by (x, xh, age); check it stays consistent
        if (x == xh) != (age == 0):
            return -1
        if x == xh:
            prob = ma_prob[0] if x == 0 else fa_prob[0]
        elif x == 1:
            prob = ma_prob[min(age, k_ma)]
        else:
            prob = fa_prob[min(age, k_fa)]
        a = 1 if u_pol[i] < prob else 0

        if x == 0:
            nx = 1 if u_src[i] < p else 0
        else:
            nx = 0 if u_src[i] < q else 1
        nxh = xh
        if a == 1 and u_ch[i] < p_s:
            nxh = nx
        nage = age + 1 if nx != nxh else 0

        if t >= burn_in:
            j = t - burn_in
            if nx == 1 and nxh == 0:
                c = beta * nage
            elif nx == 0 and nxh == 1:
                c = (1.0 - beta) * nage
            else:
                c = 0.0
            if x == xh:
                b = x
            elif x == 1:
                b = 1 + age if age <= hist_h else 2 * hist_h + 2
            else:
                b = 1 + hist_h + age if age <= hist_h else 2 * hist_h + 3
            hist[b] += 1
            totals[0] += c
            totals[1] += a
            bi = j // batch_len
            if bi < batches:
                batch_cost[bi] += c
                batch_tx[bi] += a
                batch_hist[bi, b] += 1
        x, xh, age = nx, nxh, nage
    state[0], state[1], state[2] = x, xh, age
    return 0


def _batch_se(values: np.ndarray) -> np.ndarray:
    return values.std(axis=0, ddof=1) / math.sqrt(values.shape[0])


def simulate(params: ModelParams, policy, cfg: SimConfig = SimConfig()) -> EmpiricalReport:
    """Run ``cfg.horizon`` slots from ``Synced(0)`` and time-average after burn-in."""
    ma_prob, fa_prob = _policy_tables(policy)
    if np.any(np.isnan(ma_prob)) or np.any(np.isnan(fa_prob)):
        raise SimulationError("policy is undefined on part of the state space")

    src_rng, ch_rng, pol_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(3))
    measured = cfg.horizon - cfg.burn_in
    batch_len = measured // cfg.batches
    h = cfg.histogram_horizon
    nbins = 2 * h + 4

    state = np.zeros(3, dtype=np.int64)
    batch_cost = np.zeros(cfg.batches)
    batch_tx = np.zeros(cfg.batches)
    batch_hist = np.zeros((cfg.batches, nbins))
    hist = np.zeros(nbins, dtype=np.int64)
    totals = np.zeros(2)

    t = 0
    while t < cfg.horizon:
        m = min(CHUNK, cfg.horizon - t)
        status = _advance(
            params.p, params.q, params.p_s, params.beta, params.lam,
            ma_prob, fa_prob,
            src_rng.random(m), ch_rng.random(m), pol_rng.random(m),
            state, t, cfg.burn_in, batch_len, cfg.batches, h,
            batch_cost, batch_tx, batch_hist, hist, totals,
        )  # fmt: skip
        if status != 0:
            raise SimulationError("reached a state with inconsistent ages")
        t += m

    transmissions = int(totals[1])
    metrics = PolicyMetrics.combine(totals[0] / measured, transmissions / measured, params.lam)
    cost_means = batch_cost / batch_len
    tx_means = batch_tx / batch_len
    se = {
        "avg_cost": float(_batch_se(cost_means)),
        "frequency": float(_batch_se(tx_means)),
        "objective": float(_batch_se(cost_means + params.lam * tx_means)),
    }
    return EmpiricalReport(
        metrics=metrics,
        standard_errors=se,
        histogram=hist / measured,
        histogram_se=_batch_se(batch_hist / batch_len),
        histogram_horizon=h,
        slots=measured,
        transmissions=transmissions,
    )


def performance_gap(metrics_pi: PolicyMetrics, metrics_opt: PolicyMetrics) -> float:
    """Excess objective of a policy over the optimum."""
    return metrics_pi.objective - metrics_opt.objective


def kl_policy_distance(dist_pi: StationaryDistribution, dist_opt: StationaryDistribution) -> float:
    """KL divergence of ``dist_pi`` from ``dist_opt`` over their common enumerated states."""
    if dist_pi.horizon != dist_opt.horizon:
        raise ValueError(f"distributions enumerate different horizons: {dist_pi.horizon} vs {dist_opt.horizon}")
    a = dist_pi.vector()
    b = dist_opt.vector()
    support = a > 0.0
    if np.any(b[support] <= 0.0):
        return math.inf
    return float(np.sum(a[support] * np.log(a[support] / b[support])))
