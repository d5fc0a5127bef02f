"""Closed-form stationary distributions and average costs.

Two policy families are covered:

* age-agnostic randomized policies ``(f0, f1)`` that transmit with a fixed
  probability depending only on the current source value;
* switching policies ``(d_ma, d_fa)`` that transmit once the missed-alarm
  (resp. false-alarm) age reaches its threshold, where a threshold of 0
  means "also transmit in the corresponding synced state".

Every error branch of the induced chain is piecewise geometric in the age,
so distributions are stored as an explicit head plus an analytic geometric
tail (:class:`Branch`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .model import FalseAlarm, MissedAlarm, ModelParams, Synced, SystemState

__all__ = [
    "RandomizedPolicy",
    "SwitchingPolicy",
    "PolicyMetrics",
    "Branch",
    "StationaryDistribution",
    "psi",
    "ma_coefficients",
    "fa_coefficients",
    "synced_masses",
    "randomized_stationary",
    "randomized_metrics",
    "switching_stationary",
    "switching_metrics",
    "switching_cost_terms",
    "truncated_stationary",
    "truncated_metrics",
    "truncation_gap",
    "occupancy_rate",
    "default_horizon",
    "MAX_HORIZON",
]

MAX_HORIZON = 100_000
TAIL_TOL = 1e-12


@dataclass(frozen=True)
class RandomizedPolicy:
    """Transmit with probability ``f0`` when the source is 0 and ``f1`` when it is 1."""

    f0: float
    f1: float

    def __post_init__(self):
        for name in ("f0", "f1"):
            v = float(getattr(self, name))
            if not 0.0 < v <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1], got {v}")
            object.__setattr__(self, name, v)

    def transmit_probability(self, s: SystemState) -> float:
        return self.f0 if s.source == 0 else self.f1


@dataclass(frozen=True)
class SwitchingPolicy:
    """Two-threshold policy on the missed-alarm and false-alarm ages.

    An error state transmits iff its age is at least the branch threshold.
    A threshold of 0 additionally transmits in the synced state feeding
    that branch (``Synced(0)`` for missed alarms, ``Synced(1)`` for false
    alarms).
    """

    ma_threshold: int
    fa_threshold: int

    def __post_init__(self):
        for name in ("ma_threshold", "fa_threshold"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 0:
                raise ValueError(f"{name} must be a nonnegative integer, got {v!r}")
            object.__setattr__(self, name, int(v))

    def action(self, s: SystemState) -> int:
        if isinstance(s, MissedAlarm):
            return int(s.delta >= self.ma_threshold)
        if isinstance(s, FalseAlarm):
            return int(s.delta >= self.fa_threshold)
        threshold = self.ma_threshold if s.x == 0 else self.fa_threshold
        return int(threshold == 0)

    def transmit_probability(self, s: SystemState) -> float:
        return float(self.action(s))

    def __iter__(self):
        return iter((self.ma_threshold, self.fa_threshold))


@dataclass(frozen=True)
class PolicyMetrics:
    """Average age cost ``C``, transmission frequency ``F`` and ``L = C + lam*F``."""

    avg_cost: float
    frequency: float
    objective: float

    @classmethod
    def combine(cls, avg_cost: float, frequency: float, lam: float) -> "PolicyMetrics":
        return cls(float(avg_cost), float(frequency), float(avg_cost + lam * frequency))


# --------------------------------------------------------------------------
# distributions


@dataclass(frozen=True)
class Branch:
    """Masses of one error branch: ``head[k-1]`` is the mass at age ``k``.

    Beyond the head the masses continue geometrically,
    ``mass(H + 1 + j) = tail_start * tail_ratio**j``.  A truncated chain has
    ``tail_start == 0``.
    """

    head: np.ndarray
    tail_ratio: float
    tail_start: float

    @property
    def horizon(self) -> int:
        return len(self.head)

    def mass(self, age: int) -> float:
        if age < 1:
            raise ValueError("error ages start at 1")
        if age <= self.horizon:
            return float(self.head[age - 1])
        if self.tail_start == 0.0:
            return 0.0
        return self.tail_start * self.tail_ratio ** (age - self.horizon - 1)

    def tail_mass(self) -> float:
        if self.tail_start == 0.0:
            return 0.0
        return self.tail_start / (1.0 - self.tail_ratio)

    def total(self) -> float:
        return float(self.head.sum()) + self.tail_mass()

    def first_moment(self) -> float:
        """Sum of ``age * mass`` over all ages, tail included."""
        ages = np.arange(1, self.horizon + 1)
        head = float(ages @ self.head)
        if self.tail_start == 0.0:
            return head
        r = self.tail_ratio
        return head + self.tail_start * ((self.horizon + 1) / (1.0 - r) + r / (1.0 - r) ** 2)


def _piecewise_geometric(first: float, pre_ratio: float, switch_age: int, post_ratio: float, horizon: int) -> Branch:
    """Branch with ``mass(k) = first * pre_ratio**(k-1)`` up to ``switch_age``, then ratio ``post_ratio``."""
    ages = np.arange(1, horizon + 2, dtype=float)
    pre = np.minimum(ages, switch_age) - 1.0
    post = np.maximum(ages - switch_age, 0.0)
    with np.errstate(under="ignore"):
        masses = first * np.power(pre_ratio, pre) * np.power(post_ratio, post)
    return Branch(head=masses[:-1].copy(), tail_ratio=float(post_ratio), tail_start=float(masses[-1]))


@dataclass(frozen=True)
class StationaryDistribution:
    """Stationary law over synced states and both error branches."""

    synced0: float
    synced1: float
    ma: Branch
    fa: Branch
    truncated: bool = False

    @property
    def horizon(self) -> int:
        return max(self.ma.horizon, self.fa.horizon)

    def mass(self, s: SystemState) -> float:
        if isinstance(s, MissedAlarm):
            return self.ma.mass(s.delta)
        if isinstance(s, FalseAlarm):
            return self.fa.mass(s.delta)
        return self.synced0 if s.x == 0 else self.synced1

    def total(self) -> float:
        return self.synced0 + self.synced1 + self.ma.total() + self.fa.total()

    def tail_mass(self) -> float:
        return self.ma.tail_mass() + self.fa.tail_mass()

    def states(self, horizon: int | None = None) -> Iterator[SystemState]:
        """Enumerate ``Synced(0), Synced(1), MA(1..H), FA(1..H)``."""
        h = self.horizon if horizon is None else horizon
        yield Synced(0)
        yield Synced(1)
        for k in range(1, h + 1):
            yield MissedAlarm(k)
        for k in range(1, h + 1):
            yield FalseAlarm(k)

    def vector(self, horizon: int | None = None) -> np.ndarray:
        """Masses in :meth:`states` order (length ``2H + 2``); omitted tails are dropped."""
        h = self.horizon if horizon is None else horizon
        out = np.empty(2 * h + 2)
        out[0], out[1] = self.synced0, self.synced1
        out[2 : h + 2] = [self.ma.mass(k) for k in range(1, h + 1)]
        out[h + 2 :] = [self.fa.mass(k) for k in range(1, h + 1)]
        return out

    def expected_cost(self, params: ModelParams) -> float:
        return params.beta * self.ma.first_moment() + (1.0 - params.beta) * self.fa.first_moment()


def default_horizon(ratio: float, offset: int = 0, tol: float = TAIL_TOL) -> int:
    """Ages to enumerate so a geometric tail with this ratio falls below ``tol``."""
    if ratio <= 0.0:
        extra = 1
    else:
        extra = math.ceil(math.log(tol) / math.log(ratio))
    return int(min(offset + max(extra, 1), MAX_HORIZON))


# --------------------------------------------------------------------------
# age-agnostic randomized policies


def _randomized_parts(params: ModelParams, pol: RandomizedPolicy):
    p, q, pb, qb = params.p, params.q, params.p_bar, params.q_bar
    fa0, fa1 = params.p_s * pol.f0, params.p_s * pol.f1
    fb0, fb1 = 1.0 - fa0, 1.0 - fa1
    zeta = (p + q) * (q * fa0 + p * fa1 + (1.0 - p - q) * fa0 * fa1)
    nu00 = q * (pb * fa0 + p * fa1) * (q + qb * fa1) / zeta
    nu01 = p * q * fb1 * (q * fa0 + qb * fa1) / zeta
    nu10 = p * q * fb0 * (pb * fa0 + p * fa1) / zeta
    nu11 = p * (q * fa0 + qb * fa1) * (p + pb * fa0) / zeta
    return (nu00, nu01, nu10, nu11), (fb0, fb1)


def randomized_stationary(params: ModelParams, pol: RandomizedPolicy, horizon: int | None = None) -> StationaryDistribution:
    (nu00, _, _, nu11), (fb0, fb1) = _randomized_parts(params, pol)
    r_ma = params.q_bar * fb1
    r_fa = params.p_bar * fb0
    if horizon is None:
        horizon = max(default_horizon(r_ma), default_horizon(r_fa))
    ma = _piecewise_geometric(params.p * fb0 * nu00, r_ma, 1, r_ma, horizon)
    fa = _piecewise_geometric(params.q * fb1 * nu11, r_fa, 1, r_fa, horizon)
    return StationaryDistribution(nu00, nu11, ma, fa)


def mc1_stationary(params: ModelParams, pol: RandomizedPolicy) -> dict[tuple[int, int], float]:
    """Stationary law of the (source, estimate) pair under a randomized policy."""
    nus, _ = _randomized_parts(params, pol)
    return dict(zip([(0, 0), (0, 1), (1, 0), (1, 1)], nus))


def randomized_metrics(params: ModelParams, pol: RandomizedPolicy) -> PolicyMetrics:
    (nu00, _, _, nu11), (fb0, fb1) = _randomized_parts(params, pol)
    p, q, beta = params.p, params.q, params.beta
    cost = (
        beta * p * fb0 * nu00 / (1.0 - params.q_bar * fb1) ** 2
        + (1.0 - beta) * q * fb1 * nu11 / (1.0 - params.p_bar * fb0) ** 2
    )
    freq = (q * pol.f0 + p * pol.f1) / (p + q)
    return PolicyMetrics.combine(cost, freq, params.lam)


# --------------------------------------------------------------------------
# switching policies


def psi(params: ModelParams, x: float, y: float) -> float:
    """Normalized first moment of a branch that is geometric with ratio ``x`` below
    age ``y`` and ratio ``x * p_f`` from ``y`` on."""
    xf = x * params.p_f
    xy = x ** (y - 1)
    return (1.0 - (x + (1.0 - x) * y) * xy) / (1.0 - x) ** 2 + (xf + (1.0 - xf) * y) * xy / (1.0 - xf) ** 2


def ma_coefficients(params: ModelParams, d: int) -> tuple[float, float]:
    """``(a(1), a(d))``: missed-alarm mass from age 1 and from the threshold, per unit of ``Synced(0)`` mass.

    For ``d == 0`` the second value is the formal quantity that keeps the
    synced-state balance in the same form as for positive thresholds.
    """
    p, qb, pf = params.p, params.q_bar, params.p_f
    if d == 0:
        a1 = p * pf / (1.0 - qb * pf)
        # equals a1 / (qb * pf), written so that pf == 0 stays finite
        return a1, p / (qb * (1.0 - qb * pf))
    ad = p * qb ** (d - 1) / (1.0 - qb * pf)
    a1 = p * (1.0 - qb ** (d - 1)) / (1.0 - qb) + ad
    return a1, ad


def fa_coefficients(params: ModelParams, d: int) -> tuple[float, float]:
    """``(b(1), b(d))``, the false-alarm mirror of :func:`ma_coefficients`."""
    return ma_coefficients(params.swapped(), d)


def synced_masses(params: ModelParams, pol: SwitchingPolicy) -> tuple[float, float]:
    a1, ad = ma_coefficients(params, pol.ma_threshold)
    b1, bd = fa_coefficients(params, pol.fa_threshold)
    pb_bd = params.p_bar * bd
    qb_ad = params.q_bar * ad
    denom = (1.0 + a1) * pb_bd + (1.0 + b1) * qb_ad
    return pb_bd / denom, qb_ad / denom


def _ma_branch_terms(params: ModelParams, d: int) -> tuple[float, float]:
    """(age cost, transmission mass) of the missed-alarm side per unit of ``Synced(0)`` mass."""
    a1, ad = ma_coefficients(params, d)
    if d == 0:
        r = params.q_bar * params.p_f
        return params.beta * params.p * params.p_f / (1.0 - r) ** 2, 1.0 + a1
    return params.beta * params.p * psi(params, params.q_bar, d), ad


def switching_cost_terms(params: ModelParams, pol: SwitchingPolicy) -> dict[str, float]:
    """Per-branch pieces of the average cost; used by the search and for reporting."""
    ma_cost, ma_freq = _ma_branch_terms(params, pol.ma_threshold)
    fa_cost, fa_freq = _ma_branch_terms(params.swapped(), pol.fa_threshold)
    nu0, nu1 = synced_masses(params, pol)
    return {
        "nu000": nu0,
        "nu110": nu1,
        "ma_cost": ma_cost * nu0,
        "fa_cost": fa_cost * nu1,
        "ma_freq": ma_freq * nu0,
        "fa_freq": fa_freq * nu1,
    }


def switching_metrics(params: ModelParams, pol: SwitchingPolicy) -> PolicyMetrics:
    t = switching_cost_terms(params, pol)
    return PolicyMetrics.combine(t["ma_cost"] + t["fa_cost"], t["ma_freq"] + t["fa_freq"], params.lam)


def _switching_branch(params: ModelParams, d: int, nu_feed: float, horizon: int) -> Branch:
    p, qb, pf = params.p, params.q_bar, params.p_f
    if d == 0:
        return _piecewise_geometric(p * pf * nu_feed, qb * pf, 1, qb * pf, horizon)
    return _piecewise_geometric(p * nu_feed, qb, d, qb * pf, horizon)


def _switching_horizon(params: ModelParams, pol: SwitchingPolicy) -> int:
    h_ma = default_horizon(params.q_bar * params.p_f, pol.ma_threshold)
    h_fa = default_horizon(params.p_bar * params.p_f, pol.fa_threshold)
    return max(h_ma, h_fa)


def switching_stationary(params: ModelParams, pol: SwitchingPolicy, horizon: int | None = None) -> StationaryDistribution:
    if horizon is None:
        horizon = _switching_horizon(params, pol)
    nu0, nu1 = synced_masses(params, pol)
    ma = _switching_branch(params, pol.ma_threshold, nu0, horizon)
    fa = _switching_branch(params.swapped(), pol.fa_threshold, nu1, horizon)
    return StationaryDistribution(nu0, nu1, ma, fa)


# --------------------------------------------------------------------------
# truncated chain


def _check_truncation(pol: SwitchingPolicy, n: int):
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 2:
        raise ValueError(f"truncation size must be an integer >= 2, got {n!r}")
    if n <= max(pol.ma_threshold, pol.fa_threshold):
        raise ValueError(f"truncation size {n} must exceed both thresholds {tuple(pol)}")


def _fold(branch: Branch, n: int) -> Branch:
    head = branch.head[:n].copy() if branch.horizon >= n else np.array([branch.mass(k) for k in range(1, n + 1)])
    r = branch.tail_ratio
    head[n - 1] = r / (1.0 - r) * head[n - 2]
    return Branch(head=head, tail_ratio=0.0, tail_start=0.0)


def truncated_stationary(params: ModelParams, pol: SwitchingPolicy, n: int) -> StationaryDistribution:
    """Stationary law of the chain whose ages are clamped at ``n``.

    Interior masses coincide with the untruncated ones; the boundary age
    collects ``r / (1 - r)`` times the mass one age below, ``r`` being the
    branch's post-threshold ratio.
    """
    _check_truncation(pol, n)
    full = switching_stationary(params, pol, horizon=n)
    return StationaryDistribution(full.synced0, full.synced1, _fold(full.ma, n), _fold(full.fa, n), truncated=True)


def truncated_metrics(params: ModelParams, pol: SwitchingPolicy, n: int) -> PolicyMetrics:
    """Objective of the truncated chain, priced directly from its distribution."""
    dist = truncated_stationary(params, pol, n)
    # transmission mass: every state at or past the threshold, plus synced states with threshold 0
    freq = 0.0
    for d, branch, synced in ((pol.ma_threshold, dist.ma, dist.synced0), (pol.fa_threshold, dist.fa, dist.synced1)):
        start = max(d, 1)
        freq += float(branch.head[start - 1 :].sum())
        if d == 0:
            freq += synced
    return PolicyMetrics.combine(dist.expected_cost(params), freq, params.lam)


def truncation_gap(params: ModelParams, pol: SwitchingPolicy, n: int) -> float:
    """Exact objective lost by clamping ages at ``n``: ``L(pol) - L(pol, n)``."""
    _check_truncation(pol, n)
    nu0, nu1 = synced_masses(params, pol)
    p, q, pb, qb, pf, beta = params.p, params.q, params.p_bar, params.q_bar, params.p_f, params.beta
    d_ma, d_fa = pol
    ma = beta * nu0 * p * qb**n * pf ** (n - d_ma + 1) / (1.0 - qb * pf) ** 2
    fa = (1.0 - beta) * nu1 * q * pb**n * pf ** (n - d_fa + 1) / (1.0 - pb * pf) ** 2
    return ma + fa


def occupancy_rate(dist: StationaryDistribution, error_class: str) -> float:
    """Long-run fraction of slots spent in missed-alarm (``"MA"``) or false-alarm (``"FA"``) errors."""
    key = error_class.upper()
    if key == "MA":
        return dist.ma.total()
    if key == "FA":
        return dist.fa.total()
    raise ValueError(f"error class must be 'MA' or 'FA', got {error_class!r}")
