"""Finite truncated MDP and its relative value iteration solver.

Ages are clamped at ``N``: a persistent error at age ``N`` stays at age ``N``.
States are indexed as ``Synced(0), Synced(1), MA(1..N), FA(1..N)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .analytic import SwitchingPolicy
from .model import (
    FalseAlarm,
    MissedAlarm,
    ModelParams,
    Synced,
    SystemState,
    stage_cost,
    transition_kernel,
)

__all__ = [
    "TruncatedMdp",
    "ValueFunction",
    "PolicyTable",
    "StructureReport",
    "RviNotConverged",
    "truncated_states",
    "clamp_state",
    "build_truncated_mdp",
    "rvi_solve",
    "q_values",
    "check_switching_structure",
]

log = logging.getLogger(__name__)


class RviNotConverged(RuntimeError):
    def __init__(self, span: float, iterations: int):
        super().__init__(f"relative value iteration stopped after {iterations} sweeps with span {span:.3e}")
        self.span = span
        self.iterations = iterations


def truncated_states(n: int) -> list[SystemState]:
    return [Synced(0), Synced(1)] + [MissedAlarm(k) for k in range(1, n + 1)] + [FalseAlarm(k) for k in range(1, n + 1)]


def clamp_state(s: SystemState, n: int) -> SystemState:
    if isinstance(s, MissedAlarm) and s.delta > n:
        return MissedAlarm(n)
    if isinstance(s, FalseAlarm) and s.delta > n:
        return FalseAlarm(n)
    return s


def state_index(s: SystemState, n: int) -> int:
    s = clamp_state(s, n)
    if isinstance(s, MissedAlarm):
        return 1 + s.delta
    if isinstance(s, FalseAlarm):
        return 1 + n + s.delta
    return s.x


@dataclass(frozen=True, eq=False)
class TruncatedMdp:
    """Kernel rows as index/probability arrays of shape ``(2N+2, 2, 3)``; costs ``(2N+2, 2)``."""

    params: ModelParams
    n: int
    states: list
    next_index: np.ndarray
    next_prob: np.ndarray
    cost: np.ndarray

    @property
    def num_states(self) -> int:
        return len(self.states)

    def index(self, s: SystemState) -> int:
        return state_index(s, self.n)

    def row(self, s: SystemState, a: int) -> dict[SystemState, float]:
        """Transition law from ``s`` under ``a`` with coincident targets merged."""
        i = self.index(s)
        out: dict[SystemState, float] = {}
        for j, pr in zip(self.next_index[i, a], self.next_prob[i, a]):
            target = self.states[j]
            out[target] = out.get(target, 0.0) + float(pr)
        return out

    def matrix(self, action_prob: np.ndarray) -> np.ndarray:
        """Dense transition matrix of the chain induced by per-state transmit probabilities."""
        s = self.num_states
        P = np.zeros((s, s))
        rows = np.arange(s)
        for a, weight in ((0, 1.0 - action_prob), (1, action_prob)):
            for j in range(3):
                np.add.at(P, (rows, self.next_index[:, a, j]), weight * self.next_prob[:, a, j])
        return P


def build_truncated_mdp(params: ModelParams, n: int) -> TruncatedMdp:
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 2:
        raise ValueError(f"truncation size must be an integer >= 2, got {n!r}")
    n = int(n)
    states = truncated_states(n)
    size = len(states)
    next_index = np.zeros((size, 2, 3), dtype=np.int64)
    next_prob = np.zeros((size, 2, 3))
    cost = np.zeros((size, 2))
    for i, s in enumerate(states):
        for a in (0, 1):
            entries = transition_kernel(params, s, a)
            # two-entry rows are padded with a zero-probability self reference
            padded = entries + [(s, 0.0)] * (3 - len(entries))
            total = 0.0
            for j, (target, prob) in enumerate(padded):
                target = clamp_state(target, n)
                next_index[i, a, j] = state_index(target, n)
                next_prob[i, a, j] = prob
                total += prob * stage_cost(params, target)
            cost[i, a] = total + params.lam * a
    return TruncatedMdp(params, n, states, next_index, next_prob, cost)


@dataclass(frozen=True, eq=False)
class ValueFunction:
    h: np.ndarray
    rho: float
    rho_lower: float
    rho_upper: float
    iterations: int
    span: float


@dataclass(frozen=True, eq=False)
class PolicyTable:
    """Deterministic action per truncated state; ages beyond ``n`` reuse the age-``n`` action."""

    n: int
    actions: np.ndarray = field(repr=False)

    def __post_init__(self):
        if len(self.actions) != 2 * self.n + 2:
            raise ValueError(f"expected {2 * self.n + 2} actions, got {len(self.actions)}")

    def action(self, s: SystemState) -> int:
        return int(self.actions[state_index(s, self.n)])

    def transmit_probability(self, s: SystemState) -> float:
        return float(self.action(s))

    @classmethod
    def from_policy(cls, policy, n: int) -> "PolicyTable":
        acts = np.array([int(round(policy.transmit_probability(s))) for s in truncated_states(n)], dtype=np.int8)
        return cls(n, acts)

    def ma_sequence(self) -> np.ndarray:
        """Actions along ``Synced(0), MA(1), ..., MA(n)``."""
        return np.concatenate([self.actions[:1], self.actions[2 : self.n + 2]])

    def fa_sequence(self) -> np.ndarray:
        return np.concatenate([self.actions[1:2], self.actions[self.n + 2 :]])


def q_values(mdp: TruncatedMdp, h: np.ndarray) -> np.ndarray:
    return mdp.cost + np.einsum("sak,sak->sa", mdp.next_prob, h[mdp.next_index])


def _greedy(q: np.ndarray) -> np.ndarray:
    # prefer idling unless transmitting is strictly cheaper beyond rounding noise
    margin = 1e-12 * (1.0 + np.abs(q[:, 0]))
    return (q[:, 1] < q[:, 0] - margin).astype(np.int8)


def rvi_solve(
    mdp: TruncatedMdp,
    tol: float = 1e-10,
    max_iter: int = 1_000_000,
    reference: SystemState = Synced(0),
) -> tuple[ValueFunction, PolicyTable]:
    """Synchronous relative value iteration with a span-seminorm stopping rule."""
    if tol <= 0 or max_iter < 1:
        raise ValueError("tol must be positive and max_iter at least 1")
    ref = mdp.index(reference)
    h = np.zeros(mdp.num_states)
    span = np.inf
    for it in range(1, max_iter + 1):
        th = q_values(mdp, h).min(axis=1)
        diff = th - h
        lo, hi = float(diff.min()), float(diff.max())
        span = hi - lo
        h = th - th[ref]
        if span < tol:
            break
    else:
        raise RviNotConverged(span, max_iter)
    log.debug("RVI converged after %d sweeps (span %.3e)", it, span)
    policy = PolicyTable(mdp.n, _greedy(q_values(mdp, h)))
    rho = 0.5 * (lo + hi)
    return ValueFunction(h, rho, lo, hi, it, span), policy


@dataclass(frozen=True)
class StructureReport:
    """Monotonicity of a policy table along each error branch.

    A branch is monotone when its transmit set is an up-set along
    ``synced, age 1, age 2, ...``.  ``*_threshold`` is the first position
    that transmits (0 for the synced state) or ``None`` if none does.
    """

    ma_monotone: bool
    fa_monotone: bool
    ma_threshold: int | None
    fa_threshold: int | None
    synced0_action: int
    synced1_action: int
    ma_errors_monotone: bool
    fa_errors_monotone: bool

    @property
    def is_switching(self) -> bool:
        return self.ma_monotone and self.fa_monotone

    def as_policy(self) -> SwitchingPolicy | None:
        if not self.is_switching or self.ma_threshold is None or self.fa_threshold is None:
            return None
        return SwitchingPolicy(self.ma_threshold, self.fa_threshold)


def _upset(seq: np.ndarray) -> bool:
    on = np.flatnonzero(seq)
    return on.size == 0 or bool(seq[on[0] :].all())


def _first_on(seq: np.ndarray) -> int | None:
    on = np.flatnonzero(seq)
    return int(on[0]) if on.size else None


def check_switching_structure(policy: PolicyTable) -> StructureReport:
    ma, fa = policy.ma_sequence(), policy.fa_sequence()
    return StructureReport(
        ma_monotone=_upset(ma),
        fa_monotone=_upset(fa),
        ma_threshold=_first_on(ma),
        fa_threshold=_first_on(fa),
        synced0_action=int(ma[0]),
        synced1_action=int(fa[0]),
        ma_errors_monotone=_upset(ma[1:]),
        fa_errors_monotone=_upset(fa[1:]),
    )
