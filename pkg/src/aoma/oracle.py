"""Brute-force reference: stationary law of a truncated chain by direct linear solve.

Nothing here uses the closed forms; the chain is assembled from the
one-step kernel and solved numerically.
"""

from __future__ import annotations

import numpy as np

from .analytic import PolicyMetrics
from .mdp import TruncatedMdp, build_truncated_mdp
from .model import ModelParams, stage_cost

__all__ = ["solve_stationary", "policy_vector", "OracleResult", "oracle_solve"]


def solve_stationary(P: np.ndarray) -> np.ndarray:
    """Solve ``nu P = nu``, ``sum(nu) = 1`` for an irreducible stochastic matrix."""
    n = P.shape[0]
    A = P.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    return np.linalg.solve(A, b)


def policy_vector(mdp: TruncatedMdp, policy) -> np.ndarray:
    """Per-state transmit probability of any policy exposing ``transmit_probability``."""
    return np.array([policy.transmit_probability(s) for s in mdp.states], dtype=float)


class OracleResult:
    def __init__(self, mdp: TruncatedMdp, nu: np.ndarray, action_prob: np.ndarray):
        self.mdp = mdp
        self.nu = nu
        self.action_prob = action_prob

    @property
    def n(self) -> int:
        return self.mdp.n

    def mass(self, s) -> float:
        return float(self.nu[self.mdp.index(s)])

    def metrics(self) -> PolicyMetrics:
        params = self.mdp.params
        ages = np.array([stage_cost(params, s) for s in self.mdp.states])
        return PolicyMetrics.combine(float(self.nu @ ages), float(self.nu @ self.action_prob), params.lam)

    def transmit_mass(self) -> float:
        return float(self.nu @ self.action_prob)


def oracle_solve(params: ModelParams, policy, n: int) -> OracleResult:
    mdp = build_truncated_mdp(params, n)
    prob = policy_vector(mdp, policy)
    nu = solve_stationary(mdp.matrix(prob))
    return OracleResult(mdp, nu, prob)
