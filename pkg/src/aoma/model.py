"""System model: source/channel parameters, states, controlled kernel and costs.

A state is one of three immutable values:

* ``Synced(x)``       -- source and estimate agree on ``x``; both ages are 0.
* ``MissedAlarm(d)``  -- source is 1, estimate is 0, for ``d`` consecutive slots.
* ``FalseAlarm(d)``   -- source is 0, estimate is 1, for ``d`` consecutive slots.

Transmission decisions take effect one slot later: transmitting at ``t``
delivers the sample ``X_{t+1}`` with probability ``p_s``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Union

__all__ = [
    "ModelParams",
    "Synced",
    "MissedAlarm",
    "FalseAlarm",
    "SystemState",
    "TransitionEntry",
    "SYNCED_0",
    "SYNCED_1",
    "transition_kernel",
    "stage_cost",
    "expected_stage_cost",
    "closed_form_expected_cost",
]


@dataclass(frozen=True)
class ModelParams:
    """Source transition probabilities, channel success rate and cost weights.

    ``p`` is the normal->alarm probability, ``q`` alarm->normal, ``p_s``
    the channel success probability, ``beta`` the missed-alarm weight and
    ``lam`` the price of one transmission.
    """

    p: float
    q: float
    p_s: float
    beta: float = 0.5
    lam: float = 0.0

    def __post_init__(self):
        for name in ("p", "q", "p_s", "beta", "lam"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or math.isnan(value):
                raise ValueError(f"{name} must be a real number, got {value!r}")
            object.__setattr__(self, name, float(value))
        if not (0.0 < self.p < 1.0 and 0.0 < self.q < 1.0):
            raise ValueError(f"need 0 < p, q < 1 (irreducible source), got p={self.p}, q={self.q}")
        if not 0.0 < self.p_s <= 1.0:
            raise ValueError(f"need 0 < p_s <= 1, got {self.p_s}")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"need 0 <= beta <= 1, got {self.beta}")
        if not (self.lam >= 0.0 and math.isfinite(self.lam)):
            raise ValueError(f"need finite lambda >= 0, got {self.lam}")

    @property
    def p_bar(self) -> float:
        return 1.0 - self.p

    @property
    def q_bar(self) -> float:
        return 1.0 - self.q

    @property
    def p_f(self) -> float:
        return 1.0 - self.p_s

    @property
    def nu0(self) -> float:
        """Stationary probability of the normal source state."""
        return self.q / (self.p + self.q)

    @property
    def nu1(self) -> float:
        return self.p / (self.p + self.q)

    @property
    def positively_correlated(self) -> bool:
        return self.p < self.q_bar

    @property
    def symmetric(self) -> bool:
        return self.p == self.q

    def swapped(self) -> "ModelParams":
        """The same system with the roles of source states 0 and 1 exchanged.

        Under this relabelling missed alarms become false alarms, so a
        policy ``(d_ma, d_fa)`` here behaves like ``(d_fa, d_ma)`` there.
        """
        return ModelParams(self.q, self.p, self.p_s, 1.0 - self.beta, self.lam)

    def replace(self, **changes) -> "ModelParams":
        values = dict(p=self.p, q=self.q, p_s=self.p_s, beta=self.beta, lam=self.lam)
        values.update(changes)
        return ModelParams(**values)


def _check_age(delta):
    if isinstance(delta, bool) or not isinstance(delta, int) or delta < 1:
        raise ValueError(f"error age must be a positive integer, got {delta!r}")


@dataclass(frozen=True, order=True)
class Synced:
    x: int

    def __post_init__(self):
        if self.x not in (0, 1):
            raise ValueError(f"source value must be 0 or 1, got {self.x!r}")

    @property
    def source(self) -> int:
        return self.x

    @property
    def estimate(self) -> int:
        return self.x

    @property
    def age(self) -> int:
        return 0


@dataclass(frozen=True, order=True)
class MissedAlarm:
    delta: int
    source: int = field(default=1, init=False, repr=False, compare=False)
    estimate: int = field(default=0, init=False, repr=False, compare=False)

    def __post_init__(self):
        _check_age(self.delta)

    @property
    def age(self) -> int:
        return self.delta


@dataclass(frozen=True, order=True)
class FalseAlarm:
    delta: int
    source: int = field(default=0, init=False, repr=False, compare=False)
    estimate: int = field(default=1, init=False, repr=False, compare=False)

    def __post_init__(self):
        _check_age(self.delta)

    @property
    def age(self) -> int:
        return self.delta


SystemState = Union[Synced, MissedAlarm, FalseAlarm]

SYNCED_0 = Synced(0)
SYNCED_1 = Synced(1)


class TransitionEntry(NamedTuple):
    next_state: SystemState
    probability: float


def _error_state(source: int, age: int) -> SystemState:
    return MissedAlarm(age) if source == 1 else FalseAlarm(age)


def transition_kernel(params: ModelParams, s: SystemState, a: int | bool) -> list[TransitionEntry]:
    """Support of the one-step transition law from ``s`` under action ``a``.

    Entries with probability zero (for instance error persistence under
    transmission when ``p_s == 1``) are kept so the support shape does not
    depend on the parameter values.
    """
    a = int(a)
    if a not in (0, 1):
        raise ValueError(f"action must be 0 or 1, got {a!r}")
    x, x_hat, age = s.source, s.estimate, s.age
    # Q[x][k]
    stay = params.p_bar if x == 0 else params.q_bar
    move = params.p if x == 0 else params.q
    row = {x: stay, 1 - x: move}

    out: list[TransitionEntry] = []
    for k in (0, 1):
        prob = row[k]
        if k == x_hat:
            out.append(TransitionEntry(Synced(k), prob))
        elif a == 1:
            out.append(TransitionEntry(Synced(k), prob * params.p_s))
            out.append(TransitionEntry(_error_state(k, age + 1), prob * params.p_f))
        else:
            out.append(TransitionEntry(_error_state(k, age + 1), prob))
    return out


def stage_cost(params: ModelParams, s: SystemState) -> float:
    """Weighted age carried by ``s``: beta per missed-alarm slot, 1-beta per false-alarm slot."""
    if isinstance(s, MissedAlarm):
        return params.beta * s.delta
    if isinstance(s, FalseAlarm):
        return (1.0 - params.beta) * s.delta
    return 0.0


def expected_stage_cost(params: ModelParams, s: SystemState, a: int | bool) -> float:
    """Expected next-slot age cost plus the transmission price."""
    total = sum(e.probability * stage_cost(params, e.next_state) for e in transition_kernel(params, s, a))
    return total + params.lam * int(a)


def closed_form_expected_cost(params: ModelParams, s: SystemState, a: int | bool) -> float:
    """Same quantity as :func:`expected_stage_cost`, written out per state class."""
    a = int(a)
    fail = params.p_f if a == 1 else 1.0
    price = params.lam * a
    if isinstance(s, MissedAlarm):
        return params.beta * (s.delta + 1) * params.q_bar * fail + price
    if isinstance(s, FalseAlarm):
        return (1.0 - params.beta) * (s.delta + 1) * params.p_bar * fail + price
    if s.x == 0:
        return params.beta * params.p * fail + price
    return (1.0 - params.beta) * params.q * fail + price
