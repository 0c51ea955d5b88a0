"""Coalition utility and per-agent private utility.

The coalition utility per carrier is the negative L1 gap between target and
cluster schedule; the negotiation maximises the sum over carriers. The
private utility rewards contributed power and subtracts a deviation penalty
plus resource cost. All penalty terms are positive costs.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import CARRIERS, N_SLOTS, Carrier, ScheduleMap, as_schedule, l1_distance
from .errors import ConfigError, MalformedSelection


@dataclass(frozen=True)
class AgentEconParams:
    gamma: float = 0.30  # per kW-slot electric
    delta: float = 0.10  # per kW-slot heat
    theta: float = 0.0  # per resource unit (kg/h gas)
    p_P: float = 10.0
    p_H: float = 10.0
    p_e: float = 2.0
    market_prices: np.ndarray | None = field(default=None)

    def __post_init__(self):
        if self.p_P < 0:
            raise ConfigError("must be non-negative", "p_P")
        if self.p_H < 0:
            raise ConfigError("must be non-negative", "p_H")
        if self.p_e < 1:
            raise ConfigError("must be at least 1", "p_e")
        if self.market_prices is not None:
            object.__setattr__(self, "market_prices", as_schedule(self.market_prices))

    def __eq__(self, other):
        if not isinstance(other, AgentEconParams):
            return NotImplemented
        same_prices = (self.market_prices is None and other.market_prices is None) or (
            self.market_prices is not None and other.market_prices is not None
            and np.array_equal(self.market_prices, other.market_prices))
        return same_prices and (self.gamma, self.delta, self.theta, self.p_P, self.p_H, self.p_e) == (
            other.gamma, other.delta, other.theta, other.p_P, other.p_H, other.p_e)

    __hash__ = None

    def electric_coefficient(self) -> np.ndarray | float:
        """Per-slot value of a kW delivered to the coalition.

        With market access, every kW handed to the coalition is a kW not sold
        at the market price, so the price is subtracted.
        """
        if self.market_prices is None:
            return self.gamma
        return self.gamma - self.market_prices


def carrier_utility(target, cluster) -> float:
    return -l1_distance(target, cluster)


def total_utility(targets: ScheduleMap, cluster: ScheduleMap) -> float:
    """Sum of carrier utilities over electric and heat."""
    missing = [c for c in CARRIERS if c not in targets or c not in cluster]
    if missing:
        raise MalformedSelection(f"missing carrier(s) {[c.value for c in missing]}")
    return sum(carrier_utility(targets[c], cluster[c]) for c in CARRIERS)


def per_carrier_utility(targets: ScheduleMap, cluster: ScheduleMap) -> dict[Carrier, float]:
    return {c: carrier_utility(targets[c], cluster[c]) for c in CARRIERS}


def slot_private_utility(econ: AgentEconParams, P_a, H_a, delta_P, delta_H, F_a=0.0):
    """Private utility of each slot; arrays broadcast element-wise.

    ``delta_P``/``delta_H`` are the gaps the agent is asked to close.
    """
    P_a = np.asarray(P_a, dtype=float)
    H_a = np.asarray(H_a, dtype=float)
    revenue = econ.electric_coefficient() * P_a + econ.delta * H_a
    penalty = (econ.p_P * np.abs(P_a - delta_P) ** econ.p_e
               + econ.p_H * np.abs(H_a - delta_H) ** econ.p_e
               + econ.theta * np.asarray(F_a, dtype=float))
    return revenue - penalty


def private_optimal_offset(coefficient, penalty: float, exponent: float):
    """Unconstrained maximiser of ``c*x - p*|x - o|**e`` relative to ``o``.

    This is how far a self-interested unit drifts past the gap it was asked
    to close. Without a penalty, or with a linear penalty weaker than the
    revenue, the drift is unbounded.
    """
    c = np.asarray(coefficient, dtype=float)
    mag = np.abs(c)
    if penalty <= 0:
        return np.where(mag > 0, np.sign(c) * np.inf, 0.0)
    if exponent == 1:
        return np.where(mag > penalty, np.sign(c) * np.inf, 0.0)
    return np.sign(c) * (mag / (penalty * exponent)) ** (1.0 / (exponent - 1.0))


def private_utility(econ: AgentEconParams, P_a, H_a, delta_P, delta_H, F_a=None) -> float:
    for v in (P_a, H_a, delta_P, delta_H):
        if np.shape(v) != (N_SLOTS,):
            raise ValueError(f"expected {N_SLOTS}-slot vectors")
    F = np.zeros(N_SLOTS) if F_a is None else np.asarray(F_a, dtype=float)
    if np.any(F < 0):
        raise ValueError("resource vector must be non-negative")
    return float(np.sum(slot_private_utility(econ, P_a, H_a, delta_P, delta_H, F)))


def penalty_dominance_check(econ: AgentEconParams, rating: float) -> bool:
    """True if missing the target by the full rating costs more than the
    best revenue a slot can bring."""
    if rating <= 0:
        return False
    gamma = np.max(np.abs(econ.electric_coefficient()))
    revenue = (gamma + abs(econ.delta)) * rating
    penalty = min(econ.p_P, econ.p_H) * rating**econ.p_e
    return bool(penalty > revenue)
