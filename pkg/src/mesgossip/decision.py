"""The decide step: per-slot local search for generators, band clipping for
storage, and acceptance only on strict improvement of the coalition utility.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .core import CARRIERS, N_SLOTS, AgentSelection, Carrier, cluster_sum
from .flexibility import storage_schedule_for_residual
from .objectives import per_carrier_utility, private_optimal_offset, slot_private_utility
from .scenarios import AgentSpec
from .units import chp_gas_for_power

DEFAULT_ITERATIONS = 32


@dataclass(frozen=True)
class SearchBounds:
    lower: float
    upper: float
    value: float

    def __post_init__(self):
        if not self.lower <= self.value <= self.upper:
            raise ValueError(f"value {self.value} outside [{self.lower}, {self.upper}]")


def _bound_update_arrays(u_minus, u_center, u_plus, v, step, lower, upper):
    """Vectorised four-case bound update.

    Probes sit at ``v - step``, ``v``, ``v + step``. Sorting them by utility:
    rising utility moves the lower bound to the centre, falling utility moves
    the upper bound to the centre, and a strict peak at the centre shrinks
    the interval to the two probes around it. Ties leave the bounds alone.
    """
    rising = (u_minus < u_center) & (u_center < u_plus)
    falling = (u_minus > u_center) & (u_center > u_plus)
    peak = (u_center > u_minus) & (u_center > u_plus) & (u_minus != u_plus)
    new_lower = np.where(rising, v, np.where(peak, v - step, lower))
    new_upper = np.where(falling, v, np.where(peak, v + step, upper))
    # never widen
    new_lower = np.maximum(lower, new_lower)
    new_upper = np.minimum(upper, new_upper)
    return new_lower, new_upper


def bound_update(u_minus: float, u_center: float, u_plus: float, bounds: SearchBounds,
                 step: float = 1.0) -> SearchBounds:
    lo, hi = _bound_update_arrays(
        np.float64(u_minus), np.float64(u_center), np.float64(u_plus),
        np.float64(bounds.value), np.float64(step),
        np.float64(bounds.lower), np.float64(bounds.upper),
    )
    lo, hi = float(lo), float(hi)
    return SearchBounds(lo, hi, min(max(bounds.value, lo), hi))


def probe_step(p_max):
    return np.maximum(0.01 * np.asarray(p_max, dtype=float), 0.001)


def local_search(utility_fn: Callable[[np.ndarray], np.ndarray], p_max, init_upper,
                 n_iterations: int, rng: np.random.Generator) -> np.ndarray:
    """Independent interval-shrinking searches, one per slot, run in lockstep.

    ``utility_fn`` maps an array of candidate values (any leading shape,
    last axis = slots) to utilities of the same shape. Each slot searches
    ``[0, p_max]`` starting from a random value in ``[0, init_upper]``; slots
    whose ``init_upper`` is not positive return 0.
    """
    p_max = np.asarray(p_max, dtype=float)
    init_upper = np.minimum(p_max, np.asarray(init_upper, dtype=float))
    n = init_upper.shape[0]
    active = init_upper > 0
    result = np.zeros(n)
    if not active.any():
        return result

    lower = np.zeros(n)
    upper = np.where(active, p_max, 0.0)
    step = probe_step(p_max)
    v = rng.uniform(0.0, 1.0, n) * np.where(active, init_upper, 0.0)
    best_v = v.copy()
    best_u = np.full(n, -np.inf)

    for _ in range(n_iterations):
        # probes never reach past a quarter of the remaining interval, so
        # repeated peak hits keep halving it
        step = np.minimum(step, np.maximum((upper - lower) / 4.0, 1e-9))
        probes = np.stack([np.clip(v - step, 0.0, p_max), v, np.clip(v + step, 0.0, p_max)])
        u = utility_fn(probes)
        for k in range(3):
            better = active & (u[k] > best_u)
            best_u = np.where(better, u[k], best_u)
            best_v = np.where(better, probes[k], best_v)
        new_lower, new_upper = _bound_update_arrays(u[0], u[1], u[2], v, step, lower, upper)
        lower = np.where(active, new_lower, lower)
        upper = np.where(active, new_upper, upper)
        active &= upper - lower > 1e-12
        if not active.any():
            break
        v = np.where(active, lower + rng.uniform(0.0, 1.0, n) * (upper - lower), v)

    return np.where(init_upper > 0, best_v, 0.0)


def local_search_slot(utility_fn: Callable[[float], float], p_max: float, residual_slot: float,
                      n_iterations: int, rng: np.random.Generator) -> float:
    """Scalar form of :func:`local_search` for a single slot."""
    if n_iterations < 1:
        raise ValueError("n_iterations must be >= 1")

    def fn(values):
        flat = np.asarray(values, dtype=float)
        return np.vectorize(lambda x: float(utility_fn(float(x))))(flat)

    return float(local_search(fn, np.array([p_max]), np.array([residual_slot]), n_iterations, rng)[0])


def build_candidate(spec: AgentSpec, open_residuals: Mapping[Carrier, np.ndarray],
                    rng: np.random.Generator, n_iterations: int = DEFAULT_ITERATIONS) -> AgentSelection:
    """New schedule for ``spec`` given the gap the rest of the coalition leaves.

    ``open_residuals`` is target minus the other agents' contributions, per
    carrier.
    """
    o_p = np.asarray(open_residuals[Carrier.P], dtype=float)
    o_h = np.asarray(open_residuals[Carrier.H], dtype=float)
    econ, kind = spec.econ, spec.kind
    zero = np.zeros(N_SLOTS)

    if kind == "storage":
        st = spec.params
        if st.carrier is Carrier.P:
            drift = private_optimal_offset(econ.electric_coefficient(), econ.p_P, econ.p_e)
        else:
            drift = private_optimal_offset(econ.delta, econ.p_H, econ.p_e)
        wanted = np.asarray(open_residuals[st.carrier], dtype=float) + drift
        sched = storage_schedule_for_residual(st, st.soc_init, wanted)
        return AgentSelection(spec.agent_id, {st.carrier: sched,
                                              Carrier.H if st.carrier is Carrier.P else Carrier.P: zero})

    if kind == "chp":
        chp = spec.params
        ratio, rating = chp.heat_ratio, chp.rating
        gas_per_kw = 3600.0 * 1000.0 / (chp.rho * chp.hhv)

        def fn(p):
            return slot_private_utility(econ, p, ratio * p, o_p, o_h, gas_per_kw * p)

        p = local_search(fn, np.full(N_SLOTS, rating), np.maximum(o_p, o_h / ratio), n_iterations, rng)
        chp_gas_for_power(p, chp)  # feasibility guard
        return AgentSelection(spec.agent_id, {Carrier.P: p, Carrier.H: ratio * p})

    if kind == "hp":
        hp = spec.params

        def fn(d):
            return slot_private_utility(econ, -d, hp.cop * d, o_p, o_h)

        d = local_search(fn, np.full(N_SLOTS, hp.p_el_max), np.maximum(o_h / hp.cop, -o_p), n_iterations, rng)
        return AgentSelection(spec.agent_id, {Carrier.P: -d, Carrier.H: hp.cop * d})

    if kind in ("solar", "wind"):

        def fn(x):
            return slot_private_utility(econ, x, 0.0, o_p, o_h)

        x = local_search(fn, spec.profile, o_p, n_iterations, rng)
        return AgentSelection(spec.agent_id, {Carrier.P: x, Carrier.H: zero})

    raise ValueError(f"unknown agent kind {kind!r}")


class SolutionCandidate:
    """A complete assignment of one selection per agent, with its utility."""

    __slots__ = ("selections", "cluster", "utility", "carrier_utility", "creator", "_fingerprint")

    def __init__(self, selections: Mapping[str, AgentSelection], targets, creator: str = ""):
        self.selections = dict(selections)
        self.cluster = cluster_sum([self.selections[a] for a in sorted(self.selections)])
        self.carrier_utility = per_carrier_utility(targets, self.cluster)
        self.utility = sum(self.carrier_utility.values())
        self.creator = creator
        self._fingerprint = None

    @classmethod
    def idle(cls, agent_ids, targets) -> "SolutionCandidate":
        return cls({a: AgentSelection.idle(a) for a in agent_ids}, targets)

    def with_selection(self, selection: AgentSelection, targets) -> "SolutionCandidate":
        sels = dict(self.selections)
        sels[selection.agent_id] = selection
        return SolutionCandidate(sels, targets, creator=selection.agent_id)

    def open_residuals(self, agent_id: str, targets) -> dict[Carrier, np.ndarray]:
        """Target minus everyone's contribution except ``agent_id``'s."""
        own = self.selections.get(agent_id)
        out = {}
        for c in CARRIERS:
            others = self.cluster[c] - (own.schedules[c] if own is not None else 0.0)
            out[c] = np.asarray(targets[c]) - others
        return out

    @property
    def fingerprint(self) -> str:
        if self._fingerprint is None:
            h = hashlib.sha1()
            for a in sorted(self.selections):
                h.update(a.encode())
                for c in CARRIERS:
                    h.update(self.selections[a].schedules[c].tobytes())
            self._fingerprint = h.hexdigest()
        return self._fingerprint


@dataclass(frozen=True)
class DecisionOutcome:
    accepted: bool
    new_selection: AgentSelection | None
    new_global_utility: float
    candidate: SolutionCandidate | None = None


def accept_if_improved(candidate: AgentSelection, memory, min_improvement: float = 0.0) -> DecisionOutcome:
    """Substitute ``candidate`` into the memory's best solution and keep it only
    if the coalition utility strictly improves.

    With no best solution yet, the previous utility counts as minus infinity.
    ``memory`` needs ``targets`` and ``best`` attributes.
    """
    targets = memory.targets
    best = memory.best
    if best is None:
        new = SolutionCandidate({candidate.agent_id: candidate}, targets, creator=candidate.agent_id)
        return DecisionOutcome(True, candidate, new.utility, new)
    new = best.with_selection(candidate, targets)
    if new.utility > best.utility + min_improvement:
        return DecisionOutcome(True, candidate, new.utility, new)
    return DecisionOutcome(False, None, best.utility, None)
