"""Schedules, carriers and cluster aggregation.

Schedules are 96-slot power series (15 min resolution, kW). Generation is
positive, consumption negative. Arrays handed out by this module are
read-only so selections can be shared between agents without copying.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import MalformedSelection

N_SLOTS = 96
SLOT_HOURS = 0.25


class Carrier(str, enum.Enum):
    P = "P"  # electric
    H = "H"  # heat

    @property
    def long_name(self) -> str:
        return "electric" if self is Carrier.P else "heat"


CARRIERS: tuple[Carrier, ...] = (Carrier.P, Carrier.H)

ScheduleMap = Mapping[Carrier, np.ndarray]


def as_schedule(values: Iterable[float] | np.ndarray | float) -> np.ndarray:
    """Validate and freeze a 96-slot schedule.

    Scalars are broadcast to a constant schedule.
    """
    arr = np.array(values, dtype=float)
    if arr.ndim == 0:
        arr = np.full(N_SLOTS, float(arr))
    if arr.shape != (N_SLOTS,):
        raise MalformedSelection(f"schedule must have {N_SLOTS} slots, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise MalformedSelection("schedule contains non-finite values")
    arr.setflags(write=False)
    return arr


def zeros() -> np.ndarray:
    return as_schedule(0.0)


def _check_carriers(schedules: Mapping, carriers: Sequence[Carrier], what: str) -> None:
    missing = [c for c in carriers if c not in schedules]
    if missing:
        raise MalformedSelection(f"{what} is missing carrier(s) {[c.value for c in missing]}")


@dataclass(frozen=True)
class AgentSelection:
    """The schedule an agent currently commits per carrier."""

    agent_id: str
    schedules: Mapping[Carrier, np.ndarray]

    def __post_init__(self):
        _check_carriers(self.schedules, CARRIERS, f"selection of {self.agent_id!r}")
        frozen = {c: as_schedule(self.schedules[c]) for c in CARRIERS}
        object.__setattr__(self, "schedules", frozen)

    def __getitem__(self, carrier: Carrier) -> np.ndarray:
        return self.schedules[carrier]

    def __eq__(self, other):
        if not isinstance(other, AgentSelection):
            return NotImplemented
        return self.agent_id == other.agent_id and all(
            np.array_equal(self.schedules[c], other.schedules[c]) for c in CARRIERS
        )

    __hash__ = None

    @classmethod
    def idle(cls, agent_id: str) -> "AgentSelection":
        z = zeros()
        return cls(agent_id, {c: z for c in CARRIERS})


def target_schedules(electric, heat) -> dict[Carrier, np.ndarray]:
    return {Carrier.P: as_schedule(electric), Carrier.H: as_schedule(heat)}


def cluster_sum(selections: Sequence[AgentSelection], n_agents: int | None = None) -> dict[Carrier, np.ndarray]:
    """Per-carrier element-wise sum of all agents' selected schedules."""
    if n_agents is not None and n_agents != len(selections):
        raise MalformedSelection(f"expected {n_agents} selections, got {len(selections)}")
    totals = {c: np.zeros(N_SLOTS) for c in CARRIERS}
    for sel in selections:
        if not isinstance(sel, AgentSelection):
            raise MalformedSelection(f"not an AgentSelection: {sel!r}")
        for c in CARRIERS:
            totals[c] += sel.schedules[c]
    return {c: as_schedule(v) for c, v in totals.items()}


def residual(target: ScheduleMap, cluster: ScheduleMap) -> dict[Carrier, np.ndarray]:
    """Target minus cluster per carrier; positive means under-fulfilment."""
    if set(target) != set(cluster):
        raise MalformedSelection(
            f"carrier mismatch: target {sorted(c.value for c in target)} "
            f"vs cluster {sorted(c.value for c in cluster)}"
        )
    return {c: as_schedule(np.asarray(target[c]) - np.asarray(cluster[c])) for c in target}


def l1_distance(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    return float(np.abs(a - b).sum())


def schedule_to_csv_row(values) -> str:
    return ",".join(repr(float(v)) for v in values)


def schedule_from_csv_row(row: str) -> np.ndarray:
    return as_schedule([float(tok) for tok in row.strip().split(",")])
