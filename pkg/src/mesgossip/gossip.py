"""Negotiation runtime: working memory, message merge, broadcast and the two
execution modes (deterministic rounds and asyncio-concurrent).

Every agent starts from the idle candidate (all agents at zero), so the best
candidate an agent holds is always complete and its utility only ever grows
under the max-merge.
"""
from __future__ import annotations

import asyncio
import csv
import io
import logging
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .core import CARRIERS, AgentSelection, Carrier, cluster_sum
from .decision import SolutionCandidate, DecisionOutcome, accept_if_improved, build_candidate
from .errors import MalformedMessage
from .objectives import per_carrier_utility
from .scenarios import ScenarioSpec

log = logging.getLogger(__name__)

TRACE_COLUMNS = ("cycle", "best_utility_total", "best_utility_P", "best_utility_H",
                 "messages_sent", "accepting_agent")
CONSISTENCY_TOL = 1e-9


@dataclass(frozen=True)
class NegotiationMessage:
    sender_id: str
    sender_selection: AgentSelection | None
    known_selections: Mapping[str, tuple[AgentSelection, int]]
    best_candidate: SolutionCandidate

    def validate(self) -> None:
        if not isinstance(self.sender_id, str) or not self.sender_id:
            raise MalformedMessage("sender id must be a non-empty string")
        if self.sender_selection is not None and (
                not isinstance(self.sender_selection, AgentSelection)
                or self.sender_selection.agent_id != self.sender_id):
            raise MalformedMessage(f"sender selection does not belong to {self.sender_id!r}")
        for aid, entry in self.known_selections.items():
            if not (isinstance(entry, tuple) and len(entry) == 2):
                raise MalformedMessage(f"entry for {aid!r} is not (selection, revision)")
            sel, rev = entry
            if not isinstance(sel, AgentSelection) or sel.agent_id != aid:
                raise MalformedMessage(f"selection for {aid!r} is malformed")
            if not isinstance(rev, int) or rev < 0:
                raise MalformedMessage(f"revision for {aid!r} must be a non-negative int")
        if not isinstance(self.best_candidate, SolutionCandidate):
            raise MalformedMessage("best candidate missing")
        if not np.isfinite(self.best_candidate.utility):
            raise MalformedMessage("best candidate utility is not finite")


@dataclass
class WorkingMemory:
    agent_id: str
    targets: Mapping[Carrier, np.ndarray]
    known: dict[str, tuple[AgentSelection, int]] = field(default_factory=dict)
    best: SolutionCandidate | None = None

    @classmethod
    def initial(cls, agent_id: str, agent_ids: Iterable[str], targets) -> "WorkingMemory":
        return cls(agent_id, targets, {}, SolutionCandidate.idle(list(agent_ids), targets))

    @property
    def own_selection(self) -> AgentSelection | None:
        entry = self.known.get(self.agent_id)
        return entry[0] if entry else None

    @property
    def own_revision(self) -> int:
        entry = self.known.get(self.agent_id)
        return entry[1] if entry else 0

    def record_own(self, selection: AgentSelection) -> None:
        current = self.own_selection
        if current is None or current != selection:
            self.known[self.agent_id] = (selection, self.own_revision + 1)

    def snapshot(self) -> NegotiationMessage:
        return NegotiationMessage(self.agent_id, self.own_selection, dict(self.known), self.best)


def _prefer(incoming: SolutionCandidate, local: SolutionCandidate | None) -> bool:
    if local is None:
        return True
    if incoming.utility != local.utility:
        return incoming.utility > local.utility
    return incoming.fingerprint < local.fingerprint


def perceive(memory: WorkingMemory, msg: NegotiationMessage) -> tuple[WorkingMemory, bool]:
    """Merge a message into ``memory`` in place.

    Selections with a higher revision replace local ones; the best candidate
    is replaced only by a strictly better one (equal utility: smaller
    fingerprint wins).
    """
    msg.validate()
    changed = False
    for aid, (sel, rev) in msg.known_selections.items():
        if aid == memory.agent_id:
            continue
        local = memory.known.get(aid)
        if local is None or rev > local[1]:
            memory.known[aid] = (sel, rev)
            changed = True
    incoming = msg.best_candidate
    if incoming is not memory.best and _prefer(incoming, memory.best):
        memory.best = incoming
        changed = True
    return memory, changed


def decide(spec, memory: WorkingMemory, rng: np.random.Generator, n_iterations: int,
           min_improvement: float) -> DecisionOutcome:
    """Search a new schedule against the best candidate and keep it on improvement."""
    residuals = memory.best.open_residuals(spec.agent_id, memory.targets)
    candidate = build_candidate(spec, residuals, rng, n_iterations)
    outcome = accept_if_improved(candidate, memory, min_improvement)
    if outcome.accepted:
        memory.best = outcome.candidate
        memory.record_own(candidate)
    else:
        memory.record_own(memory.best.selections[spec.agent_id])
    return outcome


@dataclass(frozen=True)
class Topology:
    adjacency: Mapping[str, frozenset[str]]

    def __post_init__(self):
        adj = {a: frozenset(n) for a, n in self.adjacency.items()}
        for a, ns in adj.items():
            if a in ns:
                raise ValueError(f"self-loop at {a!r}")
            for n in ns:
                if n not in adj or a not in adj[n]:
                    raise ValueError(f"edge {a!r}-{n!r} is not symmetric")
        if adj and not self._connected(adj):
            raise ValueError("topology is not connected")
        object.__setattr__(self, "adjacency", adj)

    @staticmethod
    def _connected(adj) -> bool:
        start = next(iter(adj))
        seen, frontier = {start}, deque([start])
        while frontier:
            for n in adj[frontier.popleft()]:
                if n not in seen:
                    seen.add(n)
                    frontier.append(n)
        return len(seen) == len(adj)

    @classmethod
    def complete(cls, agent_ids: Iterable[str]) -> "Topology":
        ids = list(agent_ids)
        return cls({a: frozenset(b for b in ids if b != a) for a in ids})

    @classmethod
    def ring(cls, agent_ids: Iterable[str]) -> "Topology":
        ids = list(agent_ids)
        n = len(ids)
        if n < 3:
            return cls.complete(ids)
        return cls({ids[i]: frozenset({ids[i - 1], ids[(i + 1) % n]}) for i in range(n)})

    def neighbors(self, agent_id: str) -> frozenset[str]:
        return self.adjacency[agent_id]


def act(memory: WorkingMemory, outcome: DecisionOutcome | None, topology: Topology,
        changed: bool = False) -> list[tuple[str, NegotiationMessage]]:
    """Messages to send: one per neighbour after an accepted decision, or after
    the agent adopted a better candidate from someone else (so it keeps
    spreading on sparse graphs). Returns ``(recipient, message)`` pairs."""
    accepted = outcome is not None and outcome.accepted
    if not (accepted or changed):
        return []
    msg = memory.snapshot()
    return [(n, msg) for n in sorted(topology.neighbors(memory.agent_id))]


@dataclass
class TraceRow:
    cycle: int
    best_utility_total: float
    best_utility_P: float
    best_utility_H: float
    messages_sent: int
    accepting_agent: str


@dataclass
class NegotiationTrace:
    rows: list[TraceRow] = field(default_factory=list)

    def record(self, cycle: int, memories: Iterable[WorkingMemory], messages: int, accepting: list[str]):
        best = max((m.best for m in memories), key=lambda c: c.utility)
        self.rows.append(TraceRow(cycle, best.utility, best.carrier_utility[Carrier.P],
                                  best.carrier_utility[Carrier.H], messages, ";".join(accepting)))

    @property
    def best_utilities(self) -> list[float]:
        return [r.best_utility_total for r in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in self.rows:
            w.writerow([r.cycle, repr(r.best_utility_total), repr(r.best_utility_P), repr(r.best_utility_H),
                        r.messages_sent, r.accepting_agent])
        return buf.getvalue()


@dataclass
class NegotiationResult:
    cluster: dict[Carrier, np.ndarray]
    best: SolutionCandidate
    trace: NegotiationTrace
    memories: dict[str, WorkingMemory]
    cycles: int
    messages: int
    converged: bool
    dropped_messages: int = 0
    wall_time_s: float = 0.0

    @property
    def non_converged(self) -> bool:
        return not self.converged

    @property
    def selections(self) -> dict[str, AgentSelection]:
        return dict(self.best.selections)


def detect_termination(mailboxes: Mapping[str, deque], accepted_last_pass: bool, started: bool = True) -> bool:
    """Rounds mode: quiet when every mailbox is empty and the last full pass
    produced no accepted decision."""
    return started and not accepted_last_pass and all(not q for q in mailboxes.values())


def check_consistency(result: NegotiationResult, targets) -> float:
    """Largest disagreement between agents' best utilities and the utility
    recomputed from the selections; raises if above tolerance."""
    utils = [m.best.utility for m in result.memories.values()]
    spread = max(utils) - min(utils) if utils else 0.0
    recomputed = sum(per_carrier_utility(targets, cluster_sum(
        [result.best.selections[a] for a in sorted(result.best.selections)])).values())
    err = max(spread, abs(recomputed - result.best.utility))
    if err > CONSISTENCY_TOL:
        raise AssertionError(f"gossip state inconsistent by {err:g}")
    return err


def _agent_rngs(scenario: ScenarioSpec, seed: int) -> dict[str, np.random.Generator]:
    return {a.agent_id: np.random.default_rng([seed, i]) for i, a in enumerate(scenario.agents)}


def _final_best(memories: Mapping[str, WorkingMemory]) -> SolutionCandidate:
    best = None
    for aid in sorted(memories):
        if _prefer(memories[aid].best, best):
            best = memories[aid].best
    return best


def run_negotiation(scenario: ScenarioSpec, mode: str = "rounds", seed: int | None = None,
                    topology: Topology | None = None, r_ms: float | None = None,
                    max_cycles: int | None = None) -> NegotiationResult:
    """Negotiate schedules for every agent in ``scenario``.

    ``mode`` is ``"rounds"`` (single-threaded, reproducible) or
    ``"concurrent"`` (one asyncio task per agent polling its mailbox).
    """
    if mode == "rounds":
        return _run_rounds(scenario, seed, topology, max_cycles)
    if mode == "concurrent":
        return asyncio.run(_run_concurrent(scenario, seed, topology, r_ms, max_cycles))
    raise ValueError(f"unknown mode {mode!r}; use 'rounds' or 'concurrent'")


def _setup(scenario, seed, topology):
    ids = scenario.agent_ids
    seed = scenario.seed if seed is None else seed
    topology = topology or Topology.complete(ids)
    if set(topology.adjacency) != set(ids):
        raise ValueError("topology does not cover the scenario's agents")
    memories = {a: WorkingMemory.initial(a, ids, scenario.targets) for a in ids}
    return ids, topology, memories, _agent_rngs(scenario, seed)


def _run_rounds(scenario, seed, topology, max_cycles) -> NegotiationResult:
    t0 = time.perf_counter()
    neg = scenario.negotiation
    max_cycles = neg.max_cycles if max_cycles is None else max_cycles
    ids, topology, memories, rngs = _setup(scenario, seed, topology)
    specs = {a.agent_id: a for a in scenario.agents}
    order = sorted(ids)
    mailboxes = {a: deque() for a in ids}
    activated = set()
    trace = NegotiationTrace()
    trace.record(0, memories.values(), 0, [])
    total_msgs = dropped = 0
    converged = False
    cycle = 0

    while cycle < max_cycles:
        cycle += 1
        sent = 0
        accepting = []
        for aid in order:
            mem = memories[aid]
            before = mem.best
            first = aid not in activated
            activated.add(aid)
            box = mailboxes[aid]
            while box:
                msg = box.popleft()
                try:
                    perceive(mem, msg)
                except MalformedMessage as exc:
                    dropped += 1
                    log.warning("dropped message to %s: %s", aid, exc)
            changed = mem.best is not before
            if not (first or changed):
                continue
            outcome = decide(specs[aid], mem, rngs[aid], neg.n_iterations, neg.min_improvement)
            if outcome.accepted:
                accepting.append(aid)
            for recipient, msg in act(mem, outcome, topology, changed=changed):
                mailboxes[recipient].append(msg)
                sent += 1
        total_msgs += sent
        trace.record(cycle, memories.values(), sent, accepting)
        if total_msgs > neg.message_budget:
            log.warning("message budget %d exceeded", neg.message_budget)
            break
        if detect_termination(mailboxes, bool(accepting)):
            converged = True
            break

    best = _final_best(memories)
    return NegotiationResult(dict(best.cluster), best, trace, memories, cycle, total_msgs, converged,
                             dropped, time.perf_counter() - t0)


async def _run_concurrent(scenario, seed, topology, r_ms, max_cycles) -> NegotiationResult:
    t0 = time.perf_counter()
    neg = scenario.negotiation
    r = (neg.r_ms if r_ms is None else r_ms) / 1000.0
    max_cycles = neg.max_cycles if max_cycles is None else max_cycles
    ids, topology, memories, rngs = _setup(scenario, seed, topology)
    specs = {a.agent_id: a for a in scenario.agents}
    queues = {a: asyncio.Queue() for a in ids}
    state = {"in_flight": 0, "busy": 0, "last_activity": time.perf_counter(), "sent": 0,
             "accepting": [], "dropped": 0}

    async def agent_loop(aid):
        mem = memories[aid]
        first = True
        q = queues[aid]
        while True:
            await asyncio.sleep(r)
            before = mem.best
            state["busy"] += 1
            try:
                while not q.empty():
                    msg = q.get_nowait()
                    state["in_flight"] -= 1
                    try:
                        perceive(mem, msg)
                    except MalformedMessage as exc:
                        state["dropped"] += 1
                        log.warning("dropped message to %s: %s", aid, exc)
                changed = mem.best is not before
                if first or changed:
                    first = False
                    outcome = decide(specs[aid], mem, rngs[aid], neg.n_iterations, neg.min_improvement)
                    if outcome.accepted:
                        state["accepting"].append(aid)
                    for recipient, msg in act(mem, outcome, topology, changed=changed):
                        state["in_flight"] += 1
                        state["sent"] += 1
                        queues[recipient].put_nowait(msg)
                    state["last_activity"] = time.perf_counter()
            finally:
                state["busy"] -= 1

    tasks = [asyncio.create_task(agent_loop(a)) for a in sorted(ids)]
    trace = NegotiationTrace()
    trace.record(0, memories.values(), 0, [])
    converged = False
    tick = total = 0
    try:
        while tick < max_cycles:
            tick += 1
            await asyncio.sleep(r)
            sent, state["sent"] = state["sent"], 0
            accepting, state["accepting"] = state["accepting"], []
            total += sent
            trace.record(tick, memories.values(), sent, accepting)
            quiet = time.perf_counter() - state["last_activity"] >= 3 * r
            if state["in_flight"] == 0 and state["busy"] == 0 and quiet and tick > 1:
                converged = True
                break
            if total > neg.message_budget:
                break
    finally:
        for t in tasks:
            t.cancel()
        await asyncio.gather(*tasks, return_exceptions=True)

    best = _final_best(memories)
    return NegotiationResult(dict(best.cluster), best, trace, memories, tick, total, converged,
                             state["dropped"], time.perf_counter() - t0)
