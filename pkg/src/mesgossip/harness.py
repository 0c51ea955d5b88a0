"""Metrics, batched experiments, result files and the brute-force oracle."""
from __future__ import annotations

import csv
import itertools
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import CARRIERS, N_SLOTS, SLOT_HOURS, AgentSelection, Carrier
from .errors import ConfigError, MetricUndefined, OracleTooLarge
from .gossip import NegotiationResult, check_consistency, run_negotiation
from .objectives import penalty_dominance_check, private_utility
from .scenarios import VARIANTS, ScenarioSpec, build_scenario, load_scenario

log = logging.getLogger(__name__)

RESULT_COLUMNS = ("run", "seed", "scenario", "fulfillment_P", "fulfillment_H", "fulfillment_combined",
                  "utility_total", "utility_P", "utility_H", "cycles", "messages", "converged")
ORACLE_LIMIT = 10_000_000


def fulfillment_rate(target, cluster) -> float:
    """Percent of the target met: 100 * max(0, 1 - sum|t - c| / sum|t|)."""
    t = np.asarray(target, dtype=float)
    c = np.asarray(cluster, dtype=float)
    norm = float(np.abs(t).sum())
    if norm == 0:
        raise MetricUndefined("fulfillment rate undefined for an all-zero target")
    return 100.0 * max(0.0, 1.0 - float(np.abs(t - c).sum()) / norm)


def combined_fulfillment(targets, cluster) -> tuple[float, float, float]:
    fp = fulfillment_rate(targets[Carrier.P], cluster[Carrier.P])
    fh = fulfillment_rate(targets[Carrier.H], cluster[Carrier.H])
    return fp, fh, (fp + fh) / 2.0


def agent_private_utilities(scenario: ScenarioSpec, selections) -> dict[str, float]:
    """Private utility of every agent's final schedule against the gap the
    others leave open."""
    total = {c: sum(selections[a].schedules[c] for a in selections) for c in CARRIERS}
    out = {}
    for spec in scenario.agents:
        sel = selections[spec.agent_id]
        gap = {c: scenario.targets[c] - (total[c] - sel.schedules[c]) for c in CARRIERS}
        fuel = None
        if spec.kind == "chp":
            fuel = 3600.0 * 1000.0 * sel.schedules[Carrier.P] / (spec.params.rho * spec.params.hhv)
        out[spec.agent_id] = private_utility(spec.econ, sel.schedules[Carrier.P], sel.schedules[Carrier.H],
                                             gap[Carrier.P], gap[Carrier.H], fuel)
    return out


@dataclass
class RunResult:
    run: int
    seed: int
    scenario: str
    fulfillment_P: float
    fulfillment_H: float
    fulfillment_combined: float
    utility_total: float
    utility_P: float
    utility_H: float
    cycles: int
    messages: int
    converged: bool
    wall_time_s: float
    private_utilities: dict[str, float] = field(default_factory=dict)
    negotiation: NegotiationResult | None = field(default=None, repr=False)

    def __post_init__(self):
        for name in ("fulfillment_P", "fulfillment_H", "fulfillment_combined"):
            if not 0.0 <= getattr(self, name) <= 100.0:
                raise ValueError(f"{name} outside [0, 100]")

    def row(self) -> list:
        return [self.run, self.seed, self.scenario, repr(self.fulfillment_P), repr(self.fulfillment_H),
                repr(self.fulfillment_combined), repr(self.utility_total), repr(self.utility_P),
                repr(self.utility_H), self.cycles, self.messages, int(self.converged)]


def run_once(scenario: ScenarioSpec, run: int = 0, mode: str = "rounds") -> RunResult:
    for spec in scenario.agents:
        if spec.rating > 0 and not penalty_dominance_check(spec.econ, spec.rating):
            log.warning("%s: penalty does not dominate revenue at full rating", spec.agent_id)
    res = run_negotiation(scenario, mode=mode, seed=scenario.seed)
    if mode == "rounds":
        check_consistency(res, scenario.targets)
    fp, fh, fc = combined_fulfillment(scenario.targets, res.cluster)
    return RunResult(run, scenario.seed, scenario.name, fp, fh, fc, res.best.utility,
                     res.best.carrier_utility[Carrier.P], res.best.carrier_utility[Carrier.H],
                     res.cycles, res.messages, res.converged, res.wall_time_s,
                     agent_private_utilities(scenario, res.best.selections), res)


def _resolve(scenario, seed: int) -> ScenarioSpec:
    if isinstance(scenario, ScenarioSpec):
        return ScenarioSpec(scenario.name, scenario.agents, scenario.targets, seed, scenario.family,
                            scenario.negotiation)
    if scenario in VARIANTS:
        return build_scenario(scenario, seed)
    path = Path(scenario)
    if not path.exists():
        raise ConfigError(f"not a preset ({', '.join(VARIANTS)}) and no such file", "scenario")
    spec = load_scenario(path)
    return ScenarioSpec(spec.name, spec.agents, spec.targets, seed, spec.family, spec.negotiation)


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _stacked_rows(scenario: ScenarioSpec, result: NegotiationResult, carrier: Carrier):
    kinds = sorted({a.kind for a in scenario.agents})
    per_kind = {k: np.zeros(N_SLOTS) for k in kinds}
    for a in scenario.agents:
        per_kind[a.kind] += result.best.selections[a.agent_id].schedules[carrier]
    header = ["slot", "hour", "target", *kinds, "cluster"]
    rows = []
    for i in range(N_SLOTS):
        rows.append([i, repr(i * SLOT_HOURS), repr(float(scenario.targets[carrier][i])),
                     *(repr(float(per_kind[k][i])) for k in kinds), repr(float(result.cluster[carrier][i]))])
    return header, rows


def _stats(values) -> dict:
    v = np.asarray(values, dtype=float)
    return {"mean": float(v.mean()), "std": float(v.std()), "min": float(v.min()), "max": float(v.max()),
            "median": float(np.median(v))}


def run_experiment(scenario, n_runs: int = 50, base_seed: int = 0, out_dir=None,
                   mode: str = "rounds") -> list[RunResult]:
    """Run ``n_runs`` negotiations with seeds ``base_seed + k``.

    ``scenario`` is a preset name, a config-file path or a ScenarioSpec.
    With ``out_dir`` set, writes results.csv, convergence_<run>.csv,
    stacked_<carrier>_<run>.csv, private_utilities.csv, timings.csv and
    summary.json there. Everything except timings.csv is byte-identical for
    identical seeds in rounds mode.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    results = []
    specs = []
    for k in range(n_runs):
        spec = _resolve(scenario, base_seed + k)
        specs.append(spec)
        results.append(run_once(spec, k, mode))
        log.info("run %d: combined %.2f%%", k, results[-1].fulfillment_combined)
    if out_dir is not None:
        write_results(Path(out_dir), specs, results)
    return results


def write_results(out: Path, specs: list[ScenarioSpec], results: list[RunResult]) -> None:
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "results.csv", RESULT_COLUMNS, [r.row() for r in results])
    _write_csv(out / "timings.csv", ("run", "wall_time_s"), [[r.run, f"{r.wall_time_s:.6f}"] for r in results])
    priv_rows = []
    for spec, r in zip(specs, results):
        (out / f"convergence_{r.run}.csv").write_text(r.negotiation.trace.to_csv())
        for c in CARRIERS:
            header, rows = _stacked_rows(spec, r.negotiation, c)
            _write_csv(out / f"stacked_{c.value}_{r.run}.csv", header, rows)
        kinds = {a.agent_id: a.kind for a in spec.agents}
        priv_rows += [[r.run, aid, kinds[aid], repr(u)] for aid, u in r.private_utilities.items()]
    _write_csv(out / "private_utilities.csv", ("run", "agent_id", "kind", "private_utility"), priv_rows)

    by_kind: dict[str, list[float]] = {}
    for row in priv_rows:
        by_kind.setdefault(row[2], []).append(float(row[3]))
    combined = [r.fulfillment_combined for r in results]
    summary = {
        "scenario": results[0].scenario,
        "n_runs": len(results),
        "seeds": [r.seed for r in results],
        "fulfillment": {
            "P": _stats([r.fulfillment_P for r in results]),
            "H": _stats([r.fulfillment_H for r in results]),
            "combined": _stats(combined),
        },
        "runs_at_or_above_95": int(sum(c >= 95.0 for c in combined)),
        "converged_runs": int(sum(r.converged for r in results)),
        "cycles": _stats([r.cycles for r in results]),
        "messages": _stats([r.messages for r in results]),
        "private_utility_by_kind": {k: _stats(v) for k, v in sorted(by_kind.items())},
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")


# -- brute-force oracle ---------------------------------------------------------------

@dataclass
class OracleResult:
    utility: float
    selections: dict[str, AgentSelection]
    n_points: int

    def fulfillment(self, targets) -> tuple[float, float, float]:
        total = {c: sum(s.schedules[c] for s in self.selections.values()) if self.selections
                 else np.zeros(N_SLOTS) for c in CARRIERS}
        return combined_fulfillment(targets, total)


def _grid(hi: float, step: float, lo: float = 0.0) -> np.ndarray:
    if hi - lo <= 0:
        return np.array([max(lo, 0.0) if hi >= 0 else hi])
    n = int(np.floor((hi - lo) / step + 1e-9))
    pts = lo + step * np.arange(n + 1)
    if hi - pts[-1] > 1e-9:
        pts = np.append(pts, hi)
    return pts


def _agent_levels(spec, n_slots: int, step: float) -> list[np.ndarray]:
    """Per-slot candidate (P, H) pairs, shape (k, 2) per slot."""
    out = []
    for i in range(n_slots):
        if spec.kind == "chp":
            p = _grid(spec.params.rating, step)
            out.append(np.stack([p, spec.params.heat_ratio * p], axis=1))
        elif spec.kind == "hp":
            d = _grid(spec.params.p_el_max, step)
            out.append(np.stack([-d, spec.params.cop * d], axis=1))
        elif spec.kind in ("solar", "wind"):
            x = _grid(float(spec.profile[i]), step)
            out.append(np.stack([x, np.zeros_like(x)], axis=1))
        else:
            st = spec.params
            x = _grid(st.p_dis_max, step, -st.p_ch_max)
            if not np.any(np.isclose(x, 0.0)):
                x = np.sort(np.append(x, 0.0))
            pair = np.zeros((x.size, 2))
            pair[:, 0 if st.carrier is Carrier.P else 1] = x
            out.append(pair)
    return out


def _agent_trajectories(spec, levels) -> np.ndarray:
    """All feasible per-slot combinations, shape (m, n_slots, 2)."""
    idx = np.array(list(itertools.product(*(range(len(lv)) for lv in levels))), dtype=int)
    traj = np.stack([levels[i][idx[:, i]] for i in range(len(levels))], axis=1)
    if spec.kind == "storage":
        st = spec.params
        power = traj[:, :, 0 if st.carrier is Carrier.P else 1]
        delta = np.where(power > 0, -power * SLOT_HOURS / st.eff_dis, -power * SLOT_HOURS * st.eff_ch)
        soc = st.soc_init + np.cumsum(delta, axis=1)
        ok = np.all((soc >= -1e-9) & (soc <= st.capacity + 1e-9), axis=1)
        traj = traj[ok]
    return traj


def brute_force_oracle(scenario: ScenarioSpec, n_slots: int = 6, step: float = 0.1,
                       limit: int = ORACLE_LIMIT) -> OracleResult:
    """Exact optimum of the coalition utility over a discretised decision space.

    Only the first ``n_slots`` slots are searched; every later slot must have
    zero targets and is left idle. Storage trajectories are filtered by SoC
    simulation.
    """
    if len(scenario.agents) > 3:
        raise OracleTooLarge(f"{len(scenario.agents)} agents; the oracle takes at most 3")
    if not 1 <= n_slots <= 6:
        raise OracleTooLarge("the oracle searches between 1 and 6 slots")
    if step <= 0:
        raise ValueError("step must be positive")
    targets = scenario.targets
    tail = sum(float(np.abs(targets[c][n_slots:]).sum()) for c in CARRIERS)
    if not scenario.agents:
        return OracleResult(-sum(float(np.abs(targets[c]).sum()) for c in CARRIERS), {}, 1)
    if tail > 0:
        raise ValueError(f"targets must be zero beyond slot {n_slots - 1}")

    levels = [_agent_levels(a, n_slots, step) for a in scenario.agents]
    points = 1
    for lv in levels:
        for slot in lv:
            points *= len(slot)
    if points > limit:
        raise OracleTooLarge(f"{points} points exceed the limit of {limit}")

    trajs = [_agent_trajectories(a, lv) for a, lv in zip(scenario.agents, levels)]
    t = np.stack([targets[c][:n_slots] for c in CARRIERS], axis=1)  # (n_slots, 2)

    first = trajs[0]
    best_u, best_idx = -np.inf, None
    # sweep the first agent vectorised, the others in an explicit product
    for combo in itertools.product(*(range(len(o)) for o in trajs[1:])):
        rest = sum((o[j] for o, j in zip(trajs[1:], combo)), np.zeros_like(t))
        u = -np.abs(t[None] - first - rest[None]).sum(axis=(1, 2))
        k = int(np.argmax(u))
        if u[k] > best_u:
            best_u, best_idx = float(u[k]), (k, *combo)

    selections = {}
    for a, tr, j in zip(scenario.agents, trajs, best_idx):
        sched = {c: np.zeros(N_SLOTS) for c in CARRIERS}
        for ci, c in enumerate(CARRIERS):
            sched[c][:n_slots] = tr[j][:, ci]
        selections[a.agent_id] = AgentSelection(a.agent_id, sched)
    return OracleResult(best_u, selections, points)
