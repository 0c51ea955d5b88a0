"""Scenario rosters, variant presets, target profiles and config files.

Two families share one pair of target profiles:

* gas-based (GB, GBS-H, GBS-L, GBS-M): 15 solar plants, 6 CHPs and, except
  for GB, two heat and two electric storages;
* pure electric (PES-H, PES-L, PES-M): 15 solar plants, 5 wind plants,
  3 heat pumps, one heat and one electric storage.

Suffix H/L picks the high or low penalty preset; M keeps the low penalties
and adds market opportunity cost to every agent.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Union

import numpy as np
import tomli
import tomli_w

from .core import CARRIERS, N_SLOTS, Carrier, as_schedule
from .errors import ConfigError
from .flexibility import StorageParams
from .objectives import AgentEconParams
from .units import (ChpParams, HpParams, SolarParams, WindParams, rotor_area_for_rating,
                    solar_profile, wind_profile)

GAS_VARIANTS = ("GB", "GBS-H", "GBS-L", "GBS-M")
ELECTRIC_VARIANTS = ("PES-H", "PES-L", "PES-M")
VARIANTS = GAS_VARIANTS + ELECTRIC_VARIANTS
KINDS = ("chp", "solar", "wind", "hp", "storage")

GAMMA = 0.30
DELTA = 0.10
THETA_GAS = 0.08
PENALTY_HIGH = 10.0
PENALTY_LOW = 0.5
PENALTY_EXPONENT = 2.0

CHP_RHO, CHP_ETA, CHP_HHV = 0.45, 0.40, 50e6
WIND_SPEED = 8.0
SOLAR_NOISE = 0.05  # fraction of rating
SOC_INIT_FRACTION = 0.5

UnitParams = Union[ChpParams, SolarParams, WindParams, HpParams, StorageParams]
_PARAM_TYPES = {"chp": ChpParams, "solar": SolarParams, "wind": WindParams,
                "hp": HpParams, "storage": StorageParams}


@dataclass(frozen=True)
class NegotiationParams:
    n_iterations: int = 32
    max_cycles: int = 500
    r_ms: float = 10.0
    min_improvement: float = 1e-6
    message_budget: int = 1_000_000

    def __post_init__(self):
        if self.n_iterations < 1:
            raise ConfigError("must be >= 1", "negotiation.n_iterations")
        if self.max_cycles < 1:
            raise ConfigError("must be >= 1", "negotiation.max_cycles")
        if self.r_ms <= 0:
            raise ConfigError("must be positive", "negotiation.r_ms")
        if self.min_improvement < 0:
            raise ConfigError("must be non-negative", "negotiation.min_improvement")


@dataclass(frozen=True)
class AgentSpec:
    agent_id: str
    kind: str
    params: UnitParams
    econ: AgentEconParams
    profile: np.ndarray | None = None  # available output, renewables only

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown kind {self.kind!r}", "agent.kind")
        if not isinstance(self.params, _PARAM_TYPES[self.kind]):
            raise ConfigError(f"{self.kind} agent needs {_PARAM_TYPES[self.kind].__name__}", "agent.params")
        if self.kind in ("solar", "wind"):
            if self.profile is None:
                raise ConfigError("renewable agent needs a profile", "agent.profile")
            prof = as_schedule(self.profile)
            if np.any(prof < 0):
                raise ConfigError("must be non-negative", "agent.profile")
            object.__setattr__(self, "profile", prof)

    def __eq__(self, other):
        if not isinstance(other, AgentSpec):
            return NotImplemented
        same_profile = (self.profile is None) == (other.profile is None) and (
            self.profile is None or np.array_equal(self.profile, other.profile))
        return (self.agent_id, self.kind, self.params, self.econ) == (
            other.agent_id, other.kind, other.params, other.econ) and same_profile

    __hash__ = None

    @property
    def rating(self) -> float:
        """Largest absolute power the unit can put on its main carrier, kW."""
        p = self.params
        if self.kind == "chp":
            return p.rating
        if self.kind == "hp":
            return p.p_el_max
        if self.kind == "storage":
            return max(p.p_ch_max, p.p_dis_max)
        return float(self.profile.max())


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    agents: tuple[AgentSpec, ...]
    targets: dict
    seed: int = 0
    family: str = "custom"
    negotiation: NegotiationParams = field(default_factory=NegotiationParams)

    def __post_init__(self):
        ids = [a.agent_id for a in self.agents]
        if len(set(ids)) != len(ids):
            raise ConfigError("duplicate agent ids", "agent.id")
        missing = [c.value for c in CARRIERS if c not in self.targets]
        if missing:
            raise ConfigError(f"missing target for carrier(s) {missing}", "targets")
        object.__setattr__(self, "agents", tuple(self.agents))
        object.__setattr__(self, "targets", {c: as_schedule(self.targets[c]) for c in CARRIERS})

    def __eq__(self, other):
        if not isinstance(other, ScenarioSpec):
            return NotImplemented
        return ((self.name, self.seed, self.family, self.negotiation, self.agents)
                == (other.name, other.seed, other.family, other.negotiation, other.agents)
                and all(np.array_equal(self.targets[c], other.targets[c]) for c in CARRIERS))

    __hash__ = None

    @property
    def agent_ids(self) -> list[str]:
        return [a.agent_id for a in self.agents]

    def agent(self, agent_id: str) -> AgentSpec:
        for a in self.agents:
            if a.agent_id == agent_id:
                return a
        raise KeyError(agent_id)

    def with_negotiation(self, **changes) -> "ScenarioSpec":
        return dataclasses.replace(self, negotiation=dataclasses.replace(self.negotiation, **changes))


# -- bundled data ---------------------------------------------------------------

def _read_series(name: str) -> np.ndarray:
    text = resources.files("mesgossip.data").joinpath(name).read_text()
    values = [float(line) for line in text.splitlines() if line.strip() and not line.startswith("#")]
    return as_schedule(values)


def solar_base_shape() -> np.ndarray:
    """Normalised clear-day solar shape (peak 1)."""
    return _read_series("solar_base.csv")


def market_prices() -> np.ndarray:
    """Day-ahead price series, EUR/kWh."""
    return _read_series("market_prices.csv")


# -- targets ----------------------------------------------------------------------

def _bump(center_slot: float, width: float) -> np.ndarray:
    t = np.arange(N_SLOTS)
    return np.exp(-0.5 * ((t - center_slot) / width) ** 2)


def generate_targets(kind: str = "shared", seed: int = 0, scale: float = 1.0) -> dict[Carrier, np.ndarray]:
    """Electric and heat target schedules (kW).

    Electric follows a residential double peak (morning, evening) with a
    small midday shoulder; heat peaks earlier in the morning and later in
    the evening. Both families use the same profiles, so ``kind`` and
    ``seed`` do not change the result; they are accepted for symmetry with
    the roster builders.
    """
    if kind not in ("shared", "gas", "electric"):
        raise ValueError(f"unknown target kind {kind!r}")
    electric = 1.6 + 2.2 * _bump(30, 6) + 2.6 * _bump(76, 7) + 0.6 * _bump(52, 10)
    heat = 2.3 + 3.9 * _bump(24, 6) + 3.6 * _bump(86, 7)
    return {Carrier.P: as_schedule(scale * electric), Carrier.H: as_schedule(scale * heat)}


# -- rosters ----------------------------------------------------------------------

def _sub_seed(seed: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, index])


def _econ(variant: str, kind: str) -> AgentEconParams:
    level = variant.split("-")[-1] if "-" in variant else "H"
    pen = PENALTY_HIGH if level == "H" else PENALTY_LOW
    prices = market_prices() if level == "M" else None
    theta = THETA_GAS if kind == "chp" else 0.0
    return AgentEconParams(GAMMA, DELTA, theta, pen, pen, PENALTY_EXPONENT, prices)


def _solar_agents(variant: str, seed: int, rating: float, count: int = 15) -> list[AgentSpec]:
    base = solar_base_shape() * rating
    out = []
    for k in range(count):
        params = SolarParams(base, SOLAR_NOISE * rating, rating)
        out.append(AgentSpec(f"solar_{k:02d}", "solar", params, _econ(variant, "solar"),
                             solar_profile(params, _sub_seed(seed, 100 + k))))
    return out


def _storage(agent_id: str, carrier: Carrier, power: float, eff: float, capacity: float,
             variant: str) -> AgentSpec:
    params = StorageParams(capacity, power, power, eff, eff, carrier, SOC_INIT_FRACTION * capacity)
    return AgentSpec(agent_id, "storage", params, _econ(variant, "storage"))


def build_gas_scenario(variant: str = "GBS-H", seed: int = 0) -> ScenarioSpec:
    if variant not in GAS_VARIANTS:
        raise ValueError(f"unknown gas variant {variant!r}")
    agents = _solar_agents(variant, seed, 0.2)
    for k, p_el in enumerate((1.1, 1.1, 1.1, 0.7, 0.7, 0.7)):
        agents.append(AgentSpec(f"chp_{k:02d}", "chp", ChpParams.from_rating(p_el, CHP_RHO, CHP_ETA, CHP_HHV),
                                _econ(variant, "chp")))
    if variant != "GB":
        for k, cap in enumerate((12.0, 16.0)):
            agents.append(_storage(f"hs_{k:02d}", Carrier.H, 1.5, 0.99, cap, variant))
            agents.append(_storage(f"es_{k:02d}", Carrier.P, 1.5, 0.95, cap, variant))
    return ScenarioSpec(variant, tuple(agents), generate_targets("gas", seed), seed, "gas")


def build_electric_scenario(variant: str = "PES-H", seed: int = 0) -> ScenarioSpec:
    if variant not in ELECTRIC_VARIANTS:
        raise ValueError(f"unknown electric variant {variant!r}")
    agents = _solar_agents(variant, seed, 1.1)
    area = rotor_area_for_rating(2.0, WIND_SPEED)
    for k in range(5):
        params = WindParams(rotor_area=area, max_wind_speed=WIND_SPEED)
        agents.append(AgentSpec(f"wind_{k:02d}", "wind", params, _econ(variant, "wind"),
                                wind_profile(params, _sub_seed(seed, 200 + k))))
    for k, p_el in enumerate((2.7, 2.0, 1.3)):
        agents.append(AgentSpec(f"hp_{k:02d}", "hp", HpParams(4.0, p_el), _econ(variant, "hp")))
    agents.append(_storage("hs_00", Carrier.H, 10.0, 0.99, 84.0, variant))
    agents.append(_storage("es_00", Carrier.P, 10.0, 0.95, 84.0, variant))
    return ScenarioSpec(variant, tuple(agents), generate_targets("electric", seed), seed, "electric")


def build_scenario(variant: str, seed: int = 0) -> ScenarioSpec:
    if variant in GAS_VARIANTS:
        return build_gas_scenario(variant, seed)
    if variant in ELECTRIC_VARIANTS:
        return build_electric_scenario(variant, seed)
    raise ValueError(f"unknown variant {variant!r}; choose from {', '.join(VARIANTS)}")


def max_deliverable_energy(spec: ScenarioSpec) -> dict[Carrier, float]:
    """Upper bound on the energy (kWh) each carrier could receive over the day,
    counting every unit at full output and storages emptied completely."""
    out = {Carrier.P: 0.0, Carrier.H: 0.0}
    for a in spec.agents:
        p = a.params
        if a.kind == "chp":
            out[Carrier.P] += p.rating * 24
            out[Carrier.H] += p.rating * p.heat_ratio * 24
        elif a.kind in ("solar", "wind"):
            out[Carrier.P] += float(a.profile.sum()) * 0.25
        elif a.kind == "hp":
            out[Carrier.H] += p.p_el_max * p.cop * 24
        else:
            out[p.carrier] += p.soc_init * p.eff_dis
    return out


# -- config files -------------------------------------------------------------------

def _params_to_dict(spec: AgentSpec) -> dict[str, Any]:
    d = dataclasses.asdict(spec.params) if spec.kind != "solar" else {
        "base_profile": [float(v) for v in spec.params.base_profile],
        "noise_std": spec.params.noise_std, "rating": spec.params.rating}
    if spec.kind == "storage":
        d["carrier"] = spec.params.carrier.value
    return d


def _econ_to_dict(econ: AgentEconParams) -> dict[str, Any]:
    d = {k: getattr(econ, k) for k in ("gamma", "delta", "theta", "p_P", "p_H", "p_e")}
    if econ.market_prices is not None:
        d["market_prices"] = [float(v) for v in econ.market_prices]
    return d


def scenario_to_dict(spec: ScenarioSpec) -> dict[str, Any]:
    agents = []
    for a in spec.agents:
        entry: dict[str, Any] = {"id": a.agent_id, "kind": a.kind, "params": _params_to_dict(a),
                                 "econ": _econ_to_dict(a.econ)}
        if a.profile is not None:
            entry["profile"] = [float(v) for v in a.profile]
        agents.append(entry)
    first = spec.agents[0].econ if spec.agents else AgentEconParams()
    return {
        "scenario": {"name": spec.name, "family": spec.family, "seed": spec.seed,
                     "negotiation": dataclasses.asdict(spec.negotiation)},
        "targets": {c.value: [float(v) for v in spec.targets[c]] for c in CARRIERS},
        "penalties": {"p_P": first.p_P, "p_H": first.p_H, "p_e": first.p_e},
        "agent": agents,
    }


def save_scenario(spec: ScenarioSpec, path) -> Path:
    path = Path(path)
    path.write_bytes(tomli_w.dumps(scenario_to_dict(spec)).encode())
    return path


def _require(table: dict, key: str, where: str):
    if key not in table:
        raise ConfigError("missing", f"{where}.{key}")
    return table[key]


def _build(cls, values: dict, where: str):
    try:
        return cls(**values)
    except ConfigError as exc:
        raise ConfigError(str(exc), f"{where}") from exc
    except TypeError as exc:
        raise ConfigError(str(exc), where) from exc


def scenario_from_dict(doc: dict[str, Any]) -> ScenarioSpec:
    scen = _require(doc, "scenario", "")
    targets_tbl = _require(doc, "targets", "")
    targets = {}
    for c in CARRIERS:
        values = _require(targets_tbl, c.value, "targets")
        try:
            targets[c] = as_schedule(values)
        except ValueError as exc:
            raise ConfigError(str(exc), f"targets.{c.value}") from exc
    penalties = doc.get("penalties", {})
    negotiation = _build(NegotiationParams, dict(scen.get("negotiation", {})), "scenario.negotiation")

    agents = []
    for i, entry in enumerate(doc.get("agent", [])):
        where = f"agent[{i}]"
        kind = _require(entry, "kind", where)
        if kind not in KINDS:
            raise ConfigError(f"unknown kind {kind!r}", f"{where}.kind")
        params = dict(_require(entry, "params", where))
        if kind == "storage":
            try:
                params["carrier"] = Carrier(params.get("carrier"))
            except ValueError as exc:
                raise ConfigError(str(exc), f"{where}.params.carrier") from exc
        unit = _build(_PARAM_TYPES[kind], params, f"{where}.params")
        econ_vals = {**{k: v for k, v in penalties.items() if k in ("p_P", "p_H", "p_e")},
                     **entry.get("econ", {})}
        econ = _build(AgentEconParams, econ_vals, f"{where}.econ")
        agents.append(_build(AgentSpec, {"agent_id": _require(entry, "id", where), "kind": kind,
                                         "params": unit, "econ": econ, "profile": entry.get("profile")},
                             where))
    return _build(ScenarioSpec, {"name": _require(scen, "name", "scenario"), "agents": tuple(agents),
                                 "targets": targets, "seed": int(scen.get("seed", 0)),
                                 "family": scen.get("family", "custom"), "negotiation": negotiation},
                  "scenario")


def load_scenario(path) -> ScenarioSpec:
    try:
        doc = tomli.loads(Path(path).read_text())
    except (OSError, tomli.TOMLDecodeError) as exc:
        raise ConfigError(str(exc)) from exc
    return scenario_from_dict(doc)
