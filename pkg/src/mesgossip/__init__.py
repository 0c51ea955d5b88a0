"""Distributed multi-energy schedule negotiation via gossip."""
from .core import CARRIERS, N_SLOTS, SLOT_HOURS, AgentSelection, Carrier
from .gossip import run_negotiation
from .harness import brute_force_oracle, fulfillment_rate, run_experiment
from .scenarios import build_electric_scenario, build_gas_scenario, build_scenario, load_scenario, save_scenario

__all__ = [
    "CARRIERS", "N_SLOTS", "SLOT_HOURS", "AgentSelection", "Carrier", "run_negotiation",
    "brute_force_oracle", "fulfillment_rate", "run_experiment", "build_electric_scenario",
    "build_gas_scenario", "build_scenario", "load_scenario", "save_scenario",
]
