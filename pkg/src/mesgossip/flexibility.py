"""Storage flexibility bands, SoC bookkeeping and residual-covering schedules.

Power sign follows the package convention: discharge (generation) is
positive, charge is negative. Discharge drains ``p * dt / eff_dis`` from the
store, charging adds ``|p| * dt * eff_ch``. Self-discharge is ignored and the
terminal SoC is left free.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import N_SLOTS, SLOT_HOURS, Carrier, as_schedule
from .errors import ConfigError, InfeasibleDispatch

SOC_TOL = 1e-9


@dataclass(frozen=True)
class StorageParams:
    capacity: float  # kWh
    p_ch_max: float  # kW
    p_dis_max: float  # kW
    eff_ch: float
    eff_dis: float
    carrier: Carrier
    soc_init: float  # kWh

    def __post_init__(self):
        if self.capacity <= 0:
            raise ConfigError("must be positive", "capacity")
        for name in ("p_ch_max", "p_dis_max"):
            if getattr(self, name) <= 0:
                raise ConfigError("must be positive", name)
        for name in ("eff_ch", "eff_dis"):
            if not 0 < getattr(self, name) <= 1:
                raise ConfigError("must lie in (0, 1]", name)
        if not 0 <= self.soc_init <= self.capacity:
            raise ConfigError(f"must lie in [0, {self.capacity}]", "soc_init")
        object.__setattr__(self, "carrier", Carrier(self.carrier))


@dataclass(frozen=True)
class FlexBand:
    p_min_avail: np.ndarray
    p_max_avail: np.ndarray

    def contains(self, schedule, tol: float = 1e-12) -> bool:
        s = np.asarray(schedule)
        return bool(np.all(s >= self.p_min_avail - tol) and np.all(s <= self.p_max_avail + tol))


def soc_trace(schedule, params: StorageParams, soc_init: float | None = None) -> np.ndarray:
    """State of charge before slot 0 through after slot 95 (97 values, kWh).

    Raises InfeasibleDispatch on the first slot that breaks a power rating
    or pushes the SoC outside [0, capacity].
    """
    p = np.asarray(schedule, dtype=float)
    if p.shape != (N_SLOTS,):
        raise InfeasibleDispatch(f"schedule must have {N_SLOTS} slots")
    soc = np.empty(N_SLOTS + 1)
    soc[0] = params.soc_init if soc_init is None else soc_init
    for i, pi in enumerate(p):
        if pi > params.p_dis_max + SOC_TOL or -pi > params.p_ch_max + SOC_TOL:
            raise InfeasibleDispatch(f"power {pi} kW exceeds rating at slot {i}", slot=i)
        if pi > 0:
            soc[i + 1] = soc[i] - pi * SLOT_HOURS / params.eff_dis
        else:
            soc[i + 1] = soc[i] - pi * SLOT_HOURS * params.eff_ch
        if soc[i + 1] < -SOC_TOL or soc[i + 1] > params.capacity + SOC_TOL:
            raise InfeasibleDispatch(f"SoC {soc[i + 1]:.6g} kWh out of bounds after slot {i}", slot=i)
    return soc


def _rated_limits(params: StorageParams, mpo):
    """Per-slot power limits after withholding power reserved by the obligation.

    A positive obligation reserves discharge power, a negative one charge
    power.
    """
    mpo = np.asarray(mpo, dtype=float)
    if mpo.shape != (N_SLOTS,):
        raise ValueError(f"obligation must have {N_SLOTS} slots")
    up = np.clip(params.p_dis_max - np.clip(mpo, 0.0, None), 0.0, None)
    down = np.clip(params.p_ch_max - np.clip(-mpo, 0.0, None), 0.0, None)
    return up, down


def available_band(params: StorageParams, soc_init: float, mpo) -> FlexBand:
    """Feasible power band per slot under ratings, obligations and energy.

    Each edge is tightened along its own trajectory: the upper edge assumes
    every earlier slot discharged at the upper edge (lowest reachable SoC),
    the lower edge assumes maximal charging (highest reachable SoC). Any
    schedule inside the band therefore keeps the SoC within bounds.
    """
    up, down = _rated_limits(params, mpo)
    hi = np.empty(N_SLOTS)
    lo = np.empty(N_SLOTS)
    s_lo = s_hi = float(soc_init)
    for i in range(N_SLOTS):
        hi[i] = min(up[i], max(s_lo, 0.0) * params.eff_dis / SLOT_HOURS)
        s_lo -= hi[i] * SLOT_HOURS / params.eff_dis
        charge = min(down[i], max(params.capacity - s_hi, 0.0) / (params.eff_ch * SLOT_HOURS))
        lo[i] = -charge
        s_hi += charge * SLOT_HOURS * params.eff_ch
    return FlexBand(as_schedule(lo), as_schedule(hi))


def storage_schedule_for_residual(params: StorageParams, soc_init: float, residual,
                                  mpo=None) -> np.ndarray:
    """Cover as much of the residual as the storage can, slot by slot.

    Walks forward through the day, clipping each residual value into the
    power band allowed by the current SoC, then updating the SoC.
    """
    r = np.asarray(residual, dtype=float)
    up, down = _rated_limits(params, np.zeros(N_SLOTS) if mpo is None else mpo)
    out = [0.0] * N_SLOTS
    s = float(soc_init)
    cap, eff_ch, eff_dis, dt = params.capacity, params.eff_ch, params.eff_dis, SLOT_HOURS
    for i in range(N_SLOTS):
        ri = float(r[i])
        if ri > 0:
            p = min(ri, float(up[i]), s * eff_dis / dt)
            s = max(s - p * dt / eff_dis, 0.0)
        elif ri < 0:
            p = -min(-ri, float(down[i]), (cap - s) / (eff_ch * dt))
            s = min(s - p * dt * eff_ch, cap)
        else:
            p = 0.0
        out[i] = p
    return as_schedule(out)
