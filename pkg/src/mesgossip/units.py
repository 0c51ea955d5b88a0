"""Physical unit models: CHP, wind, solar and heat pump.

CHP equations work in W internally (HHV in J/kg, gas rate in kg/h); every
public function returns kW.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import N_SLOTS, as_schedule
from .errors import ConfigError, InfeasibleDispatch

_TOL = 1e-9
BETZ_LIMIT = 0.593


@dataclass(frozen=True)
class ChpParams:
    rho: float  # electric efficiency
    eta: float  # heat efficiency
    hhv: float  # J/kg
    m_dot_max: float  # kg/h
    p_reserved_max: float = 0.0  # kW

    def __post_init__(self):
        if not (self.rho > 0 and self.eta > 0 and self.rho + self.eta <= 1):
            raise ConfigError(f"need 0 < rho, 0 < eta, rho + eta <= 1 (got {self.rho}, {self.eta})", "rho")
        if self.hhv <= 0:
            raise ConfigError("must be positive", "hhv")
        if self.m_dot_max <= 0:
            raise ConfigError("must be positive", "m_dot_max")
        if self.p_reserved_max < 0:
            raise ConfigError("must be non-negative", "p_reserved_max")

    @classmethod
    def from_rating(cls, p_el_kw: float, rho: float, eta: float, hhv: float = 50e6, p_reserved_max: float = 0.0):
        """Size the gas limit so full dispatch yields ``p_el_kw`` electric."""
        return cls(rho, eta, hhv, 3600.0 * p_el_kw * 1000.0 / (rho * hhv), p_reserved_max)

    @property
    def rating(self) -> float:
        """Electric output at maximum gas rate, kW."""
        return self.rho * self.m_dot_max * self.hhv / 3600.0 / 1000.0

    @property
    def heat_ratio(self) -> float:
        return self.eta / self.rho


def chp_output(gas_rates, params: ChpParams) -> tuple[np.ndarray, np.ndarray]:
    """Electric and heat output (kW) for a 96-slot gas rate vector (kg/h)."""
    m = np.asarray(gas_rates, dtype=float)
    bad = np.flatnonzero((m < -_TOL) | (m > params.m_dot_max * (1 + 1e-12) + _TOL))
    if bad.size:
        i = int(bad[0])
        raise InfeasibleDispatch(f"gas rate {m[i]} outside [0, {params.m_dot_max}] at slot {i}", slot=i)
    energy_w = m * params.hhv / 3600.0
    return as_schedule(params.rho * energy_w / 1000.0), as_schedule(params.eta * energy_w / 1000.0)


def chp_gas_for_power(p_el, params: ChpParams, p_diverted=0.0):
    """Gas rate (kg/h) needed to deliver ``p_el`` kW to the negotiation.

    ``p_diverted`` is generated power used for other purposes; it is bounded
    by ``p_reserved_max``. Works on scalars and arrays.
    """
    p = np.asarray(p_el, dtype=float)
    d = np.asarray(p_diverted, dtype=float)
    if np.any(d < -_TOL) or np.any(d > params.p_reserved_max + _TOL):
        raise InfeasibleDispatch(f"diverted power exceeds reserve limit {params.p_reserved_max} kW")
    gen = p + d
    if np.any(p < -_TOL) or np.any(gen > params.rating + _TOL):
        raise InfeasibleDispatch(f"electric power outside [0, {params.rating}] kW")
    m = 3600.0 * np.clip(gen, 0.0, None) * 1000.0 / (params.rho * params.hhv)
    return float(m) if m.ndim == 0 else m


def chp_coupled_heat(p_el, params: ChpParams):
    """Heat output slaved to electric generation by the efficiency ratio."""
    return np.asarray(p_el, dtype=float) * params.heat_ratio


@dataclass(frozen=True)
class WindParams:
    air_density: float = 1.225  # kg/m^3
    rotor_area: float = 15.885  # m^2
    power_coeff: float = 0.4
    max_wind_speed: float = 8.0  # m/s, daily maximum
    delta_mean: float = 3.7
    delta_var: float = 0.5

    def __post_init__(self):
        for name in ("air_density", "rotor_area", "power_coeff"):
            if getattr(self, name) <= 0:
                raise ConfigError("must be positive", name)
        if self.power_coeff > BETZ_LIMIT:
            raise ConfigError(f"exceeds Betz limit {BETZ_LIMIT}", "power_coeff")
        if self.max_wind_speed < 0 or self.delta_var < 0:
            raise ConfigError("must be non-negative", "max_wind_speed")

    def base_power_w(self) -> float:
        return 0.5 * self.air_density * self.rotor_area * self.max_wind_speed**3 * self.power_coeff


def rotor_area_for_rating(rating_kw: float, max_wind_speed: float, air_density: float = 1.225,
                          power_coeff: float = 0.4, delta_mean: float = 3.7) -> float:
    """Rotor area giving an expected output of ``rating_kw``."""
    target_w = rating_kw * 1000.0 - 2.0 * delta_mean
    return target_w / (0.5 * air_density * max_wind_speed**3 * power_coeff)


def wind_profile(params: WindParams, rng_seed) -> np.ndarray:
    """Wind output in kW; the perturbation is redrawn every 30 min."""
    rng = np.random.default_rng(rng_seed)
    deltas = rng.normal(params.delta_mean, np.sqrt(params.delta_var), N_SLOTS // 2)
    power_w = params.base_power_w() + 2.0 * np.repeat(deltas, 2)
    return as_schedule(np.clip(power_w, 0.0, None) / 1000.0)


@dataclass(frozen=True)
class SolarParams:
    base_profile: np.ndarray  # kW
    noise_std: float = 0.0  # kW
    rating: float | None = None

    def __post_init__(self):
        base = as_schedule(self.base_profile)
        if np.any(base < 0):
            raise ConfigError("must be non-negative", "base_profile")
        if self.noise_std < 0:
            raise ConfigError("must be non-negative", "noise_std")
        object.__setattr__(self, "base_profile", base)
        if self.rating is None:
            object.__setattr__(self, "rating", float(base.max()))

    def __eq__(self, other):
        if not isinstance(other, SolarParams):
            return NotImplemented
        return (np.array_equal(self.base_profile, other.base_profile)
                and self.noise_std == other.noise_std and self.rating == other.rating)

    __hash__ = None


def solar_profile(params: SolarParams, rng_seed) -> np.ndarray:
    """Base profile plus Gaussian noise, kept inside daylight and [0, rating]."""
    if params.noise_std == 0:
        return params.base_profile
    rng = np.random.default_rng(rng_seed)
    noisy = params.base_profile + rng.normal(0.0, params.noise_std, N_SLOTS)
    noisy = np.clip(noisy, 0.0, params.rating)
    noisy[params.base_profile <= 0] = 0.0
    return as_schedule(noisy)


@dataclass(frozen=True)
class HpParams:
    cop: float
    p_el_max: float  # kW

    def __post_init__(self):
        if self.cop <= 1:
            raise ConfigError("must exceed 1", "cop")
        if self.p_el_max <= 0:
            raise ConfigError("must be positive", "p_el_max")


def hp_coupled(p_el_draw, params: HpParams):
    """Electric contribution (negative) and heat output for a given draw."""
    d = np.asarray(p_el_draw, dtype=float)
    if np.any(d < -_TOL) or np.any(d > params.p_el_max + _TOL):
        raise InfeasibleDispatch(f"draw outside [0, {params.p_el_max}] kW")
    el, heat = -d, params.cop * d
    if d.ndim == 0:
        return float(el), float(heat)
    return el, heat
