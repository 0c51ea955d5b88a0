import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mesgossip.core import N_SLOTS
from mesgossip.errors import ConfigError, InfeasibleDispatch
from mesgossip.units import (ChpParams, HpParams, SolarParams, WindParams, chp_coupled_heat, chp_gas_for_power,
                             chp_output, hp_coupled, rotor_area_for_rating, solar_profile, wind_profile)

BIG = ChpParams.from_rating(1.1, 0.45, 0.40)


def test_chp_validation():
    with pytest.raises(ConfigError, match="rho"):
        ChpParams(0.7, 0.4, 50e6, 1.0)
    with pytest.raises(ConfigError, match="hhv"):
        ChpParams(0.4, 0.4, 0.0, 1.0)
    with pytest.raises(ConfigError, match="m_dot_max"):
        ChpParams(0.4, 0.4, 50e6, -1.0)


def test_chp_zero_gas():
    p, h = chp_output(np.zeros(N_SLOTS), BIG)
    assert not p.any() and not h.any()


def test_chp_one_kg_per_hour():
    params = ChpParams(0.45, 0.40, 50e6, 2.0)
    p, h = chp_output(np.ones(N_SLOTS), params)
    # 0.45 * 50e6 / 3600 W
    assert p[0] == pytest.approx(6.25)
    assert h[0] / p[0] == pytest.approx(0.40 / 0.45)


def test_chp_out_of_bounds_reports_slot():
    m = np.zeros(N_SLOTS)
    m[17] = BIG.m_dot_max * 1.5
    with pytest.raises(InfeasibleDispatch) as exc:
        chp_output(m, BIG)
    assert exc.value.slot == 17


def test_chp_full_dispatch_heat():
    assert BIG.rating == pytest.approx(1.1)
    m = chp_gas_for_power(1.1, BIG)
    assert m == pytest.approx(BIG.m_dot_max)
    assert chp_coupled_heat(1.1, BIG) == pytest.approx(1.1 * 0.40 / 0.45)
    assert chp_coupled_heat(1.1, BIG) == pytest.approx(0.978, abs=1e-3)


def test_chp_gas_limits():
    assert chp_gas_for_power(0.0, BIG) == 0.0
    with pytest.raises(InfeasibleDispatch):
        chp_gas_for_power(1.2, BIG)
    with pytest.raises(InfeasibleDispatch):
        chp_gas_for_power(0.5, BIG, p_diverted=0.1)
    reserve = ChpParams.from_rating(1.1, 0.45, 0.40, p_reserved_max=0.2)
    assert chp_gas_for_power(0.5, reserve, p_diverted=0.2) == pytest.approx(chp_gas_for_power(0.7, BIG))
    with pytest.raises(InfeasibleDispatch):
        chp_gas_for_power(1.0, reserve, p_diverted=0.2)


@given(st.floats(0.0, 1.1))
def test_chp_round_trip(p):
    m = chp_gas_for_power(p, BIG)
    out, heat = chp_output(np.full(N_SLOTS, m), BIG)
    assert abs(out[0] - p) < 1e-9
    assert heat[0] == pytest.approx(p * BIG.heat_ratio, abs=1e-12)


@given(st.floats(0.0, 1.0))
def test_chp_strictly_proportional(frac):
    p, h = chp_output(np.full(N_SLOTS, frac * BIG.m_dot_max), BIG)
    assert np.all(p >= 0) and np.all(p <= BIG.rating + 1e-12)
    if frac > 0:
        assert np.allclose(h / p, 0.40 / 0.45)


def test_wind_formula():
    w = WindParams(1.225, 10.0, 0.4, 3.7)
    assert w.base_power_w() == pytest.approx(0.5 * 1.225 * 10 * 3.7**3 * 0.4)
    assert w.base_power_w() == pytest.approx(124.1, abs=0.05)


def test_wind_zero_speed_zero_delta():
    w = WindParams(max_wind_speed=0.0, delta_mean=0.0, delta_var=0.0)
    assert not wind_profile(w, 3).any()


def test_wind_validation():
    with pytest.raises(ConfigError, match="power_coeff"):
        WindParams(power_coeff=0.6)
    with pytest.raises(ConfigError):
        WindParams(rotor_area=0.0)


def test_wind_determinism_and_structure():
    w = WindParams()
    a, b = wind_profile(w, 7), wind_profile(w, 7)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, wind_profile(w, 8))
    # one perturbation per 30 min
    np.testing.assert_array_equal(a[0::2], a[1::2])
    assert np.all(a >= 0)


def test_wind_rating_calibration():
    area = rotor_area_for_rating(2.0, 8.0)
    prof = wind_profile(WindParams(rotor_area=area, max_wind_speed=8.0), 0)
    assert prof.mean() == pytest.approx(2.0, abs=0.01)


def test_solar_noise_free_is_base():
    base = np.linspace(0, 1, N_SLOTS)
    np.testing.assert_array_equal(solar_profile(SolarParams(base), 1), base)


def test_solar_zero_base_stays_nonnegative():
    out = solar_profile(SolarParams(np.zeros(N_SLOTS), noise_std=1.0, rating=1.0), 2)
    assert np.all(out >= 0) and not out.any()


def test_solar_clip_and_determinism():
    base = np.zeros(N_SLOTS)
    base[30:60] = 1.0
    params = SolarParams(base, noise_std=0.3, rating=1.0)
    a = solar_profile(params, 5)
    np.testing.assert_array_equal(a, solar_profile(params, 5))
    assert np.all((a >= 0) & (a <= 1.0))
    assert not a[:30].any() and not a[60:].any()


def test_hp_examples():
    hp = HpParams(4.0, 2.0)
    assert hp_coupled(0.0, hp) == (0.0, 0.0)
    assert hp_coupled(2.0, hp) == (-2.0, 8.0)
    with pytest.raises(InfeasibleDispatch):
        hp_coupled(2.5, hp)
    with pytest.raises(ConfigError, match="cop"):
        HpParams(1.0, 2.0)


@given(st.floats(1e-6, 2.7))
def test_hp_ratio_is_cop(d):
    el, heat = hp_coupled(d, HpParams(4.0, 2.7))
    assert -2.7 <= el <= 0
    assert heat / -el == pytest.approx(4.0, rel=1e-12)
