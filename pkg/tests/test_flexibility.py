import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import schedules
from mesgossip.core import N_SLOTS, Carrier
from mesgossip.errors import ConfigError, InfeasibleDispatch
from mesgossip.flexibility import StorageParams, available_band, soc_trace, storage_schedule_for_residual

ES = StorageParams(12.0, 1.5, 1.5, 0.95, 0.95, Carrier.P, 12.0)
ZERO = np.zeros(N_SLOTS)


def storage(capacity=12.0, soc=6.0, power=1.5, eff=0.95):
    return StorageParams(capacity, power, power, eff, eff, Carrier.P, soc)


def forward_oracle(params, soc, residual):
    """Plain-Python greedy: clip each slot to what the current SoC allows."""
    out = []
    for r in residual:
        if r > 0:
            p = min(r, params.p_dis_max, soc * params.eff_dis / 0.25)
            soc -= p * 0.25 / params.eff_dis
        else:
            p = -min(-r, params.p_ch_max, (params.capacity - soc) / (params.eff_ch * 0.25))
            soc -= p * 0.25 * params.eff_ch
        out.append(p)
    return np.array(out)


def test_storage_validation():
    with pytest.raises(ConfigError, match="capacity"):
        storage(capacity=-1.0)
    with pytest.raises(ConfigError, match="soc_init"):
        storage(soc=20.0)
    with pytest.raises(ConfigError, match="eff_ch"):
        StorageParams(12.0, 1.5, 1.5, 0.0, 0.9, Carrier.P, 0.0)


def test_soc_constant_when_idle():
    np.testing.assert_array_equal(soc_trace(ZERO, ES), np.full(N_SLOTS + 1, 12.0))


def test_soc_one_discharge_slot():
    s = ZERO.copy()
    s[0] = 1.5
    trace = soc_trace(s, ES)
    assert 12.0 - trace[1] == pytest.approx(1.5 * 0.25 / 0.95)
    assert 12.0 - trace[1] == pytest.approx(0.3947, abs=1e-4)


def test_soc_violation_reports_first_slot():
    s = np.full(N_SLOTS, 1.5)
    with pytest.raises(InfeasibleDispatch) as exc:
        soc_trace(s, ES)
    # 12 kWh * 0.95 / 0.375 kWh per slot = 30.4 slots
    assert exc.value.slot == 30
    with pytest.raises(InfeasibleDispatch):
        soc_trace(np.full(N_SLOTS, 2.0), storage(capacity=100, soc=50))


def test_band_full_and_empty():
    band = available_band(ES, 12.0, ZERO)
    assert band.p_max_avail[0] == 1.5
    assert band.p_min_avail[0] == 0.0  # already full
    empty = available_band(ES, 0.0, ZERO)
    assert empty.p_max_avail[0] == 0.0
    assert empty.p_min_avail[0] == -1.5


def test_band_energy_exhaustion():
    hi = available_band(ES, 12.0, ZERO).p_max_avail
    assert np.all(hi[:30] == 1.5)
    assert hi[30] == pytest.approx(0.4 * 1.5)
    assert not hi[31:].any()
    assert np.sum(hi * 0.25 / 0.95) == pytest.approx(12.0)
    soc_trace(hi, ES)


def test_band_reserves_obligation():
    mpo = np.full(N_SLOTS, 0.5)
    band = available_band(storage(), 6.0, mpo)
    assert band.p_max_avail[0] == pytest.approx(1.0)
    assert band.p_min_avail[0] == pytest.approx(-1.5)
    band = available_band(storage(), 6.0, -mpo)
    assert band.p_min_avail[0] == pytest.approx(-1.0)


def test_schedule_zero_residual():
    assert not storage_schedule_for_residual(ES, 6.0, ZERO).any()


def test_schedule_full_discharge_then_zero():
    out = storage_schedule_for_residual(ES, 12.0, np.full(N_SLOTS, 1.5))
    np.testing.assert_allclose(out, available_band(ES, 12.0, ZERO).p_max_avail, atol=1e-12)


def test_schedule_alternating_matches_residual():
    r = np.where(np.arange(N_SLOTS) % 2 == 0, 1.0, -1.0)
    np.testing.assert_allclose(storage_schedule_for_residual(storage(), 6.0, r), r, atol=1e-12)


def test_schedule_empty_storage_cannot_discharge():
    assert not storage_schedule_for_residual(storage(soc=0.0), 0.0, np.full(N_SLOTS, 1.0)).any()


def test_in_band_schedules_are_feasible_bulk():
    """10^4 random schedules drawn inside random bands all pass the SoC check."""
    rng = np.random.default_rng(2024)
    for k in range(10_000):
        cap = rng.uniform(1.0, 30.0)
        params = StorageParams(cap, rng.uniform(0.1, 3), rng.uniform(0.1, 3), rng.uniform(0.5, 1),
                               rng.uniform(0.5, 1), Carrier.H, rng.uniform(0, cap))
        band = available_band(params, params.soc_init, rng.normal(0, 0.3, N_SLOTS))
        sched = rng.uniform(band.p_min_avail, band.p_max_avail)
        soc_trace(sched, params)


@given(st.floats(1.0, 50.0), st.floats(0.0, 1.0), st.floats(0.5, 1.0), schedules(-3, 3), st.data())
def test_in_band_schedule_passes_soc(cap, frac, eff, mpo, data):
    params = StorageParams(cap, 1.5, 2.0, eff, eff, Carrier.P, frac * cap)
    band = available_band(params, params.soc_init, mpo)
    assert np.all(band.p_min_avail <= band.p_max_avail)
    u = np.array(data.draw(st.lists(st.floats(0, 1), min_size=N_SLOTS, max_size=N_SLOTS)))
    sched = band.p_min_avail + u * (band.p_max_avail - band.p_min_avail)
    assert band.contains(sched)
    trace = soc_trace(sched, params)
    assert np.all(trace >= -1e-9) and np.all(trace <= cap + 1e-9)


@given(st.floats(1.0, 30.0), st.floats(0.0, 30.0), st.floats(0.0, 1.0), schedules(-2, 2))
def test_larger_capacity_never_shrinks_band(cap, extra, frac, mpo):
    small = storage(capacity=cap, soc=frac * cap)
    big = storage(capacity=cap + extra, soc=frac * cap)
    a = available_band(small, small.soc_init, mpo)
    b = available_band(big, big.soc_init, mpo)
    assert np.all(b.p_max_avail >= a.p_max_avail - 1e-12)
    assert np.all(b.p_min_avail <= a.p_min_avail + 1e-12)


@given(st.floats(0.0, 1.0), schedules(-3, 3))
def test_residual_schedule_is_greedy_and_feasible(frac, residual):
    params = storage(soc=12.0 * frac)
    out = storage_schedule_for_residual(params, params.soc_init, residual)
    soc_trace(out, params)
    np.testing.assert_allclose(out, forward_oracle(params, params.soc_init, residual), atol=1e-9)
