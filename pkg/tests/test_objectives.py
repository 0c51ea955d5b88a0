import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from conftest import schedules
from mesgossip.core import N_SLOTS, Carrier, target_schedules
from mesgossip.errors import ConfigError, MalformedSelection
from mesgossip.objectives import (AgentEconParams, carrier_utility, penalty_dominance_check, per_carrier_utility,
                                  private_optimal_offset, private_utility, total_utility)
from mesgossip.scenarios import PENALTY_HIGH, PENALTY_LOW, market_prices

ZERO = np.zeros(N_SLOTS)
ONES = np.ones(N_SLOTS)


def test_econ_validation():
    with pytest.raises(ConfigError, match="p_P"):
        AgentEconParams(p_P=-1)
    with pytest.raises(ConfigError, match="p_e"):
        AgentEconParams(p_e=0.5)


def test_carrier_utility_examples(rng):
    assert carrier_utility(ONES, ONES) == 0
    assert carrier_utility(ONES, ZERO) == -96
    a, b = rng.normal(size=N_SLOTS), rng.normal(size=N_SLOTS)
    assert carrier_utility(a, b) == pytest.approx(-sum(abs(x - y) for x, y in zip(a, b)))


def test_total_utility_examples(rng):
    t = target_schedules(ONES, ONES)
    assert total_utility(t, t) == 0
    assert total_utility(t, {Carrier.P: ZERO, Carrier.H: ONES}) == -96
    a, b, c, d = rng.normal(size=(4, N_SLOTS))
    got = total_utility(target_schedules(a, b), target_schedules(c, d))
    assert got == pytest.approx(-np.abs(a - c).sum() - np.abs(b - d).sum())
    assert sum(per_carrier_utility(target_schedules(a, b), target_schedules(c, d)).values()) == pytest.approx(got)
    with pytest.raises(MalformedSelection):
        total_utility(t, {Carrier.P: ONES})


def test_private_utility_examples():
    econ = AgentEconParams(gamma=1.0, delta=0.0, theta=0.0, p_P=7.0, p_H=3.0)
    assert private_utility(AgentEconParams(), ZERO, ZERO, ZERO, ZERO, ZERO) == 0
    assert private_utility(econ, 2 * ONES, ZERO, 2 * ONES, ZERO) == pytest.approx(192)
    rev_only = AgentEconParams(gamma=0.3, delta=0.1, theta=0.0)
    assert private_utility(rev_only, ONES, 2 * ONES, ONES, 2 * ONES) == pytest.approx(96 * (0.3 + 0.2))
    with pytest.raises(ValueError):
        private_utility(econ, ONES, ONES, ONES, ONES, -ONES)


def test_private_utility_penalty_is_a_cost():
    econ = AgentEconParams(gamma=0.0, delta=0.0, p_P=10, p_H=10)
    assert private_utility(econ, ONES, ZERO, ZERO, ZERO) == pytest.approx(-960)
    gas = AgentEconParams(gamma=0.0, delta=0.0, theta=0.5)
    assert private_utility(gas, ZERO, ZERO, ZERO, ZERO, ONES) == pytest.approx(-48)


def test_market_prices_lower_the_incentive():
    prices = market_prices()
    econ = AgentEconParams(market_prices=prices)
    np.testing.assert_allclose(econ.electric_coefficient(), 0.30 - prices)
    assert np.all(econ.electric_coefficient() < 0.30)


def test_penalty_dominance():
    assert penalty_dominance_check(AgentEconParams(p_P=PENALTY_HIGH, p_H=PENALTY_HIGH), 0.2)
    assert penalty_dominance_check(AgentEconParams(p_P=PENALTY_HIGH, p_H=PENALTY_HIGH), 1.1)
    assert not penalty_dominance_check(AgentEconParams(p_P=0, p_H=0), 1.1)
    # low preset dominates only for units above (0.3 + 0.1) / 0.5 = 0.8 kW
    low = AgentEconParams(p_P=PENALTY_LOW, p_H=PENALTY_LOW)
    assert not penalty_dominance_check(low, 0.2)
    assert penalty_dominance_check(low, 1.1)


def test_private_optimal_offset_quadratic():
    assert private_optimal_offset(0.3, 10, 2) == pytest.approx(0.015)
    assert private_optimal_offset(0.3, 0.5, 2) == pytest.approx(0.3)
    assert private_optimal_offset(0.0, 0.5, 2) == 0
    assert private_optimal_offset(0.3, 0.0, 2) == np.inf
    assert private_optimal_offset(0.3, 1.0, 1) == 0
    # grid oracle
    x = np.linspace(-1, 1, 200_001)
    u = 0.3 * x - 0.5 * np.abs(x - 0.2) ** 3
    assert 0.2 + private_optimal_offset(0.3, 0.5, 3) == pytest.approx(x[np.argmax(u)], abs=1e-4)


@given(schedules(-5, 5), schedules(-5, 5), schedules(-5, 5), st.randoms())
def test_total_utility_depends_only_on_cluster(t, a, b, rnd):
    targets = target_schedules(t, t)
    split = rnd.random()
    one = {Carrier.P: a + b, Carrier.H: a}
    other = {Carrier.P: split * (a + b) + (1 - split) * (a + b), Carrier.H: a}
    assert total_utility(targets, one) == pytest.approx(total_utility(targets, other), abs=1e-6)


quarter_kw = hnp.arrays(np.int64, N_SLOTS, elements=st.integers(-40, 40)).map(lambda a: a / 4.0)


@given(quarter_kw, quarter_kw, st.integers(0, N_SLOTS - 1), st.sampled_from([0.0, 0.25, 0.5, 0.75]))
def test_carrier_utility_improves_when_a_slot_improves(t, c, i, shrink):
    # quarter-kW grid keeps the sums exact, so "strictly" is meaningful
    if t[i] == c[i]:
        return
    better = c.copy()
    better[i] = t[i] + shrink * (c[i] - t[i])
    assert carrier_utility(t, better) > carrier_utility(t, c)


@given(quarter_kw, quarter_kw, quarter_kw, quarter_kw)
def test_penalty_zero_iff_schedule_equals_delta(p, h, dp, dh):
    # squared gaps below ~1e-154 underflow to zero, so stay on an exact grid
    econ = AgentEconParams(gamma=0.0, delta=0.0, theta=0.0, p_P=2.0, p_H=3.0)
    assert private_utility(econ, dp, dh, dp, dh) == 0
    if not (np.array_equal(p, dp) and np.array_equal(h, dh)):
        assert private_utility(econ, p, h, dp, dh) < 0
