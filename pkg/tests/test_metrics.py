import numpy as np
import pytest

from cmdp_lab.core import uniform_policy
from cmdp_lab.metrics import RunMetrics, accumulate, compute_gaps
from cmdp_lab.oracle import solve_cmdp_lp

from conftest import single_state


def test_gaps_on_two_armed_instance():
    cmdp = single_state([1.0, 0.0], thresholds=[0.3], constraint_rewards=[[0.0, 1.0]])
    v_star, _, pi_star = solve_cmdp_lp(cmdp)
    assert compute_gaps(cmdp, v_star, pi_star) == pytest.approx((0.0, 0.0), abs=1e-12)
    greedy = np.array([[[1.0, 0.0]]])
    assert compute_gaps(cmdp, v_star, greedy) == pytest.approx((0.0, 0.3))
    assert compute_gaps(cmdp, v_star, uniform_policy(1, 1, 2)) == pytest.approx((0.2, 0.0))


def test_regret_and_mistakes():
    m = RunMetrics(eps_grid=(0.1, 0.5))
    for k, g in enumerate([(0.6, 0.0), (0.2, 0.3), (0.05, 0.0)], start=1):
        accumulate(m, k, g)
    assert m.regret == pytest.approx((0.85, 0.3))
    assert m.mistakes_opt == {0.1: 2, 0.5: 1}
    assert m.mistakes_vio == {0.1: 1, 0.5: 0}
    np.testing.assert_allclose(m.arrays()["regret_opt"], [0.6, 0.8, 0.85])


def test_thinned_records_use_trapezoid_weights():
    m = RunMetrics()
    m.accumulate(1, (1.0, 0.0))
    m.accumulate(5, (0.0, 0.0))
    assert m.regret[0] == pytest.approx(1.0 + 0.5 * 4)


def test_episodes_must_increase():
    m = RunMetrics().accumulate(3, (0, 0))
    with pytest.raises(ValueError):
        m.accumulate(3, (0, 0))


def test_state_round_trip_continues_identically():
    a = RunMetrics()
    for k in range(1, 6):
        a.accumulate(k, (1 / k, 0.1 * k), lam=[k], eta=0.1, tau=0.2)
    b = RunMetrics.from_state(a.state())
    for k in range(6, 9):
        a.accumulate(k, (0.3, 0.2))
        b.accumulate(k, (0.3, 0.2))
    assert a.regret == b.regret
    assert a.mistakes_opt == b.mistakes_opt and a.mistakes_vio == b.mistakes_vio
    assert RunMetrics().regret == (0.0, 0.0)
