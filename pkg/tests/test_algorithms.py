import math

import numpy as np
import pytest

from cmdp_lab.algorithms import (
    REGRET_SCHEDULE,
    EXPERIMENT_SCHEDULE,
    NAIVE,
    NO_ADJUSTMENT,
    NO_REGULARIZATION,
    NO_UPAC_BONUS,
    UOPT,
    AlgoVariant,
    PrimalDualLearner,
    Schedule,
    combined_q,
    dual_cap,
    eval_policy_optimistic,
    lagrange_step,
    mirror_step_log,
    policy_mirror_step,
    run_naive_primal_dual,
    run_uopt_rpgpd,
)
from cmdp_lab.core import eval_policy_exact, uniform_policy
from cmdp_lab.env import Trajectory, generate_random_cmdp
from cmdp_lab.estimator import EmpiricalModel, upac_bonus
from cmdp_lab.oracle import slater_gap, solve_cmdp_lp

from conftest import random_cmdp, random_policy


def test_schedules():
    s = EXPERIMENT_SCHEDULE
    assert s.eta(1) == 4.0**-0.53 and s.tau(1) == 4.0**-0.4
    assert s.eta(10) < s.eta(1)
    assert s.satisfies_theory() and REGRET_SCHEDULE.satisfies_theory()
    assert not Schedule(0.4, 0.53).satisfies_theory()
    with pytest.raises(ValueError):
        Schedule(delta=0)


def test_variant_rates():
    s = EXPERIMENT_SCHEDULE
    assert AlgoVariant(UOPT).rates(5, s) == (s.eta(5), s.tau(5), s.eta(5))
    assert AlgoVariant(NO_UPAC_BONUS).rates(5, s) == (s.eta(5), s.tau(5), s.eta(5))
    assert AlgoVariant(NO_REGULARIZATION).rates(5, s) == (s.eta(5), 0.0, s.eta(5))
    assert AlgoVariant(NO_ADJUSTMENT).rates(5, s) == (0.1, 0.1, 0.1)
    naive = AlgoVariant.naive(100, 10, 3)
    assert naive.rates(5, s) == (math.sqrt(2 * math.log(3) / (100 * 100)), 0.0, 1 / (10 * 10))
    assert naive.uses_naive_bonus() and AlgoVariant(NO_UPAC_BONUS).uses_naive_bonus()
    assert not AlgoVariant(UOPT).uses_naive_bonus()
    with pytest.raises(ValueError):
        AlgoVariant("Other")


def test_eval_policy_hand_unrolled():
    H, X, A = 2, 2, 2
    model = EmpiricalModel(H, X, A)
    model.update(Trajectory(np.array([0, 1, 0]), np.array([1, 0])))
    r = np.array([[[0.2, 0.4], [0.1, 0.3]], [[0.5, 0.0], [0.6, 0.9]]])
    beta = np.full((H, X, A), 0.01)
    pi = np.array([[[0.5, 0.5], [0.25, 0.75]], [[0.8, 0.2], [0.5, 0.5]]])
    tau = 0.1
    coef = 1 + tau * math.log(2)
    # h = 1: no continuation, clip at coef
    q1 = np.minimum(r[1] + coef * H * 0.01, coef)
    v1 = (pi[1] * (q1 - tau * np.log(pi[1]))).sum(axis=1)
    # h = 0: only (0, 1) was visited and moved to state 1
    cont = np.zeros((X, A))
    cont[0, 1] = v1[1]
    q0 = np.minimum(r[0] + coef * H * 0.01 + cont, 2 * coef)
    v0 = (pi[0] * (q0 - tau * np.log(pi[0]))).sum(axis=1)
    out = eval_policy_optimistic(r, beta, model, pi, tau)
    np.testing.assert_allclose(out.Q[1], q1, atol=1e-15)
    np.testing.assert_allclose(out.Q[0], q0, atol=1e-15)
    np.testing.assert_allclose(out.V[0], v0, atol=1e-15)
    assert np.all(out.V[2] == 0)


def test_eval_policy_clips_large_bonus(rng):
    cmdp = random_cmdp(rng, 3, 2, 4)
    beta = np.full((4, 3, 2), 100.0)
    out = eval_policy_optimistic(cmdp.rewards[0], beta, cmdp.kernel, uniform_policy(4, 3, 2), 0.0)
    np.testing.assert_allclose(out.Q, np.broadcast_to((4 - np.arange(4))[:, None, None], (4, 3, 2)))


def test_eval_policy_without_bonus_is_exact(rng):
    cmdp = random_cmdp(rng, 4, 3, 3)
    pi = random_policy(rng, 3, 4, 3, floor=0.05)
    out = eval_policy_optimistic(cmdp.rewards[0], np.zeros((3, 4, 3)), cmdp.kernel, pi, 0.2)
    np.testing.assert_allclose(out.V, eval_policy_exact(cmdp, 0, pi, 0.2).V, atol=1e-12)


def test_eval_policy_shape_checks(rng):
    cmdp = random_cmdp(rng, 3, 2, 2)
    with pytest.raises(ValueError):
        eval_policy_optimistic(cmdp.rewards[0], np.zeros((2, 3, 3)), cmdp.kernel,
                               uniform_policy(2, 3, 2), 0.0)


def test_unvisited_cells_are_pessimistic_only_without_bonus():
    # an empty model has p_hat = 0; with the full bonus the clip keeps it optimistic
    model = EmpiricalModel(3, 2, 2)
    beta = upac_bonus(model, 0.1, 2, 2, 3)
    out = eval_policy_optimistic(np.zeros((3, 2, 2)), beta, model, uniform_policy(3, 2, 2), 0.0)
    np.testing.assert_allclose(out.V[0], 3.0)


def test_mirror_step_two_actions_softmax():
    new = policy_mirror_step(uniform_policy(1, 1, 2), np.array([[[1.0, 0.0]]]), 1.0, 0.0)
    assert new[0, 0, 0] == pytest.approx(math.e / (math.e + 1), abs=1e-15)


def test_mirror_step_shift_invariance(rng):
    log_pi = np.log(random_policy(rng, 2, 3, 4, floor=0.1))
    q = rng.random((2, 3, 4))
    shift = rng.normal(size=(2, 3, 1)) * 5
    a = mirror_step_log(log_pi, q, 0.3, 0.5)
    b = mirror_step_log(log_pi, q + shift, 0.3, 0.5)
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_mirror_step_identity_at_constant_q(rng):
    pi = random_policy(rng, 2, 3, 4, floor=0.1)
    out = policy_mirror_step(pi, np.full((2, 3, 4), 0.7), 0.5, 0.0)
    np.testing.assert_allclose(out, pi, atol=1e-15)


def test_mirror_step_regularized_fixed_point():
    q = np.array([[[1.0, 0.2, -0.5]]])
    tau = 0.5
    target = np.exp(q / tau) / np.exp(q / tau).sum()
    np.testing.assert_allclose(policy_mirror_step(target, q, 0.7, tau), target, atol=1e-14)


def test_mirror_step_guards():
    with pytest.raises(ValueError):
        mirror_step_log(np.zeros((1, 1, 2)), np.zeros((1, 1, 2)), 2.0, 0.5)
    with pytest.raises(ValueError):
        mirror_step_log(np.zeros((1, 1, 2)), np.array([[[np.nan, 0.0]]]), 0.1, 0.1)
    with pytest.raises(ValueError):
        policy_mirror_step(np.array([[[1.0, 0.0]]]), np.zeros((1, 1, 2)), 0.1, 0.0)


def test_combined_q():
    q0 = np.ones((1, 1, 2))
    q1 = np.array([[[1.0, 2.0]]])
    np.testing.assert_array_equal(combined_q(q0, [q1], [0.5]), [[[1.5, 2.0]]])
    with pytest.raises(ValueError):
        combined_q(q0, [q1, q1], [0.5])


def test_lagrange_step_clip_bounds():
    cap = dual_cap(0.2, 0.5, 3, 10)
    assert cap == 10 * (1 + 0.2 * math.log(3)) / 0.5
    assert lagrange_step([0.0], [5.0], [1.0], 0.5, 0.2, 0.5, 3, 10)[0] == 0.0
    assert lagrange_step([cap], [0.0], [10.0], 10.0, 0.2, 0.5, 3, 10)[0] == cap
    inner = lagrange_step([1.0], [0.5], [1.0], 0.5, 0.2, 0.5, 3, 10)[0]
    assert inner == pytest.approx(1.0 + 0.5 * (0.5 - 0.2))
    with pytest.raises(ValueError):
        lagrange_step([0.0], [0.0], [0.0], 0.1, 0.1, 0.0, 3, 10)


def test_learner_requires_slater_gap(rng):
    with pytest.raises(ValueError):
        PrimalDualLearner(random_cmdp(rng, 2, 2, 2))


def test_learner_step_records_played_policy():
    cmdp, gap = generate_random_cmdp(0, 5, 2, 3)
    learner = PrimalDualLearner(cmdp, AlgoVariant(UOPT), slater_gap=gap, seed=1)
    rec = learner.step()
    assert rec.k == 1 and learner.k == 1
    np.testing.assert_allclose(rec.policy.sum(axis=-1), 1.0)
    np.testing.assert_array_equal(rec.policy, learner.policy)
    assert learner.model.n.sum() == cmdp.H
    assert rec.optimistic_values.shape == (2,)
    assert 0 <= rec.lam[0] <= dual_cap(rec.tau, gap, cmdp.A, cmdp.H)


def test_checkpoint_restore_continues_identically():
    cmdp, gap = generate_random_cmdp(3, 5, 2, 3)
    a = PrimalDualLearner(cmdp, AlgoVariant(UOPT), slater_gap=gap, seed=2)
    for _ in range(20):
        a.step()
    state = a.checkpoint()
    b = PrimalDualLearner(cmdp, AlgoVariant(UOPT), slater_gap=gap, seed=2).restore(state)
    for _ in range(10):
        ra, rb = a.step(), b.step()
        assert np.array_equal(ra.log_policy, rb.log_policy)
        assert np.array_equal(ra.trajectory.states, rb.trajectory.states)
    with pytest.raises(ValueError):
        PrimalDualLearner(cmdp, AlgoVariant(NO_ADJUSTMENT), slater_gap=gap).restore(state)


def test_known_model_converges_to_constrained_optimum():
    cmdp, gap = generate_random_cmdp(5, 4, 2, 3)
    v_star = solve_cmdp_lp(cmdp)[0]
    _, metrics = run_uopt_rpgpd(cmdp, slater_gap=gap, episodes=3000, seed=0, known_model=True,
                                v_star=v_star)
    tail = metrics.arrays()
    assert np.mean(tail["opt_gap"][-100:]) < 0.05
    assert np.mean(tail["violation"][-100:]) < 0.05


def test_naive_runner_runs_exactly_k_episodes():
    cmdp, gap = generate_random_cmdp(1, 4, 2, 3)
    seen = []
    learner, metrics = run_naive_primal_dual(cmdp, K=25, slater_gap=gap,
                                             metrics_sink=lambda rec, g: seen.append(rec.k))
    assert seen == list(range(1, 26)) and len(metrics) == 25
    assert learner.variant.tag == NAIVE
    assert np.all(learner.lam <= cmdp.H / gap)


def test_slater_gap_of_generated_instance_is_positive():
    cmdp, gap = generate_random_cmdp(4, 6, 3, 4)
    assert gap == pytest.approx(slater_gap(cmdp)) and gap > 0
