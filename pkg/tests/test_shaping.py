"""Reward shaping: hand values, invariance, the Q-shift identity."""

import numpy as np
import pytest

from helpers import random_mdp
from meairl import (TabularMDP, check_policy_invariance, q_shift_identity_gap,
                    shape_reward, soft_optimal_policy, soft_value_iteration)


class TestShapeReward:
    def test_zero_potential_is_identity(self):
        rng = np.random.default_rng(0)
        mdp = random_mdp(rng)
        shaped = shape_reward(mdp, np.zeros(mdp.n_states), mdp.kernel)
        assert np.array_equal(shaped.table, mdp.reward)

    def test_constant_potential_uniform_shift(self):
        rng = np.random.default_rng(1)
        mdp = random_mdp(rng, gamma=0.9)
        c = 3.7
        shaped = shape_reward(mdp, np.full(mdp.n_states, c), mdp.kernel)
        assert np.max(np.abs(shaped.table - (mdp.reward - (1 - 0.9) * c))) < 1e-12

    def test_hand_dot_product(self):
        kernel = np.zeros((3, 1, 3))
        kernel[0, 0] = [0.2, 0.5, 0.3]
        kernel[1, 0] = [1.0, 0.0, 0.0]
        kernel[2, 0] = [0.0, 0.0, 1.0]
        mdp = TabularMDP(kernel, np.zeros((3, 1)), 0.9, [1.0, 0.0, 0.0])
        shaped = shape_reward(mdp, np.array([1.0, 2.0, 3.0]), kernel)
        assert abs(shaped.table[0, 0] - 0.89) < 1e-12

    def test_magnitude_bound(self):
        rng = np.random.default_rng(2)
        mdp = random_mdp(rng)
        phi = rng.uniform(-100, 100, size=mdp.n_states)
        shaped = shape_reward(mdp, phi, mdp.kernel)
        cap = np.abs(mdp.reward).max() + (1 + mdp.discount) * np.abs(phi).max()
        assert np.abs(shaped.table).max() <= cap + 1e-9

    def test_non_stochastic_dynamics_rejected(self):
        rng = np.random.default_rng(3)
        mdp = random_mdp(rng)
        bad = mdp.kernel * 1.1
        with pytest.raises(ValueError):
            shape_reward(mdp, np.zeros(mdp.n_states), bad)

    def test_non_finite_phi_rejected(self):
        rng = np.random.default_rng(4)
        mdp = random_mdp(rng)
        phi = np.zeros(mdp.n_states)
        phi[0] = np.inf
        with pytest.raises(ValueError):
            shape_reward(mdp, phi, mdp.kernel)

    def test_provenance_recorded(self):
        rng = np.random.default_rng(5)
        mdp = random_mdp(rng)
        shaped = shape_reward(mdp, np.zeros(mdp.n_states), mdp.kernel, label="exact")
        assert shaped.provenance["dynamics"] == "exact"


class TestPolicyInvariance:
    def test_identity_passes(self):
        rng = np.random.default_rng(6)
        mdp = random_mdp(rng)
        report = check_policy_invariance(mdp, mdp.reward, mdp.reward)
        assert report.adv_gap == 0.0 and report.passed

    def test_true_kernel_shaping_invariant(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            mdp = random_mdp(rng, n_states=5)
            phi = rng.uniform(-1, 1, size=5)
            shaped = shape_reward(mdp, phi, mdp.kernel)
            report = check_policy_invariance(mdp, mdp.reward, shaped.table)
            assert report.adv_gap <= 1e-8 and report.passed

    def test_policies_agree_entrywise(self):
        rng = np.random.default_rng(8)
        for _ in range(5):
            mdp = random_mdp(rng)
            phi = rng.uniform(-1, 1, size=mdp.n_states)
            shaped = shape_reward(mdp, phi, mdp.kernel)
            p_base = soft_optimal_policy(soft_value_iteration(mdp))
            p_shaped = soft_optimal_policy(
                soft_value_iteration(mdp.with_reward(shaped.table)))
            assert np.max(np.abs(p_base.probs - p_shaped.probs)) <= 1e-8

    def test_generic_perturbation_fails(self):
        rng = np.random.default_rng(9)
        mdp = random_mdp(rng, n_states=5, gamma=0.9)
        noisy = mdp.reward.copy()
        noisy[2, 0] += 0.5
        report = check_policy_invariance(mdp, mdp.reward, noisy, tol=1e-6)
        assert not report.passed
        assert report.adv_gap > 1e-3

    def test_report_exposes_q_and_v_gaps(self):
        rng = np.random.default_rng(10)
        mdp = random_mdp(rng)
        phi = rng.uniform(-1, 1, size=mdp.n_states)
        shaped = shape_reward(mdp, phi, mdp.kernel)
        report = check_policy_invariance(mdp, mdp.reward, shaped.table)
        # Q and V move by roughly phi even though advantages do not
        assert report.q_gap >= report.adv_gap
        assert report.v_gap >= 0.0


class TestQShiftIdentity:
    def test_zero_potential_zero_gap(self):
        rng = np.random.default_rng(11)
        mdp = random_mdp(rng)
        assert q_shift_identity_gap(mdp, np.zeros(mdp.n_states)) <= 1e-10

    def test_random_potentials_small_gap(self):
        rng = np.random.default_rng(12)
        for _ in range(10):
            mdp = random_mdp(rng, n_states=4)
            phi = rng.uniform(-1, 1, size=4)
            assert q_shift_identity_gap(mdp, phi) <= 1e-8

    def test_wrong_kernel_breaks_identity(self):
        rng = np.random.default_rng(13)
        mdp = random_mdp(rng, n_states=5, gamma=0.9)
        alt = rng.dirichlet(np.ones(5), size=(5, mdp.n_actions))
        # blend until the rows differ by a solid margin
        wrong = 0.6 * mdp.kernel + 0.4 * alt
        phi = rng.uniform(-1, 1, size=5)
        shaped = shape_reward(mdp, phi, wrong)
        q_base = soft_value_iteration(mdp).q
        q_shaped = soft_value_iteration(mdp.with_reward(shaped.table)).q
        gap = np.abs(q_base - q_shaped - phi[:, None]).max()
        assert gap > 1e-4


class TestEstimatedKernelTrend:
    def test_advantage_gap_shrinks_with_kernel_error(self):
        rng = np.random.default_rng(14)
        mdp = random_mdp(rng, n_states=5, gamma=0.9)
        alt = rng.dirichlet(np.ones(5), size=(5, mdp.n_actions))
        phi = rng.uniform(-1, 1, size=5)
        gaps = []
        for lam in (0.3, 0.1, 0.03, 0.01):
            blend = (1 - lam) * mdp.kernel + lam * alt
            shaped = shape_reward(mdp, phi, blend)
            report = check_policy_invariance(mdp, mdp.reward, shaped.table)
            gaps.append(report.adv_gap)
        assert all(gaps[i + 1] < gaps[i] for i in range(len(gaps) - 1))
