"""Batch verification suites over randomized MDP instances.

Two families: shaping invariance (advantage preservation plus the Q-shift
identity) on rewards shaped through the true kernel, and discriminator
gradient alignment at the structurally matched saddle point. Both are
driven by a single seed and report the worst case seen, so the CLI and
the acceptance tests share one code path.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .adversarial import gradient_alignment_gap
from .mdp import TabularMDP
from .seeding import as_generator
from .shaping import check_policy_invariance, q_shift_identity_gap, shape_reward

GAMMA_CHOICES = (0.5, 0.9, 0.99)


def random_mdp(rng, max_states: int = 10, max_actions: int = 4,
               reward_scale: float = 1.0) -> TabularMDP:
    rng = as_generator(rng)
    n_states = int(rng.integers(2, max_states + 1))
    n_actions = int(rng.integers(2, max_actions + 1))
    kernel = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    reward = rng.uniform(-reward_scale, reward_scale, size=(n_states, n_actions))
    init_dist = rng.dirichlet(np.ones(n_states))
    gamma = float(rng.choice(GAMMA_CHOICES))
    return TabularMDP(kernel, reward, gamma, init_dist)


@dataclass
class InvarianceSuiteReport:
    n_cases: int
    max_adv_gap: float
    max_q_shift_gap: float
    tol: float
    passed: bool
    elapsed_seconds: float

    def summary_line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return (f"invariance suite: {verdict} over {self.n_cases} cases "
                f"(max advantage gap {self.max_adv_gap:.3e}, "
                f"max Q-shift gap {self.max_q_shift_gap:.3e}, tol {self.tol:.1e}, "
                f"{self.elapsed_seconds:.1f}s)")


@dataclass
class AlignmentSuiteReport:
    n_cases: int
    max_gap: float
    tol: float
    passed: bool
    elapsed_seconds: float
    # gap when the structural form of f is replaced by a mismatched one;
    # expected to be far above tol, demonstrating the hypothesis matters
    override_gap: float

    def summary_line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return (f"alignment suite: {verdict} over {self.n_cases} cases "
                f"(max gap {self.max_gap:.3e}, tol {self.tol:.1e}, "
                f"mismatched-f gap {self.override_gap:.3e}, "
                f"{self.elapsed_seconds:.1f}s)")


def run_invariance_suite(n_cases: int = 200, tol: float = 1e-8, seed: int = 0,
                         dp_tol: float = 1e-10) -> InvarianceSuiteReport:
    """Shape through the true kernel and confirm advantages never move.

    Half the cases use unit-scale potentials, half use potentials up to a
    hundred times the reward scale to stress cancellation.
    """
    rng = as_generator(seed)
    start = time.perf_counter()
    max_adv = 0.0
    max_shift = 0.0
    for case in range(n_cases):
        mdp = random_mdp(rng)
        phi_scale = 1.0 if case % 2 == 0 else 100.0
        phi = rng.uniform(-phi_scale, phi_scale, size=mdp.n_states)
        shaped = shape_reward(mdp, phi, mdp.kernel)
        report = check_policy_invariance(mdp, mdp.reward, shaped.table,
                                         tol=tol, dp_tol=dp_tol)
        max_adv = max(max_adv, report.adv_gap)
        max_shift = max(max_shift, q_shift_identity_gap(mdp, phi, dp_tol=dp_tol))
    elapsed = time.perf_counter() - start
    return InvarianceSuiteReport(n_cases, max_adv, max_shift, tol,
                                 passed=(max_adv <= tol and max_shift <= tol),
                                 elapsed_seconds=elapsed)


def run_alignment_suite(n_cases: int = 50, tol: float = 1e-8, seed: int = 0,
                        dp_tol: float = 1e-12) -> AlignmentSuiteReport:
    """Gradient match at the matched saddle point, case by random case."""
    rng = as_generator(seed)
    start = time.perf_counter()
    max_gap = 0.0
    mdp = None
    theta = None
    for _ in range(n_cases):
        mdp = random_mdp(rng)
        theta = rng.uniform(-1.0, 1.0, size=(mdp.n_states, mdp.n_actions))
        max_gap = max(max_gap, gradient_alignment_gap(mdp, theta, dp_tol=dp_tol))
    # necessity probe on the last instance: feed the raw reward table as f
    # instead of the structurally matched form and watch the gap blow up
    override_gap = gradient_alignment_gap(mdp, theta, dp_tol=dp_tol,
                                          f_override=theta)
    elapsed = time.perf_counter() - start
    return AlignmentSuiteReport(n_cases, max_gap, tol, passed=max_gap <= tol,
                                elapsed_seconds=elapsed, override_gap=override_gap)
