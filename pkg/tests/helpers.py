"""Shared test utilities: finite-difference oracle and random instances."""

import numpy as np

from meairl import TabularMDP, TabularPolicy


def finite_difference_grad(fn, params, h=1e-5):
    """Central-difference gradient of a scalar function of a flat vector."""
    params = np.asarray(params, dtype=np.float64)
    grad = np.zeros_like(params)
    for i in range(params.size):
        bumped = params.copy()
        bumped[i] += h
        hi = fn(bumped)
        bumped[i] -= 2 * h
        lo = fn(bumped)
        grad[i] = (hi - lo) / (2 * h)
    return grad


def max_rel_err(analytic, numeric, floor=1e-6):
    analytic = np.asarray(analytic, dtype=np.float64).ravel()
    numeric = np.asarray(numeric, dtype=np.float64).ravel()
    scale = np.maximum(floor, np.maximum(np.abs(analytic), np.abs(numeric)))
    return float(np.max(np.abs(analytic - numeric) / scale))


def random_mdp(rng, n_states=None, n_actions=None, gamma=None, reward_scale=1.0):
    if n_states is None:
        n_states = int(rng.integers(2, 8))
    if n_actions is None:
        n_actions = int(rng.integers(2, 4))
    if gamma is None:
        gamma = float(rng.choice([0.5, 0.9, 0.99]))
    kernel = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    reward = rng.uniform(-reward_scale, reward_scale, size=(n_states, n_actions))
    init = rng.dirichlet(np.ones(n_states))
    return TabularMDP(kernel, reward, gamma, init)


def random_policy(rng, n_states, n_actions):
    return TabularPolicy(rng.dirichlet(np.ones(n_actions), size=n_states))
