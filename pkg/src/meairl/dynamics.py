"""Learned transition models: smoothed tabular counts and a Gaussian net.

Both expose sample_next(state, action, rng) so synthetic rollouts can
treat them interchangeably. The Gaussian model predicts the state
*delta*; its mean successor is state + mean_net(state, action).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mdp import TabularPolicy, _row_sample, _row_sample_batch
from .neural import Mlp
from .seeding import as_generator

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0
LOG_2PI = float(np.log(2.0 * np.pi))


class TabularDynamicsEstimate:
    """Transition counts with additive (Dirichlet-style) smoothing.

    kernel[s, a, s'] = (N[s, a, s'] + alpha) / sum_s'' (N[s, a, s''] + alpha).
    With alpha = 0 an unvisited (s, a) row falls back to uniform.
    """

    def __init__(self, n_states: int, n_actions: int, alpha: float = 0.1):
        if alpha < 0.0:
            raise ValueError(f"alpha must be >= 0, got {alpha}")
        self.n_states = int(n_states)
        self.n_actions = int(n_actions)
        self.alpha = float(alpha)
        self.counts = np.zeros((n_states, n_actions, n_states), dtype=np.int64)
        self._kernel = np.full((n_states, n_actions, n_states), 1.0 / n_states)
        self._cum = np.cumsum(self._kernel, axis=-1)

    def _refresh_row(self, s: int, a: int) -> None:
        row = self.counts[s, a] + self.alpha
        total = row.sum()
        if total == 0.0:
            row = np.full(self.n_states, 1.0 / self.n_states)
        else:
            row = row / total
        self._kernel[s, a] = row
        self._cum[s, a] = np.cumsum(row)

    def add(self, s: int, a: int, s_next: int) -> None:
        self.counts[s, a, s_next] += 1
        self._refresh_row(s, a)

    def add_batch(self, states, actions, next_states) -> None:
        np.add.at(self.counts, (states, actions, next_states), 1)
        for s, a in set(zip(np.asarray(states).tolist(), np.asarray(actions).tolist())):
            self._refresh_row(s, a)

    @property
    def kernel(self) -> np.ndarray:
        return self._kernel

    def sample_next(self, s: int, a: int, rng) -> int:
        return _row_sample(self._cum[s, a], rng)

    def sample_next_batch(self, states, actions, rng) -> np.ndarray:
        return _row_sample_batch(self._cum[states, actions], rng)

    def nll(self, states, actions, next_states) -> float:
        """Mean negative log-likelihood of transitions under the current kernel."""
        probs = self._kernel[states, actions, next_states]
        return float(-np.mean(np.log(np.maximum(probs, 1e-300))))


def fit_tabular(transitions, n_states: int, n_actions: int,
                alpha: float = 0.1) -> TabularDynamicsEstimate:
    """Fit from an iterable (or column triple) of (s, a, s_next) transitions."""
    est = TabularDynamicsEstimate(n_states, n_actions, alpha=alpha)
    if isinstance(transitions, tuple) and len(transitions) == 3:
        states, actions, next_states = (np.asarray(c, dtype=np.int64) for c in transitions)
    else:
        arr = np.asarray(list(transitions), dtype=np.int64)
        if arr.size == 0:
            return est
        states, actions, next_states = arr[:, 0], arr[:, 1], arr[:, 2]
    if states.size:
        est.add_batch(states, actions, next_states)
    return est


def tv_distance(true_kernel: np.ndarray, est_kernel: np.ndarray, weights=None):
    """Per-row total variation between two kernels.

    Returns (max over (s, a), weighted average). `weights` is an (S, A)
    distribution over state-action pairs; None means uniform.
    """
    true_kernel = np.asarray(true_kernel, dtype=np.float64)
    est_kernel = np.asarray(est_kernel, dtype=np.float64)
    if true_kernel.shape != est_kernel.shape:
        raise ValueError(f"kernel shapes differ: {true_kernel.shape} vs {est_kernel.shape}")
    per_row = 0.5 * np.abs(true_kernel - est_kernel).sum(axis=-1)
    if weights is None:
        weighted = float(per_row.mean())
    else:
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != per_row.shape:
            raise ValueError(f"weights shape {weights.shape} != {per_row.shape}")
        weighted = float((weights * per_row).sum() / weights.sum())
    return float(per_row.max()), weighted


class GaussianDynamicsModel:
    """Diagonal-Gaussian successor model over continuous states.

    Two relu nets map (state, action) to the per-dimension delta mean and
    to the raw log-std, the latter clamped into [LOG_STD_MIN, LOG_STD_MAX].
    Samples are clipped into [state_low, state_high] when bounds are set.
    """

    def __init__(self, state_dim: int, action_dim: int, hidden=(128, 128),
                 state_low=None, state_high=None, rng=None):
        rng = as_generator(rng)
        self.state_dim = int(state_dim)
        self.action_dim = int(action_dim)
        in_dim = self.state_dim + self.action_dim
        self.mean_net = Mlp([in_dim, *hidden, self.state_dim], rng=rng)
        self.logstd_net = Mlp([in_dim, *hidden, self.state_dim], rng=rng)
        self.state_low = None if state_low is None else np.asarray(state_low, dtype=np.float64)
        self.state_high = None if state_high is None else np.asarray(state_high, dtype=np.float64)

    @property
    def n_params(self) -> int:
        return self.mean_net.n_params + self.logstd_net.n_params

    @property
    def params(self) -> np.ndarray:
        return np.concatenate([self.mean_net.params, self.logstd_net.params])

    @params.setter
    def params(self, value):
        value = np.asarray(value, dtype=np.float64)
        if value.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} params, got shape {value.shape}")
        split = self.mean_net.n_params
        self.mean_net.params = value[:split]
        self.logstd_net.params = value[split:]

    def _stats(self, states, actions):
        states = np.atleast_2d(np.asarray(states, dtype=np.float64))
        actions = np.atleast_2d(np.asarray(actions, dtype=np.float64))
        x = np.concatenate([states, actions], axis=1)
        mean_delta = self.mean_net.forward(x)
        raw = self.logstd_net.forward(x)
        log_std = np.clip(raw, LOG_STD_MIN, LOG_STD_MAX)
        return x, states, mean_delta, raw, log_std

    def predict(self, states, actions):
        """Mean successor and per-dimension std, batched."""
        _, states2d, mean_delta, _, log_std = self._stats(states, actions)
        return states2d + mean_delta, np.exp(log_std)

    def sample_next(self, state, action, rng) -> np.ndarray:
        single = np.asarray(state).ndim == 1
        mean, std = self.predict(state, action)
        nxt = mean + std * rng.standard_normal(mean.shape)
        if self.state_low is not None:
            nxt = np.clip(nxt, self.state_low, self.state_high)
        return nxt[0] if single else nxt

    def loss_and_grads(self, states, actions, next_states):
        """Mean Gaussian NLL of the observed deltas, with exact gradients.

        Per element: 0.5 z^2 + log_std + 0.5 log(2 pi), z = (delta - mu) / sigma.
        The log-std clamp passes zero gradient where it saturates.
        """
        x, states2d, mean_delta, raw, log_std = self._stats(states, actions)
        next_states = np.atleast_2d(np.asarray(next_states, dtype=np.float64))
        target = next_states - states2d
        sigma = np.exp(log_std)
        z = (target - mean_delta) / sigma
        batch = float(states2d.shape[0])
        loss = float(np.mean(np.sum(0.5 * z ** 2 + log_std + 0.5 * LOG_2PI, axis=1)))
        d_mean = (-z / sigma) / batch
        active = (raw > LOG_STD_MIN) & (raw < LOG_STD_MAX)
        d_raw = np.where(active, (1.0 - z ** 2) / batch, 0.0)
        g_mean, _ = self.mean_net.backward(x, d_mean)
        g_logstd, _ = self.logstd_net.backward(x, d_raw)
        return loss, np.concatenate([g_mean, g_logstd])


def gaussian_nll_loss(model: GaussianDynamicsModel, states, actions, next_states):
    """(loss, flat gradient) of the model's mean NLL on a batch."""
    return model.loss_and_grads(states, actions, next_states)


def rollout_synthetic(model, policy, start_states, horizon: int, seed):
    """Roll the model forward `horizon` steps from each start state.

    Returns transition columns (states, actions, next_states). Tabular
    models take a TabularPolicy; continuous models take a callable
    act(states, rng) -> actions operating on batches. Deterministic given
    the seed.
    """
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    rng = as_generator(seed)
    if isinstance(model, TabularDynamicsEstimate):
        states = np.asarray(start_states, dtype=np.int64)
        if states.size == 0:
            raise ValueError("start_states must be nonempty")
        out_s, out_a, out_n = [], [], []
        for _ in range(horizon):
            if isinstance(policy, TabularPolicy):
                actions = policy.sample_batch(states, rng)
            else:
                actions = np.asarray(policy(states, rng), dtype=np.int64)
            nxt = model.sample_next_batch(states, actions, rng)
            out_s.append(states)
            out_a.append(actions)
            out_n.append(nxt)
            states = nxt
        return np.concatenate(out_s), np.concatenate(out_a), np.concatenate(out_n)
    states = np.atleast_2d(np.asarray(start_states, dtype=np.float64))
    if states.shape[0] == 0:
        raise ValueError("start_states must be nonempty")
    out_s, out_a, out_n = [], [], []
    for _ in range(horizon):
        actions = np.atleast_2d(np.asarray(policy(states, rng), dtype=np.float64))
        nxt = model.sample_next(states, actions, rng)
        out_s.append(states)
        out_a.append(actions)
        out_n.append(nxt)
        states = nxt
    return np.concatenate(out_s), np.concatenate(out_a), np.concatenate(out_n)
