"""Adversarial reward learning with a transition model inside the shaping term.

The discriminator scores a state-action pair against the current policy:

    D(s, a) = exp(f(s, a)) / (exp(f(s, a)) + pi(a|s))
    f(s, a) = R(s, a) + gamma * E_model[phi(s') | s, a] - phi(s)

so f is a shaped reward whose potential term is an expectation under the
learned model rather than a single sampled successor. `shaping="sample"`
switches to the classic single-sample form

    f(s, a, s') = R(s, a) + gamma * phi(s') - phi(s)

for A/B comparisons. Tabular mode keeps R and phi as plain tables;
continuous mode backs them with two relu nets and estimates the model
expectation with a fixed number of Monte Carlo successor draws, reused
pathwise so gradients flow to phi at the sampled points.

Training minimizes the usual cross-entropy

    L = -E_expert[log D] - E_policy[log(1 - D)]

and the policy-facing reward is log D - log(1 - D) = f - log pi.
"""

from __future__ import annotations

import numpy as np

from .mdp import TabularMDP, TabularPolicy, discounted_occupancy, load_demos
from .neural import Mlp
from .seeding import as_generator
from .soft_dp import soft_optimal_policy, soft_value_iteration

# D is clamped into [PROB_CLAMP, 1 - PROB_CLAMP] before any log.
PROB_CLAMP = 1e-6
# Extracted rewards handed to a policy optimizer are clipped to this magnitude.
REWARD_CLAMP = 50.0


def _sigmoid(u: np.ndarray) -> np.ndarray:
    out = np.empty_like(u, dtype=np.float64)
    pos = u >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-u[pos]))
    eu = np.exp(u[~pos])
    out[~pos] = eu / (1.0 + eu)
    return out


class Discriminator:
    """Reward/potential pair with a shaping rule; see the module docstring."""

    def __init__(self, mode, discount, dynamics, shaping, r_table=None, phi_table=None,
                 r_net=None, phi_net=None, n_model_samples=8):
        if mode not in ("tabular", "continuous"):
            raise ValueError(f"unknown mode {mode!r}")
        if shaping not in ("model", "sample"):
            raise ValueError(f"unknown shaping {shaping!r}")
        if not (0.0 < discount < 1.0):
            raise ValueError(f"discount must lie in (0, 1), got {discount}")
        if shaping == "model" and dynamics is None:
            raise ValueError("model shaping requires a dynamics model")
        self.mode = mode
        self.discount = float(discount)
        self.dynamics = dynamics
        self.shaping = shaping
        self.r_table = r_table
        self.phi_table = phi_table
        self.r_net = r_net
        self.phi_net = phi_net
        self.n_model_samples = int(n_model_samples)

    @classmethod
    def tabular(cls, n_states, n_actions, discount, dynamics=None,
                shaping="model") -> "Discriminator":
        return cls("tabular", discount, dynamics, shaping,
                   r_table=np.zeros((n_states, n_actions)),
                   phi_table=np.zeros(n_states))

    @classmethod
    def continuous(cls, state_dim, action_dim, discount, dynamics=None, shaping="model",
                   hidden=(100, 100), n_model_samples=8, rng=None) -> "Discriminator":
        rng = as_generator(rng)
        return cls("continuous", discount, dynamics, shaping,
                   r_net=Mlp([state_dim + action_dim, *hidden, 1], rng=rng),
                   phi_net=Mlp([state_dim, *hidden, 1], rng=rng),
                   n_model_samples=n_model_samples)

    @property
    def n_params(self) -> int:
        if self.mode == "tabular":
            return self.r_table.size + self.phi_table.size
        return self.r_net.n_params + self.phi_net.n_params

    @property
    def params(self) -> np.ndarray:
        if self.mode == "tabular":
            return np.concatenate([self.r_table.ravel(), self.phi_table])
        return np.concatenate([self.r_net.params, self.phi_net.params])

    @params.setter
    def params(self, value):
        value = np.asarray(value, dtype=np.float64)
        if value.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} params, got shape {value.shape}")
        if self.mode == "tabular":
            split = self.r_table.size
            self.r_table[...] = value[:split].reshape(self.r_table.shape)
            self.phi_table[...] = value[split:]
        else:
            split = self.r_net.n_params
            self.r_net.params = value[:split]
            self.phi_net.params = value[split:]

    def _dyn_kernel(self) -> np.ndarray:
        return getattr(self.dynamics, "kernel", self.dynamics)

    def _f_tabular(self, states, actions, next_states):
        states = np.asarray(states, dtype=np.int64)
        actions = np.asarray(actions, dtype=np.int64)
        if self.shaping == "model":
            rows = self._dyn_kernel()[states, actions]
            expected_phi = rows @ self.phi_table
        else:
            if next_states is None:
                raise ValueError("sample shaping needs observed next states")
            expected_phi = self.phi_table[np.asarray(next_states, dtype=np.int64)]
        return (self.r_table[states, actions]
                + self.discount * expected_phi
                - self.phi_table[states])

    def _f_continuous(self, states, actions, next_states, rng, n_samples=None):
        """Returns (f, cache); cache carries the arrays gradient assembly reuses."""
        states = np.atleast_2d(np.asarray(states, dtype=np.float64))
        actions = np.atleast_2d(np.asarray(actions, dtype=np.float64))
        x = np.concatenate([states, actions], axis=1)
        r = self.r_net.forward(x).ravel()
        phi_s = self.phi_net.forward(states).ravel()
        if self.shaping == "model":
            if rng is None:
                raise ValueError("model shaping needs an rng for successor draws")
            n = self.n_model_samples if n_samples is None else int(n_samples)
            draws = np.stack([self.dynamics.sample_next(states, actions, rng)
                              for _ in range(n)])  # (n, B, d)
            flat = draws.reshape(-1, states.shape[1])
            phi_next = self.phi_net.forward(flat).ravel().reshape(n, -1)
            expected_phi = phi_next.mean(axis=0)
            cache = {"x": x, "states": states, "draws_flat": flat, "n": n}
        else:
            if next_states is None:
                raise ValueError("sample shaping needs observed next states")
            next_states = np.atleast_2d(np.asarray(next_states, dtype=np.float64))
            expected_phi = self.phi_net.forward(next_states).ravel()
            cache = {"x": x, "states": states, "next_states": next_states}
        return r + self.discount * expected_phi - phi_s, cache

    def f_values(self, states, actions, next_states=None, rng=None, n_samples=None):
        """Batched f. next_states is only consulted under sample shaping."""
        if self.mode == "tabular":
            return self._f_tabular(states, actions, next_states)
        f, _ = self._f_continuous(states, actions, next_states, rng, n_samples)
        return f


def f_value(disc: Discriminator, state, action, next_state=None, rng=None,
            n_samples=None) -> float:
    """Single-point f."""
    if disc.mode == "tabular":
        out = disc.f_values(np.array([state]), np.array([action]),
                            None if next_state is None else np.array([next_state]))
    else:
        out = disc.f_values(np.atleast_2d(state), np.atleast_2d(action),
                            None if next_state is None else np.atleast_2d(next_state),
                            rng=rng, n_samples=n_samples)
    return float(out[0])


def _log_policy(policy, states, actions):
    if isinstance(policy, TabularPolicy):
        probs = policy.probs[np.asarray(states, dtype=np.int64),
                             np.asarray(actions, dtype=np.int64)]
        with np.errstate(divide="ignore"):
            return np.log(probs)
    if hasattr(policy, "log_prob"):
        return np.asarray(policy.log_prob(states, actions), dtype=np.float64)
    raise TypeError(f"policy {type(policy).__name__} exposes neither .probs nor .log_prob")


def discriminator_prob(disc: Discriminator, states, actions, policy_prob,
                       next_states=None, rng=None) -> np.ndarray:
    """D = exp(f) / (exp(f) + pi), clamped away from 0 and 1."""
    f = disc.f_values(states, actions, next_states, rng=rng)
    log_pi = np.log(np.asarray(policy_prob, dtype=np.float64))
    d = _sigmoid(np.asarray(f) - log_pi)
    return np.clip(d, PROB_CLAMP, 1.0 - PROB_CLAMP)


def extract_reward(disc: Discriminator, states, actions, policy_prob=None,
                   log_policy_prob=None, next_states=None, rng=None) -> np.ndarray:
    """Policy-facing reward log D - log(1 - D) = f - log pi, clipped to +-50."""
    if log_policy_prob is None:
        if policy_prob is None:
            raise ValueError("need policy_prob or log_policy_prob")
        log_policy_prob = np.log(np.asarray(policy_prob, dtype=np.float64))
    f = disc.f_values(states, actions, next_states, rng=rng)
    return np.clip(np.asarray(f) - log_policy_prob, -REWARD_CLAMP, REWARD_CLAMP)


def discriminator_loss_and_grads(disc: Discriminator, expert_batch, policy_batch,
                                 policy, rng=None):
    """Cross-entropy loss and its gradient in disc's flat parameter vector.

    Batches are (states, actions, next_states) column triples; the expert
    batch is scored as positive, the policy batch as negative. `policy`
    supplies pi(a|s): a TabularPolicy or anything with .log_prob.
    """
    exp_s, exp_a, exp_n = expert_batch
    pol_s, pol_a, pol_n = policy_batch
    if disc.mode == "tabular":
        f_e = disc._f_tabular(exp_s, exp_a, exp_n)
        f_p = disc._f_tabular(pol_s, pol_a, pol_n)
        cache_e = cache_p = None
    else:
        f_e, cache_e = disc._f_continuous(exp_s, exp_a, exp_n, rng)
        f_p, cache_p = disc._f_continuous(pol_s, pol_a, pol_n, rng)
    u_e = f_e - _log_policy(policy, exp_s, exp_a)
    u_p = f_p - _log_policy(policy, pol_s, pol_a)
    d_e = _sigmoid(u_e)
    d_p = _sigmoid(u_p)
    dc_e = np.clip(d_e, PROB_CLAMP, 1.0 - PROB_CLAMP)
    dc_p = np.clip(d_p, PROB_CLAMP, 1.0 - PROB_CLAMP)
    loss = float(-np.mean(np.log(dc_e)) - np.mean(np.log(1.0 - dc_p)))
    # d loss / d f per sample; zero where the clamp saturates.
    live_e = (d_e > PROB_CLAMP) & (d_e < 1.0 - PROB_CLAMP)
    live_p = (d_p > PROB_CLAMP) & (d_p < 1.0 - PROB_CLAMP)
    df_e = np.where(live_e, -(1.0 - d_e), 0.0) / f_e.shape[0]
    df_p = np.where(live_p, d_p, 0.0) / f_p.shape[0]
    if disc.mode == "tabular":
        grads = _tabular_grads(disc, (exp_s, exp_a, exp_n, df_e), (pol_s, pol_a, pol_n, df_p))
    else:
        grads = _continuous_grads(disc, (cache_e, df_e), (cache_p, df_p))
    return loss, grads


def _tabular_grads(disc, expert, policy):
    g_r = np.zeros_like(disc.r_table)
    g_phi = np.zeros_like(disc.phi_table)
    kernel = disc._dyn_kernel() if disc.shaping == "model" else None
    for states, actions, next_states, df in (expert, policy):
        states = np.asarray(states, dtype=np.int64)
        actions = np.asarray(actions, dtype=np.int64)
        np.add.at(g_r, (states, actions), df)
        np.add.at(g_phi, states, -df)
        if disc.shaping == "model":
            g_phi += disc.discount * np.einsum("b,bp->p", df, kernel[states, actions])
        else:
            np.add.at(g_phi, np.asarray(next_states, dtype=np.int64), disc.discount * df)
    return np.concatenate([g_r.ravel(), g_phi])


def _continuous_grads(disc, expert, policy):
    g_r = np.zeros(disc.r_net.n_params)
    g_phi = np.zeros(disc.phi_net.n_params)
    for cache, df in (expert, policy):
        col = df[:, None]
        g_r += disc.r_net.backward(cache["x"], col)[0]
        g_phi += disc.phi_net.backward(cache["states"], -col)[0]
        if disc.shaping == "model":
            n = cache["n"]
            rep = np.repeat(df[None, :], n, axis=0).reshape(-1, 1)
            g_phi += disc.phi_net.backward(cache["draws_flat"],
                                           (disc.discount / n) * rep)[0]
        else:
            g_phi += disc.phi_net.backward(cache["next_states"], disc.discount * col)[0]
    return np.concatenate([g_r, g_phi])


def mce_irl_gradient(mdp: TabularMDP, theta: np.ndarray, expert_occupancy: np.ndarray,
                     tol: float = 1e-10) -> np.ndarray:
    """Likelihood-ascent direction for a tabular reward: d_expert - d_soft(theta).

    The policy occupancy is that of the exact soft-optimal policy for the
    current reward table theta.
    """
    values = soft_value_iteration(mdp.with_reward(theta), tol=tol)
    policy = soft_optimal_policy(values)
    d_pi = discounted_occupancy(mdp, policy, tol=tol)
    return np.asarray(expert_occupancy, dtype=np.float64) - d_pi


def gradient_alignment_gap(mdp: TabularMDP, theta: np.ndarray, expert_occupancy=None,
                           dp_tol: float = 1e-12, f_override=None) -> float:
    """Gap between -2 * the discriminator gradient and the likelihood gradient.

    The discriminator is put at the matched point: its reward part is
    theta, its potential is the soft value of theta, and the shaping
    expectation uses the true kernel, so f equals the soft advantage and
    the policy is the soft-optimal one (D = 1/2 everywhere). Expectations
    are exact and occupancy-weighted. The potential-parameter block of the
    discriminator gradient has no likelihood counterpart; it cancels
    through the occupancy flow equations as long as the expert occupancy
    comes from the same (rho0, T, gamma), and is included in the gap.

    `f_override` replaces the matched f table to demonstrate that the
    alignment genuinely needs the hypotheses.
    """
    values = soft_value_iteration(mdp.with_reward(theta), tol=dp_tol)
    policy = soft_optimal_policy(values)
    d_pi = discounted_occupancy(mdp, policy, tol=dp_tol)
    d_exp = d_pi if expert_occupancy is None else np.asarray(expert_occupancy, dtype=np.float64)
    gamma = mdp.discount
    v = values.v
    f = theta + gamma * (mdp.kernel_2d @ v).reshape(theta.shape) - v[:, None]
    if f_override is not None:
        f = np.asarray(f_override, dtype=np.float64)
    with np.errstate(divide="ignore"):
        log_pi = np.log(policy.probs)
    d = _sigmoid(f - log_pi)
    # -2 dL/df with exact expectations: 2 [(1-D) d_exp - D d_pi] per pair.
    weight = 2.0 * ((1.0 - d) * d_exp - d * d_pi)
    g_r = weight
    g_phi = gamma * np.einsum("sa,sap->p", weight, mdp.kernel) - weight.sum(axis=1)
    mce = d_exp - d_pi
    return max(float(np.abs(g_r - mce).max()), float(np.abs(g_phi).max()))


class ExpertBuffer:
    """Read-only pool of demonstration transitions with uniform resampling."""

    def __init__(self, states, actions, next_states):
        self.states = np.array(states)
        self.actions = np.array(actions)
        self.next_states = np.array(next_states)
        if not (len(self.states) == len(self.actions) == len(self.next_states)):
            raise ValueError("column lengths differ")
        if len(self.states) == 0:
            raise ValueError("expert buffer must be nonempty")
        for arr in (self.states, self.actions, self.next_states):
            arr.flags.writeable = False

    @classmethod
    def from_file(cls, path) -> "ExpertBuffer":
        demos = load_demos(path)
        return cls(demos.states, demos.actions, demos.next_states)

    def __len__(self) -> int:
        return len(self.states)

    def sample(self, n, rng):
        idx = rng.integers(0, len(self.states), size=n)
        return self.states[idx], self.actions[idx], self.next_states[idx]
