"""The interactive reward-learning loop and expert-demonstration generation.

One environment step per iteration: act (optionally from a model-predicted
state), store the real transition, update the transition model, take
discriminator and policy steps, and periodically push synthetic model
rollouts into a second buffer whose share of the policy batches follows a
ramped schedule. Variants:

  meairl               model inside the shaping term + synthetic data
  airl_sample_baseline single-sample shaping, no model, real data only
  bc_none              behavior cloning of the expert actions, no adversary

Tabular policy updates keep a persistent per-pair reward table, moved
toward the discriminator's current f at the pairs seen in each batch, and
re-solve the soft-optimal policy against it (the entropy bonus enters
through the soft backup, so f itself is the right target, not f - log pi).
Everything is driven by named child generators of one seed, so records
are bit-reproducible.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .adversarial import (REWARD_CLAMP, Discriminator, ExpertBuffer,
                          discriminator_loss_and_grads, extract_reward)
from .buffers import RatioSchedule, ReplayBuffer
from .dynamics import (GaussianDynamicsModel, TabularDynamicsEstimate,
                       rollout_synthetic, tv_distance)
from .mdp import (ContinuousEnv, TabularEnv, TabularMDP, TabularPolicy,
                  sample_trajectory, save_continuous_demos, save_tabular_demos)
from .neural import AdamState, Mlp, adam_step, save_params
from .policy_opt import SacAgent, sac_update
from .seeding import as_generator, spawn_streams
from .soft_dp import logsumexp, soft_optimal_policy, soft_value_iteration

ALGORITHMS = ("meairl", "airl_sample_baseline", "bc_none")


class TrainingDivergedError(RuntimeError):
    """A loss went non-finite; carries the step index and a state snapshot."""

    def __init__(self, step, snapshot):
        super().__init__(f"non-finite loss at step {step}: {snapshot}")
        self.step = step
        self.snapshot = snapshot


class ExpertTrainingError(RuntimeError):
    """The continuous expert did not reach the requested return in budget."""


@dataclass
class EvalRow:
    step: int
    return_mean: float
    return_std: float
    disc_loss: float
    model_nll: float
    eps_t: float
    synthetic_fraction: float


CSV_HEADER = "step,return_mean,return_std,disc_loss,model_nll,eps_T,synthetic_fraction"


@dataclass
class TrainingRecord:
    rows: list = field(default_factory=list)

    def to_csv_text(self) -> str:
        lines = [CSV_HEADER]
        for r in self.rows:
            lines.append(",".join([
                str(r.step), repr(r.return_mean), repr(r.return_std),
                repr(r.disc_loss), repr(r.model_nll), repr(r.eps_t),
                repr(r.synthetic_fraction)]))
        return "\n".join(lines) + "\n"

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_csv_text())

    @classmethod
    def from_csv(cls, path) -> "TrainingRecord":
        with open(path, "r", encoding="utf-8") as fh:
            lines = [line.strip() for line in fh if line.strip()]
        if not lines or lines[0] != CSV_HEADER:
            raise ValueError(f"bad training record header in {path}")
        rows = []
        for line in lines[1:]:
            cells = line.split(",")
            if len(cells) != 7:
                raise ValueError(f"bad training record row: {line!r}")
            rows.append(EvalRow(int(cells[0]), *[float(c) for c in cells[1:]]))
        return cls(rows=rows)


@dataclass
class TrainingConfig:
    """Every knob of the loop; defaults are the ones the reference runs use."""

    total_steps: int = 50_000
    pretrain_steps: int = 2_000
    rollout_horizon: int = 3
    rollout_starts: int = 4
    model_update_period: int = 1
    disc_updates_per_step: int = 1
    policy_updates_per_step: int = 1
    batch_size: int = 256
    env_buffer_capacity: int = 100_000
    disc_lr: float = 3e-4
    model_lr: float = 3e-4
    # Small smoothing keeps count-based estimates proper without planting
    # phantom successors on near-deterministic kernels.
    model_alpha: float = 0.01
    model_hidden: tuple = (128, 128)
    model_clip_norm: float = 10.0
    policy_td_rate: float = 0.5
    n_model_samples: int = 8
    disc_hidden: tuple = (100, 100)
    sac_hidden: tuple = (64, 64)
    sac_lr: float = 3e-4
    alpha_ent: float = 0.2
    tau: float = 0.005
    discount: float = 0.99  # continuous loop only; tabular uses the MDP's own
    ratio_start: float = 0.05
    ratio_end: float = 0.5
    ratio_ramp_frac: float = 0.5
    gen_buffer_init: int = 1_000
    gen_buffer_growth: float = 1.0
    gen_buffer_max: int = 50_000
    mix_prob_start: float = 0.1
    mix_prob_end: float = 0.1
    use_synthetic: bool = True
    disc_use_synthetic: bool = False
    eval_period: int = 1_000
    eval_episodes: int = 10
    checkpoint_period: int = 0
    checkpoint_dir: str = ""
    algorithm: str = "meairl"
    seed: int = 0

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if not 0 <= self.pretrain_steps <= self.total_steps:
            raise ValueError(f"need 0 <= pretrain_steps <= total_steps, got "
                             f"{self.pretrain_steps} vs {self.total_steps}")
        if self.rollout_horizon < 1:
            raise ValueError(f"rollout_horizon must be >= 1, got {self.rollout_horizon}")
        for name in ("batch_size", "rollout_starts", "eval_period", "eval_episodes"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in ("ratio_start", "ratio_end", "ratio_ramp_frac",
                     "mix_prob_start", "mix_prob_end", "policy_td_rate"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")

    def ratio_schedule(self) -> RatioSchedule:
        return RatioSchedule(self.ratio_start, self.ratio_end,
                             int(round(self.ratio_ramp_frac * self.total_steps)),
                             self.gen_buffer_init, self.gen_buffer_growth,
                             self.gen_buffer_max)

    def mix_prob_at(self, step: int) -> float:
        if self.total_steps <= 1:
            return self.mix_prob_end
        frac = min(1.0, step / self.total_steps)
        return self.mix_prob_start + (self.mix_prob_end - self.mix_prob_start) * frac


def _act(agent, state, rng):
    if isinstance(agent, TabularPolicy):
        return agent.sample(state, rng)
    if isinstance(agent, SacAgent):
        return agent.act(state, rng)
    return agent(state, rng)


def mix_action(real_state, agent, model, mix_prob: float, prev_transition, rng):
    """Pick the action from a model-predicted stand-in of the current state.

    With probability mix_prob (and when a previous transition and a model
    exist), the agent is queried at s_hat sampled from the model's
    prediction for the previous (state, action) instead of at the real
    state. Returns (action, used_model_state). The stored transition must
    still record the real state; this only shifts where the policy is
    evaluated, which counters train/deploy distribution mismatch.
    """
    rng = as_generator(rng)
    coin = rng.random()
    if model is not None and prev_transition is not None and coin < mix_prob:
        prev_s, prev_a = prev_transition
        state = model.sample_next(prev_s, prev_a, rng)
        return _act(agent, state, rng), True
    return _act(agent, real_state, rng), False


def run_meairl(env, expert: ExpertBuffer, config: TrainingConfig) -> TrainingRecord:
    """Run the full loop; returns the evaluation record."""
    if isinstance(env, TabularEnv):
        return _run_tabular(env, expert, config)
    if isinstance(env, ContinuousEnv):
        return _run_continuous(env, expert, config)
    raise TypeError(f"unsupported env type {type(env).__name__}")


def _bc_policy_tabular(expert: ExpertBuffer, n_states: int, n_actions: int) -> TabularPolicy:
    counts = np.zeros((n_states, n_actions))
    np.add.at(counts, (expert.states, expert.actions), 1.0)
    totals = counts.sum(axis=1, keepdims=True)
    probs = np.where(totals > 0.0, counts / np.maximum(totals, 1.0), 1.0 / n_actions)
    return TabularPolicy(probs)


def evaluate_tabular_policy(env: TabularEnv, policy: TabularPolicy, episodes: int, rng):
    """Mean and std of the discounted episode return under the true reward.

    Actions are sampled from the policy, the same protocol the demonstration
    returns are measured under, so learner and expert numbers are comparable.
    """
    mdp = env.mdp
    returns = np.empty(episodes)
    for e in range(episodes):
        s = mdp.sample_init(rng)
        total, scale = 0.0, 1.0
        for _ in range(env.episode_horizon):
            a = policy.sample(s, rng)
            total += scale * mdp.reward[s, a]
            scale *= mdp.discount
            s = mdp.sample_next(s, a, rng)
        returns[e] = total
    return float(returns.mean()), float(returns.std())


def _checkpoint(config, step, named_params):
    if not config.checkpoint_period or not config.checkpoint_dir:
        return
    if step % config.checkpoint_period != 0:
        return
    os.makedirs(config.checkpoint_dir, exist_ok=True)
    for name, (sizes, params) in named_params.items():
        save_params(os.path.join(config.checkpoint_dir, f"step{step}_{name}.txt"),
                    sizes, params)


def _run_tabular(env: TabularEnv, expert: ExpertBuffer, config: TrainingConfig) -> TrainingRecord:
    mdp = env.mdp
    n_states, n_actions = mdp.n_states, mdp.n_actions
    alg = config.algorithm
    model_based = alg == "meairl"
    adversarial = alg in ("meairl", "airl_sample_baseline")
    streams = spawn_streams(config.seed, ("interact", "disc", "rollout", "policy", "mix", "eval"))
    d_env = ReplayBuffer(config.env_buffer_capacity)
    ratio = config.ratio_schedule()
    d_gen = ReplayBuffer(ratio.cap_init, phys_capacity=ratio.cap_max)
    model = TabularDynamicsEstimate(n_states, n_actions, alpha=config.model_alpha) \
        if model_based else None
    disc = None
    if adversarial:
        disc = Discriminator.tabular(n_states, n_actions, mdp.discount,
                                     dynamics=model,
                                     shaping="model" if model_based else "sample")
        disc_adam = AdamState.for_params(disc.params, lr=config.disc_lr)
    policy = _bc_policy_tabular(expert, n_states, n_actions) if alg == "bc_none" \
        else TabularPolicy.uniform(n_states, n_actions)
    q_pol = np.zeros((n_states, n_actions))
    last_disc_loss = float("nan")
    record = TrainingRecord()
    state = mdp.sample_init(streams["interact"])
    ep_t = 0
    prev = None
    for t in range(1, config.total_steps + 1):
        if model_based and t > config.pretrain_steps:
            action, _ = mix_action(state, policy, model, config.mix_prob_at(t),
                                   prev, streams["mix"])
        else:
            action = policy.sample(state, streams["interact"])
        s_next = mdp.sample_next(state, action, streams["interact"])
        d_env.add(state, action, s_next)
        if model_based:
            model.add(state, action, s_next)
        prev = (state, action)
        ep_t += 1
        if ep_t >= env.episode_horizon:
            state = mdp.sample_init(streams["interact"])
            ep_t, prev = 0, None
        else:
            state = s_next
        if adversarial and t > config.pretrain_steps:
            for _ in range(config.disc_updates_per_step):
                e_batch = expert.sample(config.batch_size, streams["disc"])
                n_syn_d = 0
                if model_based and config.disc_use_synthetic and len(d_gen) > 0:
                    n_syn_d = int(round(ratio.fraction(t) * config.batch_size))
                ps, pa, pn = d_env.sample(config.batch_size - n_syn_d, streams["disc"])
                if n_syn_d > 0:
                    gs, ga, gn = d_gen.sample(n_syn_d, streams["disc"])
                    ps = np.concatenate([ps, gs])
                    pa = np.concatenate([pa, ga])
                    pn = np.concatenate([pn, gn])
                p_batch = (ps, pa, pn)
                loss, grads = discriminator_loss_and_grads(disc, e_batch, p_batch, policy)
                if not np.isfinite(loss):
                    raise TrainingDivergedError(t, {"disc_loss": loss})
                disc.params = adam_step(disc_adam, disc.params, grads)
                last_disc_loss = loss
            if model_based and config.use_synthetic:
                d_gen.set_capacity(ratio.capacity(t))
                starts, _, _ = d_env.sample(config.rollout_starts, streams["rollout"])
                d_gen.add_batch(*rollout_synthetic(model, policy, starts,
                                                   config.rollout_horizon,
                                                   streams["rollout"]))
            for _ in range(config.policy_updates_per_step):
                frac = ratio.fraction(t) if (model_based and config.use_synthetic) else 0.0
                n_syn = int(round(frac * config.batch_size))
                if len(d_gen) == 0:
                    n_syn = 0
                bs, ba, bn = d_env.sample(config.batch_size - n_syn, streams["policy"])
                if n_syn > 0:
                    gs, ga, gn = d_gen.sample(n_syn, streams["policy"])
                    bs = np.concatenate([bs, gs])
                    ba = np.concatenate([ba, ga])
                    bn = np.concatenate([bn, gn])
                rewards = np.clip(disc.f_values(bs, ba, bn), -REWARD_CLAMP, REWARD_CLAMP)
                if not np.all(np.isfinite(rewards)):
                    raise TrainingDivergedError(t, {"reward_targets": "non-finite"})
                # One soft TD backup per sampled transition, the tabular
                # counterpart of a single actor-critic step. Duplicate
                # (s,a) rows fold into one convex step per pair; a plain
                # scatter-add would multiply the step size by the duplicate
                # count (batches pile onto absorbing states) and diverge.
                v_soft = logsumexp(q_pol, axis=1)
                td = rewards + mdp.discount * v_soft[bn]
                pair = bs * n_actions + ba
                counts = np.bincount(pair, minlength=q_pol.size)
                hit = counts > 0
                sums = np.bincount(pair, weights=td, minlength=q_pol.size)
                decay = (1.0 - config.policy_td_rate) ** counts[hit]
                flat = q_pol.ravel()
                flat[hit] = decay * flat[hit] + (1.0 - decay) * (sums[hit] / counts[hit])
                adv = q_pol - logsumexp(q_pol, axis=1)[:, None]
                policy = TabularPolicy(np.exp(adv))
        if t % config.eval_period == 0:
            mean, std = evaluate_tabular_policy(env, policy, config.eval_episodes,
                                                streams["eval"])
            eps_t = model_nll = float("nan")
            if model_based:
                eps_t = tv_distance(mdp.kernel, model.kernel)[0]
                es, ea, en = d_env.newest(256)
                model_nll = model.nll(es, ea, en)
            frac = ratio.fraction(t) if (model_based and config.use_synthetic
                                         and t > config.pretrain_steps) else 0.0
            record.rows.append(EvalRow(t, mean, std, last_disc_loss, model_nll,
                                       eps_t, frac))
        named = {"policy": ([n_states, n_actions], policy.probs.ravel())}
        if disc is not None:
            named["disc"] = ([disc.n_params], disc.params)
        _checkpoint(config, t, named)
    return record


def evaluate_continuous_policy(env: ContinuousEnv, act_fn, episodes: int, rng):
    """Mean and std of the undiscounted episode return under the true reward."""
    returns = np.empty(episodes)
    for e in range(episodes):
        s = env.reset(rng)
        total = 0.0
        for _ in range(env.horizon):
            a = act_fn(s, rng)
            s, r = env.step(s, a, rng)
            total += r
        returns[e] = total
    return float(returns.mean()), float(returns.std())


def _run_continuous(env: ContinuousEnv, expert: ExpertBuffer,
                    config: TrainingConfig) -> TrainingRecord:
    alg = config.algorithm
    model_based = alg == "meairl"
    adversarial = alg in ("meairl", "airl_sample_baseline")
    streams = spawn_streams(config.seed,
                            ("interact", "disc", "rollout", "policy", "mix", "eval", "init"))
    d = env.state_dim
    k = env.action_dim
    d_env = ReplayBuffer(config.env_buffer_capacity, state_shape=(d,), action_shape=(k,),
                         dtype=np.float64)
    ratio = config.ratio_schedule()
    d_gen = ReplayBuffer(ratio.cap_init, phys_capacity=ratio.cap_max,
                         state_shape=(d,), action_shape=(k,), dtype=np.float64)
    model = None
    if model_based:
        model = GaussianDynamicsModel(d, k, hidden=config.model_hidden,
                                      state_low=env.state_low, state_high=env.state_high,
                                      rng=streams["init"])
        model_adam = AdamState.for_params(model.params, lr=config.model_lr)
    agent = SacAgent(d, k, env.action_low, env.action_high, config.discount,
                     hidden=config.sac_hidden, lr=config.sac_lr,
                     alpha_ent=config.alpha_ent, tau=config.tau, rng=streams["init"])
    disc = None
    if adversarial:
        disc = Discriminator.continuous(d, k, config.discount, dynamics=model,
                                        shaping="model" if model_based else "sample",
                                        hidden=config.disc_hidden,
                                        n_model_samples=config.n_model_samples,
                                        rng=streams["init"])
        disc_adam = AdamState.for_params(disc.params, lr=config.disc_lr)
    bc_net = None
    if alg == "bc_none":
        bc_net = Mlp([d, *config.sac_hidden, k], output="tanh", rng=streams["init"])
        bc_adam = AdamState.for_params(bc_net.params, lr=config.sac_lr)

    def bc_act(states, rng_, deterministic=True):
        out = bc_net.forward(np.atleast_2d(states))
        a = agent.center + agent.scale * out
        return a[0] if np.asarray(states).ndim == 1 else a

    def eval_act(s, rng_):
        if bc_net is not None:
            return bc_act(s, rng_)
        return agent.act(s, rng_, deterministic=True)

    last_disc_loss = last_model_nll = float("nan")
    record = TrainingRecord()
    state = env.reset(streams["interact"])
    ep_t = 0
    prev = None
    for t in range(1, config.total_steps + 1):
        if model_based and t > config.pretrain_steps:
            action, _ = mix_action(state, agent, model, config.mix_prob_at(t),
                                   prev, streams["mix"])
        elif bc_net is not None:
            action = bc_act(state, streams["interact"])
        else:
            action = agent.act(state, streams["interact"])
        s_next, _ = env.step(state, action, streams["interact"])
        d_env.add(state, action, s_next)
        prev = (state, action)
        ep_t += 1
        if ep_t >= env.horizon:
            state = env.reset(streams["interact"])
            ep_t, prev = 0, None
        else:
            state = s_next
        if model_based and (t <= config.pretrain_steps
                            or t % config.model_update_period == 0):
            ms, ma, mn = d_env.sample(config.batch_size, streams["disc"])
            nll, grads = model.loss_and_grads(ms, ma, mn)
            if not np.isfinite(nll):
                raise TrainingDivergedError(t, {"model_nll": nll})
            model.params = adam_step(model_adam, model.params, grads,
                                     clip_norm=config.model_clip_norm)
            last_model_nll = nll
        if t <= config.pretrain_steps:
            pass
        elif adversarial:
            for _ in range(config.disc_updates_per_step):
                e_batch = expert.sample(config.batch_size, streams["disc"])
                p_batch = d_env.sample(config.batch_size, streams["disc"])
                loss, grads = discriminator_loss_and_grads(disc, e_batch, p_batch,
                                                           agent, rng=streams["disc"])
                if not np.isfinite(loss):
                    raise TrainingDivergedError(t, {"disc_loss": loss})
                disc.params = adam_step(disc_adam, disc.params, grads)
                last_disc_loss = loss
            if model_based and config.use_synthetic:
                d_gen.set_capacity(ratio.capacity(t))
                starts, _, _ = d_env.sample(config.rollout_starts, streams["rollout"])
                d_gen.add_batch(*rollout_synthetic(
                    model, lambda s, r: agent.act(s, r), starts,
                    config.rollout_horizon, streams["rollout"]))
            for _ in range(config.policy_updates_per_step):
                frac = ratio.fraction(t) if (model_based and config.use_synthetic) else 0.0
                n_syn = int(round(frac * config.batch_size))
                if len(d_gen) == 0:
                    n_syn = 0
                bs, ba, bn = d_env.sample(config.batch_size - n_syn, streams["policy"])
                if n_syn > 0:
                    gs, ga, gn = d_gen.sample(n_syn, streams["policy"])
                    bs = np.concatenate([bs, gs])
                    ba = np.concatenate([ba, ga])
                    bn = np.concatenate([bn, gn])
                rewards = extract_reward(disc, bs, ba,
                                         log_policy_prob=agent.log_prob(bs, ba),
                                         next_states=bn, rng=streams["policy"])
                diag = sac_update(agent, (bs, ba, rewards, bn, np.zeros(len(bs))),
                                  streams["policy"])
                if not (np.isfinite(diag.critic_loss) and np.isfinite(diag.actor_loss)):
                    raise TrainingDivergedError(t, {"critic_loss": diag.critic_loss,
                                                    "actor_loss": diag.actor_loss})
        else:  # behavior cloning
            es, ea, _ = expert.sample(config.batch_size, streams["policy"])
            target_t = np.clip((ea - agent.center) / agent.scale, -1.0, 1.0)
            pred = bc_net.forward(es)
            diff = pred - target_t
            grads, _ = bc_net.backward(es, 2.0 * diff / diff.shape[0])
            bc_net.params[...] = adam_step(bc_adam, bc_net.params, grads)
        if t % config.eval_period == 0:
            mean, std = evaluate_continuous_policy(env, eval_act, config.eval_episodes,
                                                   streams["eval"])
            frac = ratio.fraction(t) if (model_based and config.use_synthetic
                                         and t > config.pretrain_steps) else 0.0
            record.rows.append(EvalRow(t, mean, std, last_disc_loss, last_model_nll,
                                       float("nan"), frac))
        named = {}
        if disc is not None:
            named["disc"] = ([disc.n_params], disc.params)
        if bc_net is None:
            named["actor"] = (agent.actor.sizes, agent.actor.params)
        _checkpoint(config, t, named)
    return record


def generate_expert(env, seed: int, n_episodes: int, out_path,
                    return_threshold: float = None, max_steps: int = 100_000,
                    config: TrainingConfig = None):
    """Write a demonstration file for the environment's true reward.

    Tabular: the exact soft-optimal policy, rolled out n_episodes times.
    Continuous: a SAC agent trained on the true reward until its
    mean-action evaluation return reaches return_threshold (raises
    ExpertTrainingError if the step budget runs out first).
    """
    if n_episodes < 1:
        raise ValueError(f"n_episodes must be >= 1, got {n_episodes}")
    if isinstance(env, TabularEnv):
        rng = as_generator(seed)
        policy = soft_optimal_policy(soft_value_iteration(env.mdp))
        trajs = [sample_trajectory(env.mdp, policy, env.episode_horizon, rng)
                 for _ in range(n_episodes)]
        save_tabular_demos(out_path, trajs, env.name, seed,
                           env.mdp.n_states, env.mdp.n_actions)
        return out_path
    if not isinstance(env, ContinuousEnv):
        raise TypeError(f"unsupported env type {type(env).__name__}")
    if return_threshold is None:
        raise ValueError("continuous expert generation needs return_threshold")
    config = config or TrainingConfig()
    streams = spawn_streams(seed, ("interact", "update", "eval", "init", "demo"))
    agent = SacAgent(env.state_dim, env.action_dim, env.action_low, env.action_high,
                     config.discount, hidden=config.sac_hidden, lr=config.sac_lr,
                     alpha_ent=config.alpha_ent, tau=config.tau, rng=streams["init"])
    buf = ReplayBuffer(config.env_buffer_capacity, state_shape=(env.state_dim,),
                       action_shape=(env.action_dim,), dtype=np.float64)
    rewards_col = np.zeros(config.env_buffer_capacity)
    state = env.reset(streams["interact"])
    ep_t = 0
    warmup = min(1_000, max_steps // 10)
    best = float("-inf")
    reached = False
    for t in range(1, max_steps + 1):
        if t <= warmup:
            action = streams["interact"].uniform(env.action_low, env.action_high)
        else:
            action = agent.act(state, streams["interact"])
        s_next, reward = env.step(state, action, streams["interact"])
        rewards_col[buf._head] = reward
        buf.add(state, action, s_next)
        ep_t += 1
        if ep_t >= env.horizon:
            state = env.reset(streams["interact"])
            ep_t = 0
        else:
            state = s_next
        if t > warmup:
            idx = buf._indices(config.batch_size, streams["update"])
            batch = (buf.states[idx], buf.actions[idx], rewards_col[idx],
                     buf.next_states[idx], np.zeros(config.batch_size))
            sac_update(agent, batch, streams["update"])
        if t % config.eval_period == 0 and t > warmup:
            mean, _ = evaluate_continuous_policy(
                env, lambda s, r: agent.act(s, r, deterministic=True),
                config.eval_episodes, streams["eval"])
            best = max(best, mean)
            if mean >= return_threshold:
                reached = True
                break
    if not reached:
        raise ExpertTrainingError(
            f"expert SAC reached {best:.3f} < threshold {return_threshold:.3f} "
            f"within {max_steps} steps")
    episodes = []
    for _ in range(n_episodes):
        s = env.reset(streams["demo"])
        states = [s.copy()]
        actions = []
        for _ in range(env.horizon):
            a = agent.act(s, streams["demo"])
            s, _ = env.step(s, a, streams["demo"])
            states.append(s.copy())
            actions.append(np.asarray(a).copy())
        episodes.append((np.array(states), np.array(actions)))
    save_continuous_demos(out_path, episodes, env.name, seed,
                          env.state_dim, env.action_dim)
    return out_path
