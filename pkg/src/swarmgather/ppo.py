"""Desk-scale multi-agent PPO with parameter sharing.

One policy drives every agent (homogeneous swarm, centralized training via
the shared global reward term, decentralized execution). Rollouts from
n_envs parallel episodes fill a fixed-size buffer of per-agent transitions;
updates run the clipped surrogate objective with GAE advantages over seeded
minibatches. Everything is driven by one master seed, so a training run is
bit-repeatable.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .constellation import ConstellationSpec, generate
from .engine import EnvConfig, GatheringEnv
from .errors import ContractViolationError, TrainingError
from .net import PolicyNet, save_weights, squash_raw
from .optim import Adam, clip_grad_norm
from .sensing import rasterize

LOG_COLUMNS = (
    "update",
    "steps",
    "mean_return",
    "mean_episode_len",
    "connectivity_rate",
    "policy_loss",
    "value_loss",
    "approx_kl",
)

EPISODE_WINDOW = 10  # rolling stats over this many recently finished episodes

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class TrainerConfig:
    gamma: float = 0.95
    lr: float = 2e-5
    batch_size: int = 2048
    n_envs: int = 8
    clip_eps: float = 0.2
    gae_lambda: float = 0.95
    epochs_per_update: int = 4
    minibatch_size: int = 64
    value_coef: float = 0.5
    entropy_coef: float = 0.0
    grad_clip: float = 0.5
    total_steps: int = 200_000
    checkpoint_interval: int = 50_000
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must be in (0, 1], got {self.gamma}")
        if self.clip_eps <= 0.0:
            raise ValueError(f"clip_eps must be positive, got {self.clip_eps}")
        if self.batch_size < 1 or self.n_envs < 1:
            raise ValueError("batch_size and n_envs must be >= 1")


class ScenarioSource:
    """Supplies initial constellations; seeded, so replays reproduce them."""

    def next_initial(self, global_step: int):
        raise NotImplementedError


class GeneratedScenarios(ScenarioSource):
    """Fresh constellation per episode from a seeded counter."""

    def __init__(self, n_agents: int, visibility: float = 50.0, visibility_ratio: float = 0.5,
                 min_separation: float = 1.0, seed: int = 0):
        self._base = dict(
            n_agents=n_agents,
            visibility=visibility,
            visibility_ratio=visibility_ratio,
            min_separation=min_separation,
        )
        self._seed = seed
        self._counter = 0

    def next_initial(self, global_step: int):
        spec = ConstellationSpec(seed=self._seed + self._counter, **self._base)
        self._counter += 1
        return generate(spec)


class PhasedScenarios(ScenarioSource):
    """Curriculum: (step_threshold, source) phases selected by global step."""

    def __init__(self, phases):
        if not phases:
            raise ValueError("need at least one phase")
        self._phases = sorted(phases, key=lambda item: item[0])

    def next_initial(self, global_step: int):
        for threshold, source in self._phases:
            if global_step < threshold:
                return source.next_initial(global_step)
        return self._phases[-1][1].next_initial(global_step)


@dataclass
class RolloutBuffer:
    """Fixed-capacity (T, n_envs, n_agents) transition store, flushed per update."""

    obs: np.ndarray  # uint8 (T, E, A, 75, 75)
    raw_actions: np.ndarray  # float32 (T, E, A, 2), pre-squash samples
    log_probs: np.ndarray  # float32 (T, E, A)
    rewards: np.ndarray  # float32 (T, E, A), r_total
    values: np.ndarray  # float32 (T, E, A)
    next_values: np.ndarray  # float32 (T, E, A), 0 at terminal, bootstrap at truncation
    dones: np.ndarray  # bool (T, E), episode boundary of either kind

    @classmethod
    def allocate(cls, horizon: int, n_envs: int, n_agents: int) -> "RolloutBuffer":
        shape = (horizon, n_envs, n_agents)
        return cls(
            obs=np.zeros(shape + (75, 75), dtype=np.uint8),
            raw_actions=np.zeros(shape + (2,), dtype=np.float32),
            log_probs=np.zeros(shape, dtype=np.float32),
            rewards=np.zeros(shape, dtype=np.float32),
            values=np.zeros(shape, dtype=np.float32),
            next_values=np.zeros(shape, dtype=np.float32),
            dones=np.zeros(shape[:2], dtype=bool),
        )

    @property
    def size(self) -> int:
        t, e, a = self.obs.shape[:3]
        return t * e * a


def gaussian_log_prob(sample: np.ndarray, mean: np.ndarray, log_std: np.ndarray) -> np.ndarray:
    """Log density of a diagonal Gaussian, summed over action dims."""
    z = (sample - mean) / np.exp(log_std)
    return (-0.5 * z * z - log_std - 0.5 * LOG_2PI).sum(axis=-1)


def clipped_objective(ratio: np.ndarray, advantage: np.ndarray, clip_eps: float):
    """Per-transition clipped surrogate: min(r*A, clip(r)*A).

    Returns (objective, active) where active marks transitions whose gradient
    flows through the unclipped branch.
    """
    surr1 = ratio * advantage
    surr2 = np.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * advantage
    if not (np.minimum(surr1, surr2) <= np.maximum(surr1, surr2) + 1e-6).all():
        raise TrainingError("clip bound violated: min(surrogates) > max(surrogates)")
    return np.minimum(surr1, surr2), surr1 <= surr2


class _EnvSlot:
    """One parallel environment plus its episode accumulators."""

    def __init__(self, source: ScenarioSource, env_cfg: EnvConfig, global_step: int):
        self.source = source
        self.env_cfg = env_cfg
        self.reset(global_step)

    def reset(self, global_step: int) -> None:
        self.env = GatheringEnv(self.source.next_initial(global_step), self.env_cfg)
        observations = self.env.reset()
        self.images = np.stack([rasterize(o) for o in observations])
        self.ep_return = 0.0
        self.ep_len = 0
        self.ep_connected = True

    def step(self, actions):
        observations, rewards, flags, record = self.env.step(actions)
        self.images = np.stack([rasterize(o) for o in observations])
        self.ep_return += float(np.mean(rewards.total))
        self.ep_len += 1
        self.ep_connected = self.ep_connected and record.connected
        return rewards, flags


class EpisodeStats:
    """Rolling window over recently finished episodes."""

    def __init__(self, window: int = EPISODE_WINDOW):
        self.window = window
        self.finished: list = []
        self.total_episodes = 0

    def record(self, ep_return: float, length: int, connected: bool, converged: bool) -> None:
        self.finished.append((ep_return, length, connected, converged))
        self.total_episodes += 1
        if len(self.finished) > self.window:
            self.finished.pop(0)

    def summary(self) -> tuple:
        if not self.finished:
            return math.nan, math.nan, math.nan
        returns, lengths, connected, _ = zip(*self.finished)
        return (
            float(np.mean(returns)),
            float(np.mean(lengths)),
            float(np.mean(connected)),
        )


def collect_rollouts(net: PolicyNet, slots, cfg: TrainerConfig, rng, stats: EpisodeStats,
                     global_step: int) -> tuple:
    """Fill a buffer with exactly batch_size transitions; returns (buffer, new_step)."""
    n_envs = len(slots)
    n_agents = slots[0].env.n
    per_step = n_envs * n_agents
    if cfg.batch_size % per_step != 0:
        raise ContractViolationError(
            f"batch_size {cfg.batch_size} must be divisible by n_envs*n_agents={per_step}"
        )
    horizon = cfg.batch_size // per_step
    buffer = RolloutBuffer.allocate(horizon, n_envs, n_agents)
    log_std = net.params["log_std"].astype(np.float32)

    for t in range(horizon):
        images = np.concatenate([slot.images for slot in slots])  # (E*A, 75, 75)
        mean, values, _ = net.forward(images)
        noise = rng.standard_normal((per_step, 2)).astype(np.float32)
        samples = mean + np.exp(log_std) * noise
        log_probs = gaussian_log_prob(samples, mean, log_std)

        buffer.obs[t] = images.reshape(n_envs, n_agents, 75, 75)
        buffer.raw_actions[t] = samples.reshape(n_envs, n_agents, 2)
        buffer.log_probs[t] = log_probs.reshape(n_envs, n_agents)
        buffer.values[t] = values.reshape(n_envs, n_agents)

        for e, slot in enumerate(slots):
            agent_actions = [
                squash_raw(samples[e * n_agents + a]) for a in range(n_agents)
            ]
            rewards, flags = slot.step(agent_actions)
            buffer.rewards[t, e] = np.asarray(rewards.total, dtype=np.float32)
            global_step += n_agents
            if flags.done:
                buffer.dones[t, e] = True
                if flags.truncated:
                    _, final_values, _ = net.forward(slot.images)
                    buffer.next_values[t, e] = final_values
                stats.record(slot.ep_return, slot.ep_len, slot.ep_connected, flags.converged)
                slot.reset(global_step)

    # bootstrap for slots still mid-episode at the buffer boundary
    images = np.concatenate([slot.images for slot in slots])
    _, tail_values, _ = net.forward(images)
    tail_values = tail_values.reshape(n_envs, n_agents)
    open_mask = ~buffer.dones
    buffer.next_values[:-1][open_mask[:-1]] = buffer.values[1:][open_mask[:-1]]
    buffer.next_values[-1][open_mask[-1]] = tail_values[open_mask[-1]]
    return buffer, global_step


def compute_gae(buffer: RolloutBuffer, gamma: float, lam: float, normalize: bool = True):
    """Generalized advantage estimation over the buffer; returns (adv, returns).

    next_values already carries episode boundaries (0 at terminal, bootstrap
    at truncation), so the recursion only needs the done mask.
    """
    horizon = buffer.rewards.shape[0]
    deltas = buffer.rewards + gamma * buffer.next_values - buffer.values
    advantages = np.zeros_like(buffer.rewards)
    carry = np.zeros_like(buffer.rewards[0])
    for t in range(horizon - 1, -1, -1):
        mask = (~buffer.dones[t])[:, None].astype(np.float32)
        carry = deltas[t] + gamma * lam * mask * carry
        advantages[t] = carry
    returns = advantages + buffer.values
    if normalize:
        flat = advantages.reshape(-1)
        advantages = (advantages - flat.mean()) / (flat.std() + 1e-8)
    return advantages, returns


def ppo_update(net: PolicyNet, buffer: RolloutBuffer, advantages, returns,
               cfg: TrainerConfig, optimizer: Adam, rng) -> dict:
    """Clipped-surrogate epochs over seeded minibatches; one Adam step each."""
    batch = buffer.size
    obs = buffer.obs.reshape(batch, 75, 75)
    actions = buffer.raw_actions.reshape(batch, 2)
    old_log_probs = buffer.log_probs.reshape(batch)
    adv = advantages.reshape(batch).astype(np.float32)
    ret = returns.reshape(batch).astype(np.float32)

    totals = {"policy_loss": 0.0, "value_loss": 0.0, "approx_kl": 0.0, "clip_fraction": 0.0, "entropy": 0.0}
    steps = 0
    for _ in range(cfg.epochs_per_update):
        order = rng.permutation(batch)
        for start in range(0, batch, cfg.minibatch_size):
            idx = order[start : start + cfg.minibatch_size]
            mb = idx.size
            mean, values, cache = net.forward(obs[idx])
            log_std = net.params["log_std"]
            std = np.exp(log_std)
            z = (actions[idx] - mean) / std
            log_probs = (-0.5 * z * z - log_std - 0.5 * LOG_2PI).sum(axis=1)
            ratio = np.exp(log_probs - old_log_probs[idx])
            objective, active = clipped_objective(ratio, adv[idx], cfg.clip_eps)
            policy_loss = -float(objective.mean())
            value_err = values - ret[idx]
            value_loss = float((value_err * value_err).mean())
            entropy = float((log_std + 0.5 * (1.0 + LOG_2PI)).sum())
            loss = policy_loss + cfg.value_coef * value_loss - cfg.entropy_coef * entropy
            if not math.isfinite(loss):
                raise TrainingError(
                    f"non-finite loss: policy={policy_loss} value={value_loss} "
                    f"ratio range=({ratio.min()}, {ratio.max()}) "
                    f"adv range=({adv[idx].min()}, {adv[idx].max()})"
                )

            # d(policy_loss)/d(log_prob): nonzero where the unclipped branch is the min
            grad_log_prob = -(adv[idx] * ratio * active.astype(np.float32)) / mb
            grad_mean = grad_log_prob[:, None] * z / std
            grad_log_std_policy = (grad_log_prob[:, None] * (z * z - 1.0)).sum(axis=0)
            grad_value = cfg.value_coef * 2.0 * value_err / mb
            grads = net.backward(cache, grad_mean, grad_value)
            grads["log_std"] = grads["log_std"] + grad_log_std_policy.astype(np.float32)
            grads["log_std"] -= cfg.entropy_coef  # d(-entropy)/d(log_std) = -1 per dim
            clip_grad_norm(grads, cfg.grad_clip)
            optimizer.step(net.params, grads)

            totals["policy_loss"] += policy_loss
            totals["value_loss"] += value_loss
            totals["approx_kl"] += float((old_log_probs[idx] - log_probs).mean())
            totals["clip_fraction"] += float((np.abs(ratio - 1.0) > cfg.clip_eps).mean())
            totals["entropy"] += entropy
            steps += 1
    return {key: value / steps for key, value in totals.items()}


@dataclass
class TrainingRun:
    net: PolicyNet
    history: list = field(default_factory=list)  # one dict per update, LOG_COLUMNS keys
    checkpoints: list = field(default_factory=list)  # (steps, path)
    log_path: str | None = None


def train(cfg: TrainerConfig, source: ScenarioSource, out_dir,
          env_cfg: EnvConfig | None = None) -> TrainingRun:
    """Run PPO to total_steps; writes checkpoints and a CSV training log."""
    os.makedirs(out_dir, exist_ok=True)
    env_cfg = env_cfg or EnvConfig()
    seeds = np.random.SeedSequence(cfg.seed).spawn(3)
    net = PolicyNet.initialize(seed=seeds[0])
    sample_rng = np.random.default_rng(seeds[1])
    shuffle_rng = np.random.default_rng(seeds[2])
    optimizer = Adam(net.params, lr=cfg.lr)
    stats = EpisodeStats()

    slots = [_EnvSlot(source, env_cfg, 0) for _ in range(cfg.n_envs)]
    run = TrainingRun(net=net)
    log_path = os.path.join(out_dir, "training_log.csv")
    run.log_path = log_path

    def checkpoint(steps: int) -> None:
        path = os.path.join(out_dir, f"checkpoint_{steps:09d}.s2pw")
        save_weights(net, path)
        run.checkpoints.append((steps, path))

    checkpoint(0)
    next_checkpoint = cfg.checkpoint_interval
    global_step = 0
    update = 0
    with open(log_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(LOG_COLUMNS)
        while global_step < cfg.total_steps:
            buffer, global_step = collect_rollouts(
                net, slots, cfg, sample_rng, stats, global_step
            )
            advantages, returns = compute_gae(buffer, cfg.gamma, cfg.gae_lambda)
            losses = ppo_update(net, buffer, advantages, returns, cfg, optimizer, shuffle_rng)
            update += 1
            mean_return, mean_len, connectivity = stats.summary()
            row = {
                "update": update,
                "steps": global_step,
                "mean_return": mean_return,
                "mean_episode_len": mean_len,
                "connectivity_rate": connectivity,
                "policy_loss": losses["policy_loss"],
                "value_loss": losses["value_loss"],
                "approx_kl": losses["approx_kl"],
            }
            run.history.append(row)
            writer.writerow([row[col] for col in LOG_COLUMNS])
            fh.flush()
            if cfg.checkpoint_interval > 0 and global_step >= next_checkpoint:
                checkpoint(global_step)
                next_checkpoint += cfg.checkpoint_interval
    if not run.checkpoints or run.checkpoints[-1][0] != global_step:
        if global_step > 0:
            checkpoint(global_step)
    return run
