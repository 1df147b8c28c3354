"""Per-agent local rewards, the shared global reward, and their combination.

The local term penalizes losing neighbors (P_ln per neighbor lost) plus a
flat per-step cost P_acc applied to every agent every step, moving or not.
The global term pays C_g per unit of bounding-radius shrink and is shared
identically by all agents; it is computed on the full swarm regardless of
fragmentation.
"""

from __future__ import annotations

from dataclasses import dataclass

from .geometry import SwarmState, bounding_radius
from .errors import ContractViolationError
from .visibility import adjacency_matrix


@dataclass(frozen=True)
class RewardConfig:
    p_ln: float = -0.5  # per-lost-neighbor penalty (non-positive)
    p_acc: float = -0.01  # per-step penalty (non-positive)
    c_g: float = 0.1  # global shrink normalization (positive)
    # "count" penalizes decreases of |N_i| (the formula); "set" penalizes every
    # lost edge even when a swap keeps the count unchanged.
    neighbor_loss_mode: str = "count"

    def __post_init__(self) -> None:
        if self.p_ln > 0 or self.p_acc > 0:
            raise ValueError("penalties must be non-positive")
        if self.c_g <= 0:
            raise ValueError("c_g must be positive")
        if self.neighbor_loss_mode not in ("count", "set"):
            raise ValueError(f"unknown neighbor_loss_mode {self.neighbor_loss_mode!r}")


@dataclass(frozen=True)
class StepReward:
    """Per-agent (local, global, total); the global term is identical across agents."""

    local: tuple
    global_: tuple
    total: tuple

    def __post_init__(self) -> None:
        if not len(self.local) == len(self.global_) == len(self.total):
            raise ContractViolationError("reward component lengths differ")


def local_reward(n_before: int, n_after: int, cfg: RewardConfig) -> float:
    """P_acc plus the neighbor-loss penalty when the neighbor count dropped."""
    if n_before < 0 or n_after < 0:
        raise ContractViolationError("neighbor counts must be >= 0")
    lost = n_before - n_after
    if lost > 0:
        return cfg.p_acc + lost * cfg.p_ln
    return cfg.p_acc


def global_reward(d_before: float, d_after: float, cfg: RewardConfig) -> float:
    """C_g per unit of bounding-radius shrink; negative when the swarm spreads."""
    if d_before < 0 or d_after < 0:
        raise ContractViolationError("bounding radii must be >= 0")
    return (d_before - d_after) * cfg.c_g


def step_rewards(before: SwarmState, after: SwarmState, v: float, cfg: RewardConfig) -> StepReward:
    """Reward decomposition for one synchronous step from ``before`` to ``after``."""
    if before.n != after.n:
        raise ContractViolationError(
            f"agent count changed across step: {before.n} -> {after.n}"
        )
    adj_before = adjacency_matrix(before.positions, v)
    adj_after = adjacency_matrix(after.positions, v)
    g = global_reward(bounding_radius(before), bounding_radius(after), cfg)
    local = []
    for i in range(before.n):
        if cfg.neighbor_loss_mode == "set":
            lost_edges = int((adj_before[i] & ~adj_after[i]).sum())
            r = cfg.p_acc + lost_edges * cfg.p_ln if lost_edges > 0 else cfg.p_acc
        else:
            r = local_reward(int(adj_before[i].sum()), int(adj_after[i].sum()), cfg)
        local.append(r)
    return StepReward(
        local=tuple(local),
        global_=tuple([g] * before.n),
        total=tuple(l + g for l in local),
    )
