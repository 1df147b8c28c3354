"""Synchronous DEC-POMDP episode engine.

All agents observe the same state, then all move at once:
p_i <- p_i + sigma_i * s_max * (cos alpha_i, sin alpha_i). An episode ends
Converged when the largest connected component's bounding radius falls to
conv_radius, or Truncated at the step cutoff. Everything is deterministic
given (initial state, config, controller seed).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .control import Controller, clamp_action
from .errors import ContractViolationError, ControllerError, ScenarioFormatError
from .geometry import SwarmState
from .rewards import RewardConfig, StepReward, global_reward
from .sensing import Observation
from .visibility import adjacency_matrix, component_labels

TRACE_FORMAT_VERSION = 1
CUTOFF_STEPS_PER_AGENT = 150  # 1500 for N=10, 3000 for N=20, 4500 for N=30


class Outcome(str, Enum):
    CONVERGED = "converged"
    TRUNCATED = "truncated"


@dataclass(frozen=True)
class EnvConfig:
    v: float = 50.0
    s_max: float = 0.5
    conv_radius: float = 5.0  # V/10; the gathered-disc radius
    cutoff_steps: int | None = None  # None resolves to 150 * N at reset
    reward: RewardConfig = field(default_factory=RewardConfig)

    def __post_init__(self) -> None:
        if self.v <= 0 or self.s_max <= 0 or self.conv_radius <= 0:
            raise ValueError("v, s_max and conv_radius must be positive")
        if self.conv_radius >= self.v:
            raise ValueError("conv_radius must be smaller than the visibility range")
        if self.cutoff_steps is not None and self.cutoff_steps < 1:
            raise ValueError("cutoff_steps must be >= 1")

    def resolved_cutoff(self, n: int) -> int:
        return self.cutoff_steps if self.cutoff_steps is not None else CUTOFF_STEPS_PER_AGENT * n


@dataclass(frozen=True)
class DoneFlags:
    converged: bool
    truncated: bool

    @property
    def done(self) -> bool:
        return self.converged or self.truncated


@dataclass
class StepRecord:
    t: int
    actions: tuple  # per-agent Action after clamping
    rewards: StepReward
    connected: bool
    largest_component_fraction: float
    d_global: float
    positions: np.ndarray  # post-move, kept so traces are self-contained


@dataclass
class EpisodeResult:
    outcome: Outcome
    steps: int
    connectivity_preserved: bool
    final_gather_fraction: float
    trace: list | None = None
    coincident_drops: int = 0


def _largest_component(positions: np.ndarray, adj: np.ndarray) -> tuple:
    """(is_connected, fraction, bounding radius of the largest component)."""
    labels = component_labels(adj)
    sizes = np.bincount(labels)
    largest = int(sizes.argmax())
    members = positions[labels == largest]
    center = members.mean(axis=0)
    offsets = members - center
    radius = float(np.sqrt((offsets * offsets).sum(axis=1).max()))
    return len(sizes) == 1, sizes[largest] / positions.shape[0], radius


class GatheringEnv:
    """One episode handle; single-threaded, many handles may run in parallel."""

    def __init__(self, initial: SwarmState, cfg: EnvConfig):
        self.cfg = cfg
        self._initial = initial.copy()
        self.cutoff = cfg.resolved_cutoff(initial.n)
        self.coincident_drops = 0
        self.reset()

    @property
    def n(self) -> int:
        return self._initial.n

    @property
    def state(self) -> SwarmState:
        return SwarmState(self._positions.copy(), self._t)

    def reset(self) -> list:
        """Back to the initial constellation; returns per-agent observations."""
        self._positions = self._initial.positions.copy()
        self._t = 0
        self._refresh_geometry()
        self.coincident_drops = 0
        self._done = False
        return self._observations()

    def _refresh_geometry(self) -> None:
        """One pairwise pass per step; everything else reads these caches."""
        diff = self._positions[None, :, :] - self._positions[:, None, :]
        dists = np.sqrt((diff * diff).sum(axis=-1))
        adj = dists <= self.cfg.v
        np.fill_diagonal(adj, False)
        self._diff = diff
        self._dists = dists
        self._adj = adj
        center = self._positions.mean(axis=0)
        offsets = self._positions - center
        self._d_global = float(np.sqrt((offsets * offsets).sum(axis=1).max()))

    def _observations(self) -> list:
        """Per-agent bearings out of the cached pairwise geometry.

        Matches sensing.observe with drop_coincident: bearings to coincident
        neighbors are undefined and get dropped (and counted).
        """
        coincident = self._adj & (self._dists == 0.0)
        self.coincident_drops += int(coincident.sum())
        usable = self._adj & (self._dists > 0.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            unit = self._diff / self._dists[:, :, None]
        return [Observation(unit[i][usable[i]]) for i in range(self.n)]

    def initial_summary(self) -> tuple:
        """(connected, largest fraction, largest-component radius) at t=0."""
        return _largest_component(
            self._initial.positions, adjacency_matrix(self._initial.positions, self.cfg.v)
        )

    def step(self, actions) -> tuple:
        """Apply one synchronous move; returns (obs, rewards, done flags, record)."""
        if self._done:
            raise ContractViolationError("step() called on a finished episode; reset() first")
        if len(actions) != self.n:
            raise ContractViolationError(f"expected {self.n} actions, got {len(actions)}")
        clamped = tuple(clamp_action(a) for a in actions)
        alphas = np.array([a.alpha for a in clamped])
        steps = np.array([a.sigma for a in clamped]) * self.cfg.s_max
        moves = np.stack([steps * np.cos(alphas), steps * np.sin(alphas)], axis=1)

        adj_before = self._adj
        d_before = self._d_global
        self._positions = self._positions + moves
        self._t += 1
        self._refresh_geometry()
        adj_after = self._adj
        d_after = self._d_global

        cfg_r = self.cfg.reward
        if cfg_r.neighbor_loss_mode == "set":
            lost = (adj_before & ~adj_after).sum(axis=1)
        else:
            lost = adj_before.sum(axis=1) - adj_after.sum(axis=1)
        local = tuple(
            cfg_r.p_acc + int(k) * cfg_r.p_ln if k > 0 else cfg_r.p_acc for k in lost
        )
        g = global_reward(d_before, d_after, cfg_r)
        rewards = StepReward(
            local=local,
            global_=tuple([g] * self.n),
            total=tuple(l + g for l in local),
        )

        connected, fraction, largest_radius = _largest_component(self._positions, adj_after)
        converged = largest_radius <= self.cfg.conv_radius
        truncated = (not converged) and self._t >= self.cutoff
        flags = DoneFlags(converged=converged, truncated=truncated)
        self._done = flags.done

        record = StepRecord(
            t=self._t,
            actions=clamped,
            rewards=rewards,
            connected=bool(connected),
            largest_component_fraction=float(fraction),
            d_global=d_after,
            positions=self._positions.copy(),
        )
        return self._observations(), rewards, flags, record


def run_episode(
    initial: SwarmState,
    cfg: EnvConfig,
    controller: Controller,
    record_trace: bool = False,
) -> EpisodeResult:
    """Drive one episode to termination; connectivity is checked every step."""
    env = GatheringEnv(initial, cfg)
    observations = env.reset()
    connected0, fraction0, radius0 = env.initial_summary()
    if radius0 <= cfg.conv_radius:
        return EpisodeResult(
            outcome=Outcome.CONVERGED,
            steps=0,
            connectivity_preserved=bool(connected0),
            final_gather_fraction=float(fraction0),
            trace=[] if record_trace else None,
            coincident_drops=env.coincident_drops,
        )
    trace: list = []
    always_connected = bool(connected0)
    fraction = fraction0
    while True:
        try:
            actions = controller.act_all(observations)
        except Exception as exc:
            raise ControllerError(f"controller failed at step {env.state.t}: {exc}") from exc
        observations, _, flags, record = env.step(actions)
        always_connected = always_connected and record.connected
        fraction = record.largest_component_fraction
        if record_trace:
            trace.append(record)
        if flags.done:
            return EpisodeResult(
                outcome=Outcome.CONVERGED if flags.converged else Outcome.TRUNCATED,
                steps=record.t,
                connectivity_preserved=always_connected,
                final_gather_fraction=float(fraction),
                trace=trace if record_trace else None,
                coincident_drops=env.coincident_drops,
            )


def _record_to_json(record: StepRecord) -> dict:
    return {
        "type": "step",
        "t": record.t,
        "actions": [[a.alpha, a.sigma] for a in record.actions],
        "rewards": {
            "local": list(record.rewards.local),
            "global": list(record.rewards.global_),
            "total": list(record.rewards.total),
        },
        "connected": record.connected,
        "largest_component_fraction": record.largest_component_fraction,
        "d_global": record.d_global,
        "positions": [[float(x), float(y)] for x, y in record.positions],
    }


def write_trace(path, initial: SwarmState, cfg: EnvConfig, result: EpisodeResult) -> None:
    """Episode trace as JSON lines: one header line then one line per step."""
    if result.trace is None:
        raise ContractViolationError("episode was run without record_trace=True")
    header = {
        "type": "header",
        "version": TRACE_FORMAT_VERSION,
        "n": initial.n,
        "v": cfg.v,
        "s_max": cfg.s_max,
        "conv_radius": cfg.conv_radius,
        "cutoff_steps": cfg.resolved_cutoff(initial.n),
        "outcome": result.outcome.value,
        "steps": result.steps,
        "positions": [[float(x), float(y)] for x, y in initial.positions],
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header) + "\n")
        for record in result.trace:
            fh.write(json.dumps(_record_to_json(record)) + "\n")


def read_trace(path) -> tuple:
    """(header dict, list of step dicts) from a trace file."""
    if not os.path.exists(path):
        raise ScenarioFormatError(f"{path}: no such trace file")
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line for line in fh.read().splitlines() if line.strip()]
    if not lines:
        raise ScenarioFormatError(f"{path}: empty trace file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ScenarioFormatError(f"{path}: bad header line: {exc.msg}") from exc
    if header.get("type") != "header":
        raise ScenarioFormatError(f"{path}: first line is not a trace header")
    if header.get("version") != TRACE_FORMAT_VERSION:
        raise ScenarioFormatError(
            f"{path}: unsupported trace version {header.get('version')!r}"
        )
    records = []
    for idx, line in enumerate(lines[1:], start=2):
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ScenarioFormatError(f"{path}:{idx}: bad step line: {exc.msg}") from exc
        if doc.get("type") != "step":
            raise ScenarioFormatError(f"{path}:{idx}: expected a step record")
        records.append(doc)
    return header, records
