"""Reference controllers emitting (alpha, sigma) actions.

The analytical gathering rule: find the smallest circular sector containing
all neighbor bearings; if it spans less than pi, move along the sum of the
two unit vectors at the sector's extremes, otherwise stay put (the agent is
surrounded). The continuous-time law is mapped onto the action space as
alpha = direction(v), sigma = |v| / 2, so a lone neighbor gives sigma = 1 and
an almost-surrounded agent barely moves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .sensing import Observation


@dataclass(frozen=True)
class Action:
    alpha: float  # heading, radians in (-pi, pi]
    sigma: float  # step fraction in [0, 1]


@dataclass(frozen=True)
class SectorResult:
    span: float  # radians in [0, 2*pi)
    extreme_a: float  # bearing angle bounding the largest gap
    extreme_b: float


def wrap_angle(angle: float) -> float:
    """Wrap into (-pi, pi]. Heading is periodic, so wrapping preserves it."""
    wrapped = math.remainder(angle, 2.0 * math.pi)
    if wrapped <= -math.pi:
        wrapped += 2.0 * math.pi
    return wrapped


def clamp_action(action: Action) -> Action:
    """Normalize an arbitrary (alpha, sigma) into the action space bounds."""
    return Action(wrap_angle(action.alpha), min(max(action.sigma, 0.0), 1.0))


def smallest_sector(observation: Observation) -> SectorResult:
    """Smallest circular sector containing every bearing.

    Sorts bearing angles, finds the largest gap between circularly
    consecutive angles; the sector is the complement of that gap and its
    extremes are the two bearings bounding it. Ties in gap size are broken by
    the lower sorted index. Plain-float math: this runs once per agent per
    step on at most a few dozen bearings.
    """
    k = len(observation)
    if k == 0:
        raise ValueError("smallest_sector needs at least one bearing")
    angles = sorted(math.atan2(y, x) for x, y in observation.bearings.tolist())
    if k == 1:
        return SectorResult(span=0.0, extreme_a=angles[0], extreme_b=angles[0])
    widest = 0
    widest_gap = -1.0
    for idx in range(k):
        if idx < k - 1:
            gap = angles[idx + 1] - angles[idx]
        else:
            gap = angles[0] + 2.0 * math.pi - angles[-1]
        if gap > widest_gap:
            widest_gap = gap
            widest = idx
    span = 2.0 * math.pi - widest_gap
    return SectorResult(
        span=span, extreme_a=angles[(widest + 1) % k], extreme_b=angles[widest]
    )


def analytical_action(observation: Observation) -> Action:
    """Smallest-sector gathering rule in (alpha, sigma) form."""
    if len(observation) == 0:
        return Action(0.0, 0.0)
    sector = smallest_sector(observation)
    if sector.span >= math.pi:
        return Action(0.0, 0.0)
    vx = math.cos(sector.extreme_a) + math.cos(sector.extreme_b)
    vy = math.sin(sector.extreme_a) + math.sin(sector.extreme_b)
    speed = math.hypot(vx, vy)
    if speed == 0.0:
        return Action(0.0, 0.0)
    return Action(math.atan2(vy, vx), min(speed / 2.0, 1.0))


def stationary_action() -> Action:
    return Action(0.0, 0.0)


def random_action(rng: np.random.Generator) -> Action:
    """Uniform alpha in (-pi, pi], uniform sigma in [0, 1]."""
    alpha = math.pi - rng.uniform(0.0, 2.0 * math.pi)
    return Action(alpha, float(rng.uniform(0.0, 1.0)))


class Controller:
    """Per-agent observation -> action policy driving an episode."""

    def act(self, observation: Observation) -> Action:
        raise NotImplementedError

    def act_all(self, observations) -> list:
        return [self.act(obs) for obs in observations]


class AnalyticalController(Controller):
    def act(self, observation: Observation) -> Action:
        return analytical_action(observation)


class StationaryController(Controller):
    def act(self, observation: Observation) -> Action:
        return stationary_action()


class RandomController(Controller):
    def __init__(self, seed: int = 0):
        self._rng = np.random.default_rng(seed)

    def act(self, observation: Observation) -> Action:
        return random_action(self._rng)
