"""Positions, distances, bearings, and swarm-level geometric statistics.

World coordinates are double-precision and unitless. Agent identity is the
positional index into a state's position array; it never changes within an
episode.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolationError, DegenerateBearingError

Position = np.ndarray  # shape (2,), float64
UnitBearing = np.ndarray  # shape (2,), float64, unit norm


def as_position(p) -> Position:
    pos = np.asarray(p, dtype=np.float64)
    if pos.shape != (2,):
        raise ContractViolationError(f"position must have shape (2,), got {pos.shape}")
    if not np.all(np.isfinite(pos)):
        raise ContractViolationError(f"position must be finite, got {pos}")
    return pos


@dataclass
class SwarmState:
    """Positions of all agents plus the step index.

    ``positions`` has shape (N, 2); row i is agent i.
    """

    positions: np.ndarray
    t: int = 0

    def __post_init__(self) -> None:
        self.positions = np.asarray(self.positions, dtype=np.float64)
        if self.positions.ndim != 2 or self.positions.shape[1] != 2:
            raise ContractViolationError(
                f"positions must have shape (N, 2), got {self.positions.shape}"
            )
        if self.positions.shape[0] < 1:
            raise ContractViolationError("swarm needs at least one agent")
        if not np.all(np.isfinite(self.positions)):
            raise ContractViolationError("positions must be finite")
        if self.t < 0:
            raise ContractViolationError(f"step index must be >= 0, got {self.t}")

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    def copy(self) -> "SwarmState":
        return SwarmState(self.positions.copy(), self.t)


def distance(a, b) -> float:
    """Euclidean distance between two positions."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return float(np.hypot(b[0] - a[0], b[1] - a[1]))


def bearing(from_pos, to_pos) -> UnitBearing:
    """Unit vector pointing from ``from_pos`` toward ``to_pos``.

    Raises DegenerateBearingError for coincident points; a bearing between
    coincident agents is undefined and the caller decides how to handle it.
    """
    from_pos = np.asarray(from_pos, dtype=np.float64)
    to_pos = np.asarray(to_pos, dtype=np.float64)
    delta = to_pos - from_pos
    norm = float(np.hypot(delta[0], delta[1]))
    if norm == 0.0:
        raise DegenerateBearingError(f"coincident points at {from_pos}")
    return delta / norm


def swarm_center(state: SwarmState) -> Position:
    """Arithmetic mean of all agent positions."""
    return state.positions.mean(axis=0)


def bounding_radius(state: SwarmState) -> float:
    """Max distance of any agent from the swarm center; 0 iff all coincide."""
    center = state.positions.mean(axis=0)
    offsets = state.positions - center
    return float(np.sqrt((offsets * offsets).sum(axis=1).max()))


def pairwise_distances(positions: np.ndarray) -> np.ndarray:
    """(N, N) matrix of Euclidean distances; zero diagonal."""
    diff = positions[:, None, :] - positions[None, :, :]
    return np.sqrt((diff * diff).sum(axis=-1))
