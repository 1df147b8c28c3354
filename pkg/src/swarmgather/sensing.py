"""Bearing-only observations and their 75x75 binary rasterization.

Sensing is bearing-only, so distance cannot be encoded: every visible
neighbor is drawn as a 3x3 block on a fixed ring of radius 35 pixels around
the center pixel (37, 37), the largest radius that keeps all blocks strictly
inside the grid. Agents share a compass: the local frame is axis-aligned with
the world frame, y-up maps to decreasing row index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolationError, DegenerateBearingError
from .geometry import SwarmState

IMAGE_SIZE = 75
CENTER_PIXEL = 37
RING_RADIUS = 35
BLOCK_HALF = 1  # 3x3 blocks
PACKED_BYTES_PER_ROW = 10
PACKED_IMAGE_BYTES = IMAGE_SIZE * PACKED_BYTES_PER_ROW  # 750


@dataclass
class Observation:
    """Multiset of unit bearings, one per visible neighbor; order carries no meaning."""

    bearings: np.ndarray  # shape (k, 2), float64, unit rows

    def __post_init__(self) -> None:
        self.bearings = np.asarray(self.bearings, dtype=np.float64).reshape(-1, 2)

    def __len__(self) -> int:
        return self.bearings.shape[0]


def observe(state: SwarmState, i: int, v: float, drop_coincident: bool = False):
    """Unit bearings from agent i to every neighbor within distance v.

    A coincident neighbor has no defined bearing: by default that raises
    DegenerateBearingError; with drop_coincident the pair is omitted from the
    observation and the number of dropped neighbors is returned alongside.

    Returns Observation, or (Observation, dropped_count) when drop_coincident.
    """
    if not 0 <= i < state.n:
        raise IndexError(f"agent id {i} out of range for swarm of {state.n}")
    diff = state.positions - state.positions[i]
    dists = np.sqrt((diff * diff).sum(axis=1))
    visible = dists <= v
    visible[i] = False
    coincident = visible & (dists == 0.0)
    dropped = int(coincident.sum())
    if dropped and not drop_coincident:
        raise DegenerateBearingError(
            f"agent {i} has {dropped} coincident neighbor(s); bearing undefined"
        )
    usable = visible & (dists > 0.0)
    obs = Observation(diff[usable] / dists[usable, None])
    if drop_coincident:
        return obs, dropped
    return obs


def observe_all(state: SwarmState, v: float, drop_coincident: bool = False):
    """Per-agent observations for the whole swarm.

    Returns list[Observation], or (list[Observation], total_dropped) when
    drop_coincident.
    """
    if drop_coincident:
        results = [observe(state, i, v, drop_coincident=True) for i in range(state.n)]
        return [obs for obs, _ in results], sum(d for _, d in results)
    return [observe(state, i, v) for i in range(state.n)]


def _round_half_away(x: float) -> int:
    # Fixed rounding rule for cross-platform bit-exact images.
    return int(np.floor(x + 0.5)) if x >= 0 else int(np.ceil(x - 0.5))


def project(bearing) -> tuple:
    """Map a unit bearing to its (row, col) center pixel on the ring."""
    ux, uy = float(bearing[0]), float(bearing[1])
    row = CENTER_PIXEL - _round_half_away(RING_RADIUS * uy)
    col = CENTER_PIXEL + _round_half_away(RING_RADIUS * ux)
    return row, col


def rasterize(observation: Observation) -> np.ndarray:
    """Binary 75x75 image: one 3x3 block per bearing, overlaps merged by OR."""
    image = np.zeros((IMAGE_SIZE, IMAGE_SIZE), dtype=np.uint8)
    for k in range(len(observation)):
        row, col = project(observation.bearings[k])
        image[row - BLOCK_HALF : row + BLOCK_HALF + 1, col - BLOCK_HALF : col + BLOCK_HALF + 1] = 1
    return image


def pack_image(image: np.ndarray) -> bytes:
    """75x75 bits row-major, each row padded to 10 bytes, MSB-first."""
    if image.shape != (IMAGE_SIZE, IMAGE_SIZE):
        raise ContractViolationError(f"expected {IMAGE_SIZE}x{IMAGE_SIZE} image, got {image.shape}")
    return np.packbits(image.astype(np.uint8), axis=1).tobytes()


def unpack_image(payload: bytes) -> np.ndarray:
    if len(payload) != PACKED_IMAGE_BYTES:
        raise ContractViolationError(
            f"packed image must be {PACKED_IMAGE_BYTES} bytes, got {len(payload)}"
        )
    rows = np.frombuffer(payload, dtype=np.uint8).reshape(IMAGE_SIZE, PACKED_BYTES_PER_ROW)
    return np.unpackbits(rows, axis=1)[:, :IMAGE_SIZE]
