"""Seeded generation and serialization of connected initial constellations.

Difficulty is controlled by the effective visibility V_eff = V * VR used
during placement: agents are placed sequentially and each new agent is
re-drawn until it lands within V_eff of at least one already-placed agent,
which guarantees connectivity under V_eff (and therefore under V).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import GenerationError, ScenarioFormatError
from .geometry import SwarmState

SCENARIO_FORMAT_VERSION = 1
MAX_REJECTIONS_PER_AGENT = 10_000


@dataclass(frozen=True)
class ConstellationSpec:
    n_agents: int
    visibility: float = 50.0
    visibility_ratio: float = 0.75
    seed: int = 0
    min_separation: float = 1.0

    def __post_init__(self) -> None:
        if self.n_agents < 1:
            raise ValueError(f"n_agents must be >= 1, got {self.n_agents}")
        if not 0.0 < self.visibility_ratio <= 1.0:
            raise ValueError(f"visibility_ratio must be in (0, 1], got {self.visibility_ratio}")
        if self.visibility <= 0.0:
            raise ValueError(f"visibility must be positive, got {self.visibility}")
        if self.min_separation < 0.0:
            raise ValueError(f"min_separation must be >= 0, got {self.min_separation}")
        if self.v_eff <= self.min_separation:
            raise ValueError(
                f"V_eff={self.v_eff} must exceed min_separation={self.min_separation}"
            )
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")

    @property
    def v_eff(self) -> float:
        return self.visibility * self.visibility_ratio


def generate(spec: ConstellationSpec) -> SwarmState:
    """Place agents sequentially, each within V_eff of an earlier one.

    The first agent sits at the origin (the absolute offset is irrelevant by
    translation invariance). Candidates are drawn uniformly from the bounding
    box of the placed agents expanded by V_eff on all sides and rejected until
    they are within V_eff of some placed agent and at least min_separation
    from every placed agent. Deterministic for a fixed seed.
    """
    rng = np.random.default_rng(spec.seed)
    v_eff = spec.v_eff
    placed = np.zeros((spec.n_agents, 2), dtype=np.float64)
    for k in range(1, spec.n_agents):
        lo = placed[:k].min(axis=0) - v_eff
        hi = placed[:k].max(axis=0) + v_eff
        for _ in range(MAX_REJECTIONS_PER_AGENT):
            candidate = rng.uniform(lo, hi)
            diff = placed[:k] - candidate
            dists = np.sqrt((diff * diff).sum(axis=1))
            if dists.min() >= spec.min_separation and (dists <= v_eff).any():
                placed[k] = candidate
                break
        else:
            raise GenerationError(
                f"failed to place agent {k} after {MAX_REJECTIONS_PER_AGENT} rejections "
                f"(n={spec.n_agents}, V_eff={v_eff}, min_separation={spec.min_separation})"
            )
    return SwarmState(placed, t=0)


def save(state: SwarmState, spec: ConstellationSpec, path) -> None:
    """Write a scenario file; floats keep full round-trip precision."""
    doc = {
        "version": SCENARIO_FORMAT_VERSION,
        "n": spec.n_agents,
        "V": spec.visibility,
        "VR": spec.visibility_ratio,
        "seed": spec.seed,
        "min_separation": spec.min_separation,
        "positions": [[float(x), float(y)] for x, y in state.positions],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load(path) -> tuple:
    """Read a scenario file back as (SwarmState, ConstellationSpec)."""
    if not os.path.exists(path):
        raise ScenarioFormatError(f"{path}: no such scenario file")
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    if not text.strip():
        raise ScenarioFormatError(f"{path}: empty scenario file")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioFormatError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(doc, dict):
        raise ScenarioFormatError(f"{path}: top level must be an object")
    version = doc.get("version")
    if version != SCENARIO_FORMAT_VERSION:
        raise ScenarioFormatError(
            f"{path}: unsupported scenario version {version!r} "
            f"(expected {SCENARIO_FORMAT_VERSION})"
        )
    for field_name in ("n", "V", "VR", "seed", "min_separation", "positions"):
        if field_name not in doc:
            raise ScenarioFormatError(f"{path}: missing field {field_name!r}")
    try:
        spec = ConstellationSpec(
            n_agents=int(doc["n"]),
            visibility=float(doc["V"]),
            visibility_ratio=float(doc["VR"]),
            seed=int(doc["seed"]),
            min_separation=float(doc["min_separation"]),
        )
    except (TypeError, ValueError) as exc:
        raise ScenarioFormatError(f"{path}: bad spec field: {exc}") from exc
    positions = doc["positions"]
    if not isinstance(positions, list) or len(positions) != spec.n_agents:
        raise ScenarioFormatError(
            f"{path}: positions must list exactly n={spec.n_agents} [x, y] pairs"
        )
    try:
        array = np.asarray(positions, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ScenarioFormatError(f"{path}: positions must be numeric pairs: {exc}") from exc
    if array.shape != (spec.n_agents, 2):
        raise ScenarioFormatError(f"{path}: positions have shape {array.shape}")
    return SwarmState(array, t=0), spec
