"""Neighbor sets, the visibility graph, and connectivity detection.

An edge (i, j) exists iff distance(p_i, p_j) <= V with i != j; the boundary
distance exactly V is included (the inequality is non-strict). Graphs are
rebuilt from scratch each step; with N <= 30 in all experiments a brute-force
pair scan is the right tool.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import SwarmState, pairwise_distances


@dataclass(frozen=True)
class VisibilityGraph:
    n: int
    edges: frozenset  # of (i, j) tuples with i < j


@dataclass(frozen=True)
class ComponentPartition:
    labels: tuple  # per-agent component id, 0-based in order of first appearance
    component_sizes: tuple


def adjacency_matrix(positions: np.ndarray, v: float) -> np.ndarray:
    """Boolean (N, N) adjacency under visibility v; false diagonal."""
    dists = pairwise_distances(positions)
    adj = dists <= v
    np.fill_diagonal(adj, False)
    return adj


def neighbor_set(state: SwarmState, i: int, v: float) -> set:
    """Ids of agents within distance v of agent i (excluding i itself)."""
    if not 0 <= i < state.n:
        raise IndexError(f"agent id {i} out of range for swarm of {state.n}")
    if v <= 0:
        raise ValueError(f"visibility must be positive, got {v}")
    diff = state.positions - state.positions[i]
    dists = np.sqrt((diff * diff).sum(axis=1))
    mask = dists <= v
    mask[i] = False
    return set(np.flatnonzero(mask).tolist())


def build_graph(state: SwarmState, v: float) -> VisibilityGraph:
    if v <= 0:
        raise ValueError(f"visibility must be positive, got {v}")
    adj = adjacency_matrix(state.positions, v)
    ii, jj = np.nonzero(np.triu(adj, k=1))
    edges = frozenset(zip(ii.tolist(), jj.tolist()))
    return VisibilityGraph(n=state.n, edges=edges)


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def components(graph: VisibilityGraph) -> ComponentPartition:
    """Connected components; labels numbered by first appearance (agent order)."""
    uf = _UnionFind(graph.n)
    for i, j in graph.edges:
        uf.union(i, j)
    label_of_root: dict = {}
    labels = []
    for i in range(graph.n):
        root = uf.find(i)
        if root not in label_of_root:
            label_of_root[root] = len(label_of_root)
        labels.append(label_of_root[root])
    sizes = [0] * len(label_of_root)
    for lab in labels:
        sizes[lab] += 1
    return ComponentPartition(labels=tuple(labels), component_sizes=tuple(sizes))


def is_connected(graph: VisibilityGraph) -> bool:
    return len(components(graph).component_sizes) == 1


def component_labels(adj: np.ndarray) -> np.ndarray:
    """Component labels straight from a boolean adjacency matrix.

    Fast path used every engine step: boolean transitive closure by repeated
    squaring (at most log2(diameter) tiny matmuls), then each agent's label
    is its smallest reachable agent id, renumbered by first appearance.
    Equivalent to components(build_graph(...)).labels.
    """
    reach = adj.astype(np.uint8)
    np.fill_diagonal(reach, 1)
    while True:
        squared = ((reach @ reach) > 0).astype(np.uint8)
        if np.array_equal(squared, reach):
            break
        reach = squared
    min_reach = reach.argmax(axis=1)
    # each component's smallest id is its own earliest member, so ascending
    # min-id order is first-appearance order
    _, labels = np.unique(min_reach, return_inverse=True)
    return labels
