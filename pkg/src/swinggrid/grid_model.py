"""Physical-layer data model: nodes, lines, and structural validation.

The grid is a simple undirected graph. Generators inject power (P > 0),
loads absorb it (P < 0). Each line carries a coupling strength K and a
capacity fraction alpha; the line trips when |flow| exceeds alpha * K.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class NodeKind(Enum):
    GENERATOR = "generator"
    LOAD = "load"


class LineStatus(Enum):
    ACTIVE = 0
    TRIPPED_OVERLOAD = 1
    REMOVED_BY_NODE_FAULT = 2


@dataclass(frozen=True)
class GridNode:
    id: int
    kind: NodeKind
    power: float
    inertia: float
    damping: float


@dataclass(frozen=True)
class GridLine:
    i: int
    j: int
    coupling: float
    capacity_fraction: float

    @property
    def capacity(self) -> float:
        return self.capacity_fraction * self.coupling

    @property
    def endpoints(self) -> tuple[int, int]:
        return (self.i, self.j) if self.i < self.j else (self.j, self.i)


@dataclass
class PowerGrid:
    """Immutable physical layer. Mutable line status lives in SimState."""

    nodes: list[GridNode]
    lines: list[GridLine]

    # cached arrays, built lazily
    _arrays: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_lines(self) -> int:
        return len(self.lines)

    @property
    def generator_ids(self) -> list[int]:
        return [n.id for n in self.nodes if n.kind is NodeKind.GENERATOR]

    @property
    def n_generators(self) -> int:
        return len(self.generator_ids)

    def arrays(self) -> dict[str, np.ndarray]:
        """Node/line parameters as contiguous float64/int64 arrays."""
        if not self._arrays:
            self._arrays = {
                "power": np.array([n.power for n in self.nodes], dtype=np.float64),
                "inertia": np.array([n.inertia for n in self.nodes], dtype=np.float64),
                "damping": np.array([n.damping for n in self.nodes], dtype=np.float64),
                "line_i": np.array([min(l.i, l.j) for l in self.lines], dtype=np.int64),
                "line_j": np.array([max(l.i, l.j) for l in self.lines], dtype=np.int64),
                "line_k": np.array([l.coupling for l in self.lines], dtype=np.float64),
                "line_cap": np.array([l.capacity for l in self.lines], dtype=np.float64),
            }
        return self._arrays

    def adjacency(self) -> np.ndarray:
        """Binary adjacency matrix of the physical layer."""
        a = np.zeros((self.n_nodes, self.n_nodes), dtype=np.int8)
        for line in self.lines:
            a[line.i, line.j] = 1
            a[line.j, line.i] = 1
        return a


def validate(grid: PowerGrid) -> list[str]:
    """Return all structural violations; an empty list means the grid is valid."""
    violations: list[str] = []
    n = grid.n_nodes
    for idx, node in enumerate(grid.nodes):
        if node.id != idx:
            violations.append(f"node at position {idx} has id {node.id}; ids must be 0..N-1 in order")
        if node.inertia <= 0:
            violations.append(f"node {node.id}: inertia must be > 0 (got {node.inertia})")
        if node.damping <= 0:
            violations.append(f"node {node.id}: damping must be > 0 (got {node.damping})")
        if node.kind is NodeKind.GENERATOR and node.power <= 0:
            violations.append(f"node {node.id}: generator power must be > 0 (got {node.power})")
        if node.kind is NodeKind.LOAD and node.power >= 0:
            violations.append(f"node {node.id}: load power must be < 0 (got {node.power})")

    seen_pairs: set[tuple[int, int]] = set()
    for k, line in enumerate(grid.lines):
        if not (0 <= line.i < n) or not (0 <= line.j < n):
            violations.append(f"line {k}: endpoint out of range ({line.i}, {line.j}) for N={n}")
            continue
        if line.i == line.j:
            violations.append(f"line {k}: self-loop at node {line.i}")
            continue
        if line.coupling < 0:
            violations.append(f"line {k}: coupling must be >= 0 (got {line.coupling})")
        if not (0.0 <= line.capacity_fraction <= 1.0):
            violations.append(
                f"line {k}: capacity fraction must be in [0, 1] (got {line.capacity_fraction})"
            )
        pair = line.endpoints
        if pair in seen_pairs:
            violations.append(f"line {k}: duplicate line for node pair {pair}")
        seen_pairs.add(pair)
    return violations


def power_imbalance(grid: PowerGrid, exclude_nodes: set[int] | frozenset[int] = frozenset()) -> float:
    """Sum of node powers; pass removed node ids to exclude them from the sum."""
    return float(sum(n.power for n in grid.nodes if n.id not in exclude_nodes))
