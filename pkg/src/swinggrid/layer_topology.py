"""Control-layer topologies: ER random graphs and the derived
generator-local and generator-clique ("extended") variants.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

# RNG scheme identifier written into run manifests. Edges are drawn with one
# uniform per unordered pair, iterated row-major over i < j, from a PCG64
# stream, so a published seed reproduces the layer bit-exactly anywhere.
ER_RNG_SCHEME = "pcg64-pairs-rowmajor-v1"


@dataclass
class ControlLayer:
    """Symmetric binary adjacency + pinning mask + non-negative gain."""

    adjacency: np.ndarray  # (N, N) with entries in {0, 1}, zero diagonal
    pinning: np.ndarray  # (N,) with entries in {0, 1}
    gain: float

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Edges as (i, j) index arrays with i < j, row-major order."""
        i_idx, j_idx = np.nonzero(np.triu(self.adjacency, k=1))
        return i_idx.astype(np.int64), j_idx.astype(np.int64)

    def with_gain(self, gain: float) -> "ControlLayer":
        return ControlLayer(self.adjacency, self.pinning, gain)


def _check_base(base: np.ndarray) -> np.ndarray:
    base = np.asarray(base)
    if base.ndim != 2 or base.shape[0] != base.shape[1]:
        raise ValueError("adjacency must be a square matrix")
    if not np.array_equal(base, base.T):
        raise ValueError("adjacency must be symmetric")
    if np.any(np.diagonal(base) != 0):
        raise ValueError("adjacency must have zero diagonal")
    return base


def derive_local(base: np.ndarray, generators: set[int]) -> np.ndarray:
    """Keep only base edges with at least one generator endpoint."""
    base = _check_base(base)
    n = base.shape[0]
    if any(g < 0 or g >= n for g in generators):
        raise ValueError("generator id out of range")
    mask = np.zeros(n, dtype=bool)
    mask[list(generators)] = True
    keep = mask[:, None] | mask[None, :]
    return np.where(keep, base, 0).astype(np.int8)


def derive_extended(base: np.ndarray, generators: set[int]) -> np.ndarray:
    """Generator-local edges plus a clique over all generator pairs."""
    local = derive_local(base, generators)
    n = local.shape[0]
    mask = np.zeros(n, dtype=bool)
    mask[list(generators)] = True
    clique = mask[:, None] & mask[None, :]
    out = np.where(clique, 1, local).astype(np.int8)
    np.fill_diagonal(out, 0)
    return out


def gen_er(n: int, p: float, seed: int) -> np.ndarray:
    """Erdos-Renyi G(n, p) adjacency; same (n, p, seed) always gives the
    same matrix (see ER_RNG_SCHEME)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not (0.0 <= p <= 1.0):
        raise ValueError("p must be in [0, 1]")
    rng = np.random.Generator(np.random.PCG64(seed))
    iu, ju = np.triu_indices(n, k=1)
    draws = rng.random(iu.size)  # row-major over i < j
    a = np.zeros((n, n), dtype=np.int8)
    hit = draws < p
    a[iu[hit], ju[hit]] = 1
    a[ju[hit], iu[hit]] = 1
    return a


def validate_layer(layer: ControlLayer, n: int) -> list[str]:
    """Return all violations of the layer invariants for an N-node grid."""
    violations: list[str] = []
    a = layer.adjacency
    if a.shape != (n, n):
        violations.append(f"adjacency shape {a.shape} does not match N={n}")
        return violations
    if not np.array_equal(a, a.T):
        violations.append("adjacency is not symmetric")
    if np.any(np.diagonal(a) != 0):
        violations.append("adjacency has nonzero diagonal entries")
    if not np.all(np.isin(a, (0, 1))):
        violations.append("adjacency entries must be 0 or 1")
    if layer.pinning.shape != (n,):
        violations.append(f"pinning shape {layer.pinning.shape} does not match N={n}")
    elif not np.all(np.isin(layer.pinning, (0, 1))):
        violations.append("pinning entries must be 0 or 1")
    if layer.gain < 0:
        violations.append(f"gain must be >= 0 (got {layer.gain})")
    return violations


def component_count(adjacency: np.ndarray) -> int:
    """Connected-component count; a fragmented control layer is legal but
    usually unwanted, so this is exposed as a diagnostic."""
    n_comp, _ = connected_components(csr_matrix(adjacency), directed=False)
    return int(n_comp)
