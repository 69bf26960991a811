"""Post-processing of finite-element runs: crack connectivity and hysteresis."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .fem import Mesh


def node_graph(mesh: Mesh, keep: np.ndarray) -> sp.csr_matrix:
    """Adjacency of the kept nodes along element edges."""
    e = mesh.elements
    pairs = np.concatenate([e[:, [0, 1]], e[:, [1, 2]], e[:, [2, 3]], e[:, [3, 0]]])
    pairs = pairs[keep[pairs[:, 0]] & keep[pairs[:, 1]]]
    n = mesh.n_nodes
    return sp.coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n)).tocsr()


def band_connects(mesh: Mesh, alpha: np.ndarray, set_a: str, set_b: str, threshold: float = 0.95) -> bool:
    """True when nodes with ``alpha >= threshold`` form a path from one node
    set to the other (an edge-connected chain of broken nodes)."""
    keep = np.asarray(alpha) >= threshold
    a, b = mesh.node_set(set_a), mesh.node_set(set_b)
    a, b = a[keep[a]], b[keep[b]]
    if a.size == 0 or b.size == 0:
        return False
    _, labels = connected_components(node_graph(mesh, keep), directed=False)
    return bool(np.intersect1d(labels[a], labels[b]).size)


def cycle_peaks(step: np.ndarray, reaction: np.ndarray, steps_per_cycle: int) -> np.ndarray:
    """Largest ``|reaction|`` in each complete cycle (step 0 excluded)."""
    step = np.asarray(step, dtype=int)
    reaction = np.abs(np.asarray(reaction, dtype=float))
    n = int(step.max()) // steps_per_cycle
    cyc = (step - 1) // steps_per_cycle
    return np.array([reaction[(cyc == c) & (step > 0)].max() for c in range(n)])


def first_cycle_where(step: np.ndarray, flag: np.ndarray, steps_per_cycle: int) -> int | None:
    """1-based cycle of the first step with ``flag`` set."""
    idx = np.flatnonzero(np.asarray(flag) & (np.asarray(step) > 0))
    if idx.size == 0:
        return None
    return int((int(step[idx[0]]) - 1) // steps_per_cycle + 1)
