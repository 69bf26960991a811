import numpy as np
import scipy.sparse.csgraph as csg
from hypothesis import given, strategies as st

from fatigue_pf import analysis, io


def test_band_along_a_row_connects_left_and_right():
    m = io.unit_square(4)
    alpha = np.zeros(m.n_nodes)
    row = np.flatnonzero(np.isclose(m.nodes[:, 1], 0.5))
    alpha[row] = 1.0
    assert analysis.band_connects(m, alpha, "left", "right")
    alpha[row[2]] = 0.9
    assert not analysis.band_connects(m, alpha, "left", "right")
    assert analysis.band_connects(m, alpha, "left", "right", threshold=0.9)


def test_diagonal_only_contact_does_not_connect():
    m = io.unit_square(2)
    alpha = np.zeros(m.n_nodes)
    # (0,0), (0.5,0.5), (1,1) touch only across element diagonals
    for x in (0.0, 0.5, 1.0):
        alpha[np.flatnonzero(np.isclose(m.nodes[:, 0], x) & np.isclose(m.nodes[:, 1], x))] = 1.0
    assert not analysis.band_connects(m, alpha, "bottom", "top")


@given(st.lists(st.booleans(), min_size=36, max_size=36))
def test_band_connects_matches_dense_graph_search(mask):
    m = io.unit_square(5)
    keep = np.array(mask)
    alpha = keep.astype(float)
    # oracle: Floyd-Warshall reachability on the dense adjacency
    n = m.n_nodes
    adj = np.zeros((n, n))
    for e in m.elements:
        for a, b in zip(e, np.roll(e, -1)):
            if keep[a] and keep[b]:
                adj[a, b] = adj[b, a] = 1.0
    dist = csg.floyd_warshall(adj, directed=False, unweighted=True)
    a = [i for i in m.node_set("left") if keep[i]]
    b = [i for i in m.node_set("right") if keep[i]]
    expect = any(np.isfinite(dist[i, j]) for i in a for j in b)
    assert analysis.band_connects(m, alpha, "left", "right", 0.5) == expect


def test_cycle_peaks_and_first_cycle():
    spc = 8
    step = np.arange(3 * spc + 1)
    reaction = np.sin(2 * np.pi * step / spc) * np.array([3.0] * 9 + [2.0] * 8 + [1.0] * 8)
    peaks = analysis.cycle_peaks(step, reaction, spc)
    assert np.allclose(peaks, [3.0, 2.0, 1.0])
    flag = step >= 10
    assert analysis.first_cycle_where(step, flag, spc) == 2
    assert analysis.first_cycle_where(step, step > 100, spc) is None
    assert analysis.first_cycle_where(step, step == 8, spc) == 1
