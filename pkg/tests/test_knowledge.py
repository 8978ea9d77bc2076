import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uavjcas.knowledge import (
    CommGraph,
    build_comm_graph,
    detection_round,
    informed_status,
    propagate,
)
from uavjcas.phy import JcasParams

from oracles.graph_oracle import component_or_oracle

P = JcasParams()
D = 50.0
# from tests/oracles/link_budget_oracle.py: comm SNR falls to 10 dB at 651.9 m (13.04 cells)
EDGE_CELLS = 651.90279842732045659 / D


def graph_from_adjacency(adj: np.ndarray) -> CommGraph:
    return CommGraph(adjacency=adj, pairwise_snr_db=np.zeros(adj.shape))


@st.composite
def graphs_and_knowledge(draw):
    n = draw(st.integers(1, 20))
    m = draw(st.integers(0, 6))
    upper = draw(st.lists(st.booleans(), min_size=n * n, max_size=n * n))
    adj = np.triu(np.array(upper, dtype=bool).reshape(n, n), 1)
    adj = adj | adj.T
    bits = draw(st.lists(st.booleans(), min_size=n * m, max_size=n * m))
    return adj, np.array(bits, dtype=bool).reshape(n, m)


# ----------------------------------------------------------------- graph
def test_colocated_uavs_fully_connected():
    g = build_comm_graph(np.array([[3, 3]] * 4), D, P)
    assert g.adjacency.sum() == 4 * 3
    assert not g.adjacency.diagonal().any()


def test_edge_threshold_distance():
    near = int(np.floor(EDGE_CELLS))
    g = build_comm_graph(np.array([[0, 0], [near, 0], [near + 1, 0]]), D, P)
    assert g.adjacency[0, 1] and not g.adjacency[0, 2]
    assert g.adjacency[1, 2]
    assert g.pairwise_snr_db[0, 2] < 10.0 <= g.pairwise_snr_db[0, 1]


def test_single_uav_graph_empty():
    g = build_comm_graph(np.array([[2, 2]]), D, P)
    assert g.adjacency.shape == (1, 1) and not g.adjacency.any()


def test_inactive_uavs_get_no_edges():
    g = build_comm_graph(np.array([[0, 0], [0, 1], [1, 0]]), D, P, active=np.array([True, False, True]))
    assert not g.adjacency[1].any() and not g.adjacency[:, 1].any()
    assert g.adjacency[0, 2]


def test_graph_symmetric_and_thresholded():
    rng = np.random.default_rng(0)
    cells = rng.integers(0, 30, size=(12, 2))
    g = build_comm_graph(cells, D, P)
    assert np.array_equal(g.adjacency, g.adjacency.T)
    off = ~np.eye(12, dtype=bool)
    assert np.array_equal(g.adjacency[off], (g.pairwise_snr_db >= P.comm_edge_snr_db)[off])


# ------------------------------------------------------------- detection
def _round(cells, targets, theta, seed=0, pilot=0.30, active=None, detected=None, det=False):
    cells = np.asarray(cells)
    n = len(cells)
    return detection_round(
        cells, np.asarray(targets), np.zeros(len(targets), bool) if detected is None else detected,
        np.full(n, pilot), np.ones(n, bool) if active is None else active, D, P, theta,
        np.random.default_rng(seed), deterministic=det,
    )


def test_three_colocated_agents_confirm_with_high_probability():
    # oracle: p(10 m, load 0.7)^3 = 0.999998303
    hits = sum(_round([[5, 5]] * 3, [[5, 5]], 3, seed=s).newly_detected[0] for s in range(2000))
    assert hits / 2000 > 0.99


def test_two_in_range_never_confirm_with_theta_three():
    # two agents on the hotspot, two more 60 cells away where p is below 1e-6
    cells = np.array([[0, 0], [0, 0], [60, 60], [60, 61]])
    for s in range(500):
        r = detection_round(cells, np.array([[0, 0]]), np.zeros(1, bool), np.full(4, 0.30),
                            np.ones(4, bool), D, P, 3, np.random.default_rng(s))
        assert r.probabilities[2:, 0].max() < 1e-6
        assert not r.newly_detected[0]


def test_midpoint_probability_frequency():
    params = JcasParams(jcas_penalty_db_per_load=0.0)
    # one agent exactly at the reference range (3 cells), zero penalty: p = 0.5
    hits = 0
    for s in range(10_000):
        r = detection_round(np.array([[0, 0]]), np.array([[3, 0]]), np.zeros(1, bool), np.array([0.3]),
                            np.ones(1, bool), D, params, 1, np.random.default_rng(s))
        assert r.probabilities[0, 0] == pytest.approx(0.5, abs=1e-12)
        hits += r.newly_detected[0]
    assert abs(hits / 10_000 - 0.5) < 0.02


def test_inert_agents_never_detect_and_detected_stay_detected():
    r = _round([[5, 5]] * 3, [[5, 5], [6, 5]], 1, active=np.array([True, False, True]),
               detected=np.array([True, False]), det=True)
    assert not r.local[1].any()
    assert not r.local[:, 0].any() and not r.newly_detected[0]
    assert r.newly_detected[1]


def test_detection_reproducible():
    a = _round([[0, 0], [1, 2], [3, 1]], [[2, 2], [5, 5]], 2, seed=9)
    b = _round([[0, 0], [1, 2], [3, 1]], [[2, 2], [5, 5]], 2, seed=9)
    assert np.array_equal(a.local, b.local) and np.array_equal(a.newly_detected, b.newly_detected)


def test_theta_must_be_positive():
    with pytest.raises(ValueError):
        _round([[0, 0]], [[1, 1]], 0)


# ------------------------------------------------------------ propagation
def test_complete_graph_spreads_in_one_round():
    adj = ~np.eye(5, dtype=bool)
    k = np.zeros((5, 4), bool)
    k[3, 2] = True
    assert propagate(k, graph_from_adjacency(adj))[:, 2].all()


def test_path_graph_spreads_end_to_end():
    n = 9
    adj = np.zeros((n, n), bool)
    for i in range(n - 1):
        adj[i, i + 1] = adj[i + 1, i] = True
    k = np.zeros((n, 1), bool)
    k[0, 0] = True
    out = propagate(k, graph_from_adjacency(adj))
    assert out.all()
    assert np.array_equal(out, component_or_oracle(k, adj))


def test_no_transfer_across_components():
    adj = np.zeros((4, 4), bool)
    adj[0, 1] = adj[1, 0] = adj[2, 3] = adj[3, 2] = True
    k = np.zeros((4, 2), bool)
    k[0, 0] = True
    k[3, 1] = True
    out = propagate(k, graph_from_adjacency(adj))
    assert out[:, 0].tolist() == [True, True, False, False]
    assert out[:, 1].tolist() == [False, False, True, True]


@settings(max_examples=300, deadline=None)
@given(graphs_and_knowledge())
def test_propagate_matches_bfs_oracle(case):
    adj, k = case
    g = graph_from_adjacency(adj)
    out = propagate(k, g)
    assert np.array_equal(out, component_or_oracle(k, adj))
    assert np.array_equal(propagate(out, g), out)
    assert np.all(out >= k)


def test_propagate_dimension_mismatch():
    with pytest.raises(ValueError):
        propagate(np.zeros((3, 1), bool), graph_from_adjacency(np.zeros((2, 2), bool)))


# --------------------------------------------------------------- informed
def test_informed_status():
    k = np.array([[1, 1, 0], [1, 0, 0], [1, 1, 1]], bool)
    assert informed_status(k, np.array([True, True, False])).tolist() == [True, False, False]
    assert informed_status(k, np.array([False, True, True])).tolist() == [False, False, False]
    counted = np.array([True, False, True])
    assert informed_status(k, np.array([True, True, True]), counted).tolist() == [True, True, False]


def test_detectors_only_then_propagation_informs():
    # 5 agents, three detectors at one spot, two far away and disconnected at first
    n = 5
    k = np.zeros((n, 1), bool)
    k[:3, 0] = True
    split = np.zeros((n, n), bool)
    split[:3, :3] = ~np.eye(3, dtype=bool)
    detected = np.array([True])
    k1 = propagate(k, graph_from_adjacency(split))
    assert not informed_status(k1, detected)[0]
    joined = ~np.eye(n, dtype=bool)
    k2 = propagate(k1, graph_from_adjacency(joined))
    assert informed_status(k2, detected)[0]
