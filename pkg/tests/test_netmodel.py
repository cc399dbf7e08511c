import numpy as np
import pytest
from hypothesis import given
import hypothesis.strategies as st

from netsemi.errors import InconsistentRates, SinkPresent, ValidationError
from netsemi.netmodel import (DiffusionCoupling, FickRates, FlowNetwork, NetworkGraph,
                              TransportCoupling, build_diffusion_coupling,
                              build_transport_coupling, check_conservation_condition,
                              detect_sinks, exchange_coupling, kappa_column_sums,
                              line_graph)
from netsemi.posit import check_diffusion_positivity


def test_graph_rejects_isolated_vertex():
    with pytest.raises(ValidationError):
        NetworkGraph.from_edges(3, [(0, 1)])


def test_fick_two_edge_example():
    g = NetworkGraph.from_edges(3, [(0, 1), (1, 2)])
    rates = FickRates(l=[0.0, 0.4], r=[1.0, 0.0], l_cross={(1, 0): 1.0})
    dc = build_diffusion_coupling(g, rates)
    assert dc.k11[0, 0] == -1.0
    assert dc.k00[1, 1] == 0.4
    assert dc.k01[1, 0] == -1.0
    assert np.count_nonzero(dc.full()) == 3


def test_fick_zero_rates_is_neumann():
    g = NetworkGraph.from_edges(3, [(0, 1), (1, 2)])
    dc = build_diffusion_coupling(g, FickRates(l=[0, 0], r=[0, 0]))
    assert not np.any(dc.full())


def test_fick_single_edge():
    g = NetworkGraph.from_edges(2, [(0, 1)])
    dc = build_diffusion_coupling(g, FickRates(l=[0.7], r=[0.2]))
    assert dc.k00.tolist() == [[0.7]] and dc.k11.tolist() == [[-0.2]]
    assert dc.k01.tolist() == [[0.0]] and dc.k10.tolist() == [[0.0]]


def test_fick_rejects_unrelated_edges():
    g = NetworkGraph.from_edges(4, [(0, 1), (2, 3)])
    with pytest.raises(InconsistentRates):
        build_diffusion_coupling(g, FickRates(l=[0, 0], r=[0, 0], l_cross={(1, 0): 1.0}))


def test_fick_rejects_loops():
    g = NetworkGraph.from_edges(1, [(0, 0)])
    with pytest.raises(ValidationError):
        build_diffusion_coupling(g, FickRates(l=[0], r=[0]))


def test_fick_parallel_edges_may_use_both_ends():
    g = NetworkGraph.from_edges(2, [(0, 1), (0, 1)])
    rates = FickRates(l=[1, 1], r=[1, 1], l_cross={(0, 1): 0.5}, r_cross={(0, 1): 0.25})
    dc = build_diffusion_coupling(g, rates)
    assert dc.k00[0, 1] == -0.5 and dc.k11[0, 1] == 0.25


@st.composite
def fick_instances(draw):
    """Random star/path graphs with random Fick rates on the shared vertices."""
    m = draw(st.integers(1, 5))
    n = m + 1
    tails = [0] * m
    heads = list(range(1, m + 1))
    flip = draw(st.lists(st.booleans(), min_size=m, max_size=m))
    edges = [(h, t) if f else (t, h) for t, h, f in zip(tails, heads, flip)]
    g = NetworkGraph.from_edges(n, edges)
    rate = st.floats(0, 5)
    l = draw(st.lists(rate, min_size=m, max_size=m))
    r = draw(st.lists(rate, min_size=m, max_size=m))
    l_cross, r_cross = {}, {}
    for i in range(m):
        for j in range(m):
            if i == j:
                continue
            v = draw(rate)
            # vertex 0 is shared by all edges
            if g.tail[i] == 0:
                l_cross[(i, j)] = v
            else:
                r_cross[(i, j)] = v
    return g, FickRates(l, r, l_cross, r_cross)


@given(fick_instances())
def test_fick_sign_pattern_and_positivity(inst):
    g, rates = inst
    dc = build_diffusion_coupling(g, rates)
    off = ~np.eye(g.m, dtype=bool)
    assert np.all(np.diag(dc.k00) >= 0) and np.all(np.diag(dc.k11) <= 0)
    assert np.all(dc.k00[off] <= 0) and np.all(dc.k01 <= 0)
    assert np.all(dc.k10 >= 0) and np.all(dc.k11[off] >= 0)
    assert check_diffusion_positivity(dc).positive


def _fan():
    # e0: 0 -> 1, e1: 1 -> 0, e2: 1 -> 0
    g = NetworkGraph.from_edges(2, [(0, 1), (1, 0), (1, 0)])
    w = np.zeros((2, 3))
    w[0, 0] = 1.0
    w[1, 1], w[1, 2] = 0.3, 0.7
    return g, w


def test_transport_loop():
    g = NetworkGraph.from_edges(1, [(0, 0)])
    tc = build_transport_coupling(FlowNetwork(g, [[1.0]], [1.0], [1.0], [1.0]))
    assert tc.k.tolist() == [[1.0]]


def test_transport_two_cycle():
    g = NetworkGraph.from_edges(2, [(0, 1), (1, 0)])
    w = np.array([[1.0, 0.0], [0.0, 1.0]])
    tc = build_transport_coupling(FlowNetwork(g, w, [1, 1], [1, 1], [1.0, 2.0]))
    assert np.allclose(tc.k, [[0.0, 2.0], [0.5, 0.0]], atol=0, rtol=1e-15)
    assert kappa_column_sums(tc).tolist() == [0.5, 2.0]


def test_transport_fan_split():
    g, w = _fan()
    tc = build_transport_coupling(FlowNetwork(g, w, [1] * 3, [1] * 3, [1.0] * 3))
    assert tc.k[1, 0] == 0.3 and tc.k[2, 0] == 0.7
    assert kappa_column_sums(tc)[0] == pytest.approx(1.0)


def test_transport_rejects_bad_split():
    g, w = _fan()
    w[1, 2] = 0.6
    with pytest.raises(ValidationError):
        build_transport_coupling(FlowNetwork(g, w, [1] * 3, [1] * 3, [1.0] * 3))


def test_transport_sink():
    g = NetworkGraph.from_edges(2, [(0, 1)])
    with pytest.raises(SinkPresent) as exc:
        build_transport_coupling(FlowNetwork(g, [[1.0], [0.0]], [1], [1], [1]))
    assert exc.value.sinks == [1]


def test_detect_sinks_examples():
    assert detect_sinks(NetworkGraph.from_edges(1, [(0, 0)])) == []
    assert detect_sinks(NetworkGraph.from_edges(2, [(0, 1)])) == [1]
    assert detect_sinks(NetworkGraph.from_edges(3, [(0, 1), (1, 2), (2, 0)])) == []


@given(st.lists(st.floats(0.1, 10), min_size=3, max_size=3))
def test_kirchhoff_identity(c):
    g, w = _fan()
    tc = build_transport_coupling(FlowNetwork(g, w, [1] * 3, [1] * 3, c))
    C = np.diag(c)
    lhs = g.outgoing_incidence() @ C @ tc.k
    rhs = g.incoming_incidence() @ C
    assert np.allclose(lhs, rhs, rtol=1e-13, atol=1e-13)


def test_line_graph_examples():
    lg, b = line_graph(NetworkGraph.from_edges(1, [(0, 0)]))
    assert b.tolist() == [[1.0]] and lg.m == 1
    _, b = line_graph(NetworkGraph.from_edges(2, [(0, 1), (1, 0)]))
    assert b.tolist() == [[0, 1], [1, 0]]
    _, b = line_graph(NetworkGraph.from_edges(4, [(0, 1), (1, 2), (2, 3)]))
    assert set(zip(*np.nonzero(b))) == {(1, 0), (2, 1)}
    _, b = line_graph(NetworkGraph.from_edges(3, [(0, 1), (1, 2)]), directed=False)
    assert b.tolist() == [[0, 1], [1, 0]]


def test_line_graph_matches_transport_support():
    g, w = _fan()
    tc = build_transport_coupling(FlowNetwork(g, w, [1] * 3, [1] * 3, [1.0] * 3))
    _, b = line_graph(g)
    assert np.array_equal(b != 0, tc.k != 0)


def test_conservation_examples():
    ok, _ = check_conservation_condition(DiffusionCoupling.zero([1.0, 1.0]))
    assert ok
    z = np.zeros((1, 1))
    ok, res = check_conservation_condition(DiffusionCoupling([[2.0]], z, z, z, [1.0]))
    assert not ok and abs(res[0, 0]) == 2.0


@given(st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_exchange_coupling_is_conservative_and_positive(m, seed):
    rng = np.random.default_rng(seed)
    dc = exchange_coupling(rng.uniform(0, 3, (2 * m, 2 * m)), rng.uniform(0.2, 3, m))
    assert check_conservation_condition(dc, tol=1e-11)[0]
    assert check_diffusion_positivity(dc).positive


def test_coupling_validation():
    with pytest.raises(ValidationError):
        DiffusionCoupling(np.eye(2), np.eye(2), np.eye(2), np.eye(3), [1, 1])
    with pytest.raises(ValidationError):
        DiffusionCoupling.zero([1.0, 0.0])
    with pytest.raises(ValidationError):
        TransportCoupling([[np.nan]], [1.0])
    with pytest.raises(ValidationError):
        TransportCoupling([[1.0]], [-1.0])
