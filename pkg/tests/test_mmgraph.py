import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import domain, path_graph, random_graphs, vertex_at
from ghsdensity.errors import ArgumentError, GraphFormatError
from ghsdensity.mmgraph import (
    MetricMeasureGraph, boundary_distance, graph_from_json, inner_ball, internal_distance,
    path_components, scaled_ball, set_diameter,
)


# -- construction and loading ------------------------------------------------------------


def test_rejects_nonpositive_measure_and_length():
    e = np.array([[0, 1], [1, 2]])
    b = np.array([True, False, False])
    with pytest.raises(GraphFormatError):
        MetricMeasureGraph(np.array([1.0, 0.0, 1.0]), b, e, np.ones(2))
    with pytest.raises(GraphFormatError):
        MetricMeasureGraph(np.ones(3), b, e, np.array([1.0, -1.0]))


def test_rejects_loops_duplicates_and_empty_domain():
    b = np.array([True, False, False])
    with pytest.raises(GraphFormatError):
        MetricMeasureGraph(np.ones(3), b, np.array([[0, 1], [1, 1]]), np.ones(2))
    with pytest.raises(GraphFormatError):
        MetricMeasureGraph(np.ones(3), b, np.array([[0, 1], [1, 0]]), np.ones(2))
    with pytest.raises(GraphFormatError):
        MetricMeasureGraph(np.ones(2), np.array([True, True]), np.array([[0, 1]]), np.ones(1))


def test_json_round_trip_and_hash(square01):
    text = square01.to_json()
    g = graph_from_json(text)
    assert g.to_json() == text
    assert g.content_hash() == square01.content_hash()


def test_malformed_json_reports_line():
    with pytest.raises(GraphFormatError, match="line"):
        graph_from_json('{"vertices": [\n{"id": 0, "mu": 1}\n,,]}')


def test_bad_element_reports_its_line(square01):
    lines = square01.to_json().split("\n")
    lines[5] = json.dumps({"id": 4, "mu": -1.0, "boundary": True, "xy": [0, 0]}) + ","
    with pytest.raises(GraphFormatError, match="line 6"):
        graph_from_json("\n".join(lines))


# -- boundary and internal distance ---------------------------------------------------------


def test_boundary_distance_on_sources_is_zero(square01):
    bd = boundary_distance(square01).dist
    assert np.all(bd[square01.boundary_ids] == 0)


def test_boundary_distance_path_graph():
    g = path_graph(3)
    bd = boundary_distance(g).dist
    assert bd[1] == 1 and bd[2] == 2


def test_disk_center_boundary_distance():
    # exact Euclidean distance to the circle is 1; the grid error is at most 2h
    h = 0.05
    g = domain("disk", h)
    c = vertex_at(g, 0, 0)
    assert 1 - 2 * h <= boundary_distance(g).dist[c] <= 1 + g.tol


def test_internal_distance_self_zero(square01):
    x = int(square01.domain_ids[3])
    assert internal_distance(square01, [x]).dist[x] == 0


def test_internal_distance_two_components_infinite():
    # 0 - 1 - 2 - 3 - 4 with 2 on the boundary splits the domain in two
    g = path_graph(5, boundary=(0, 2, 4))
    assert np.isinf(internal_distance(g, [1]).dist[3])


def test_internal_distance_rejects_boundary_source(square01):
    with pytest.raises(ArgumentError):
        internal_distance(square01, [int(square01.boundary_ids[0])])


def test_slit_internal_distance_exceeds_straight_line():
    g = domain("slit-disk", 0.02)
    x, y = vertex_at(g, 0.9, 0.06), vertex_at(g, 0.9, -0.06)
    d = internal_distance(g, [x]).dist[y]
    assert d > np.hypot(*(g.xy[x] - g.xy[y])) + 0.1


def test_distance_field_path_is_shortest(square005):
    g = square005
    x, y = int(g.domain_ids[0]), int(g.domain_ids[-1])
    f = internal_distance(g, [x])
    path = f.path_to(y)
    assert path[0] == x and path[-1] == y
    length = sum(g.slot_length[g.indptr[a]:g.indptr[a + 1]][g.neighbors(a) == b][0]
                 for a, b in zip(path, path[1:]))
    assert length == pytest.approx(f.dist[y], rel=1e-12)


# -- components and balls ------------------------------------------------------------


def test_components_trivial_cases(square01):
    assert path_components(square01, []) == []
    comps = path_components(square01, square01.domain_ids)
    assert len(comps) == 1 and np.array_equal(comps[0], square01.domain_ids)


def test_disk_minus_band_has_two_components():
    g = domain("disk", 0.05)
    keep = g.domain & (np.abs(g.xy[:, 1]) > 0.1)
    comps = path_components(g, keep)
    assert len(comps) == 2
    # exhaustive flood fill oracle: each component is closed under domain adjacency
    for c in comps:
        A = g.domain_adjacency()
        inside = np.zeros(g.n, dtype=bool)
        inside[c] = True
        for v in c:
            nb = A.indices[A.indptr[v]:A.indptr[v + 1]]
            assert np.all(inside[nb] | ~keep[nb])


def test_ball_radius_zero_is_center(square01):
    c = int(square01.domain_ids[10])
    assert inner_ball(square01, c, 0.0, "closed").members.tolist() == [c]
    assert inner_ball(square01, c, 0.0, "open").members.tolist() == [c]


def test_large_ball_is_whole_component(square01):
    c = int(square01.domain_ids[10])
    ball = inner_ball(square01, c, 100.0)
    assert np.array_equal(ball.members, square01.domain_ids)


def test_scaled_ball_on_path_graph():
    # unit open ball about 4 on a path: members {3,4,5}, diameter 2
    g = path_graph(12, boundary=(0, 11))
    ball = inner_ball(g, 4, 1.5)
    assert ball.members.tolist() == [3, 4, 5]
    assert ball.diameter(g) == 2
    big = scaled_ball(g, ball, 2)
    brute = [v for v in range(1, 11) if abs(v - 4) <= 4]
    assert big.members.tolist() == brute


# -- properties --------------------------------------------------------------------------


@given(random_graphs())
def test_distance_fields_are_edge_lipschitz(g):
    src = [int(g.domain_ids[0])]
    d = internal_distance(g, src).dist
    a, b, ell = g.domain_edges()
    fin = np.isfinite(d[a]) & np.isfinite(d[b])
    assert np.all(np.abs(d[a][fin] - d[b][fin]) <= ell[fin] + 1e-12)
    bd = boundary_distance(g).dist
    r, c = g.slot_row, g.indices
    assert np.all(np.abs(bd[r] - bd[c]) <= g.slot_length + 1e-12)


@given(random_graphs(), st.data())
def test_internal_distance_symmetric(g, data):
    x = int(data.draw(st.sampled_from(list(g.domain_ids))))
    y = int(data.draw(st.sampled_from(list(g.domain_ids))))
    # the two fields add the same edge lengths in different orders
    a, b = internal_distance(g, [x]).dist[y], internal_distance(g, [y]).dist[x]
    assert (np.isinf(a) and np.isinf(b)) or abs(a - b) <= g.tol


@given(st.sampled_from(["square", "disk", "slit-disk", "comb"]), st.data())
def test_internal_distance_symmetric_on_grids(shape, data):
    # uniform edge lengths: every path sum is the same sequence of additions
    g = domain(shape, 0.05)
    x = int(data.draw(st.sampled_from(list(g.domain_ids))))
    y = int(data.draw(st.sampled_from(list(g.domain_ids))))
    assert internal_distance(g, [x]).dist[y] == internal_distance(g, [y]).dist[x]


@given(random_graphs(), st.data())
def test_components_partition(g, data):
    subset = data.draw(st.lists(st.sampled_from(list(g.domain_ids)), unique=True))
    comps = path_components(g, subset)
    allv = np.concatenate(comps) if comps else np.zeros(0, int)
    assert len(allv) == len(set(allv.tolist()))
    assert sorted(allv.tolist()) == sorted(subset)


@given(random_graphs(), st.floats(0, 3), st.floats(0, 3), st.data())
def test_scaled_ball_monotone(g, c1, c2, data):
    c1, c2 = min(c1, c2), max(c1, c2)
    x = int(data.draw(st.sampled_from(list(g.domain_ids))))
    ball = inner_ball(g, x, data.draw(st.floats(0.1, 4)))
    small, big = scaled_ball(g, ball, c1), scaled_ball(g, ball, c2)
    assert set(small.members.tolist()) <= set(big.members.tolist())
    assert not g.boundary[big.members].any()


@given(random_graphs(), st.data())
def test_set_diameter_matches_all_pairs(g, data):
    subset = np.array(sorted(data.draw(st.lists(st.sampled_from(list(g.domain_ids)),
                                                min_size=1, unique=True))))
    brute = max(internal_distance(g, [int(x)]).dist[subset].max() for x in subset)
    assert set_diameter(g, subset) == brute
