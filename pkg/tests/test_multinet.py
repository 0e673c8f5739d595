import io
import json

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from rwm.multinet import (GENERAL, LoadError, MultiNetwork, QuerySpec, as_general, as_multiplex,
                          column_normalize, load_cross_edges, load_edge_list, load_manifest, network_from_arrays,
                          replace_layer, validate, write_manifest)

from builders import TWO_TRIANGLES, edges_network, random_general, random_multiplex


def test_column_normalize_keeps_zero_columns():
    m = column_normalize(np.array([[1.0, 0, 0], [3.0, 0, 2.0], [0, 0, 2.0]]))
    np.testing.assert_allclose(m.toarray().sum(axis=0), [1, 0, 1])
    np.testing.assert_allclose(m.toarray()[:, 0], [0.25, 0.75, 0])


def test_edge_list_round_trip_and_weights():
    net = load_edge_list(["# comment", "0\t1\t2.5", "1 2", "", "0 1 0.5"])
    assert net.node_count == 3
    assert net.adjacency[0, 1] == pytest.approx(3.0)  # duplicate summed
    assert net.adjacency[1, 0] == pytest.approx(3.0)
    np.testing.assert_allclose(net.transition.toarray().sum(axis=0), 1.0)
    buf = io.StringIO()
    from rwm.multinet import write_edge_list
    write_edge_list(net, buf)
    back = load_edge_list(buf.getvalue().splitlines())
    assert (back.adjacency != net.adjacency).nnz == 0


def test_header_sets_node_count_and_isolated_nodes_survive():
    net = load_edge_list(["%nodes 6", "0 1"])
    assert net.node_count == 6
    assert validate(as_multiplex([net])).isolated == {0: [2, 3, 4, 5]}


@pytest.mark.parametrize("lines, needle", [
    (["0 1", "1 2 -3"], "line 2"),
    (["0 1 0"], "positive"),
    (["0"], "line 1"),
    (["a b"], "unparsable"),
    (["%nodes x"], "header"),
])
def test_malformed_records_name_the_line(lines, needle):
    with pytest.raises(LoadError, match=needle):
        load_edge_list(lines)


def test_out_of_range_index_is_reported():
    with pytest.raises(LoadError, match="line 3: node index out of range"):
        load_edge_list(["%nodes 3", "0 1", "1 3"])


def test_self_loops_dropped_with_warning(caplog):
    net = network_from_arrays([0, 1, 1], [0, 2, 1], [1, 1, 1], 3)
    assert net.adjacency.diagonal().sum() == 0
    assert "self-loop" in caplog.text


def test_edges_and_has_edge():
    net = edges_network(*TWO_TRIANGLES)
    e = net.edges()
    assert e.shape == (7, 2) and np.all(e[:, 0] < e[:, 1])
    assert net.has_edge(2, 3) and net.has_edge(3, 2) and not net.has_edge(0, 5)
    assert net.edge_count == 7


def test_multiplex_requires_equal_sizes():
    with pytest.raises(ValueError, match="node count"):
        as_multiplex([edges_network([(0, 1)], 2), edges_network([(0, 1)], 3)])


def test_general_requires_both_directions():
    rng = np.random.default_rng(0)
    mn = random_general([5, 6], rng)
    with pytest.raises(ValueError, match="without"):
        MultiNetwork(mn.layers, {(0, 1): mn.cross[(0, 1)]}, GENERAL)


def test_cross_edges_each_direction_normalized():
    a, b = edges_network([(0, 1), (1, 2)], 3), edges_network([(0, 1)], 2, 1)
    s01, s10 = load_cross_edges(["0 0 1", "0 1 3", "2 1 1"], a, b)
    assert s01.matrix.shape == (2, 3) and s10.matrix.shape == (3, 2)
    np.testing.assert_allclose(s01.matrix.toarray(), [[0.25, 0, 0], [0.75, 0, 1]])
    np.testing.assert_allclose(s10.matrix.toarray(), [[1, 0.75], [0, 0], [0, 0.25]])
    with pytest.raises(LoadError, match="line 1"):
        load_cross_edges(["3 0"], a, b)


def test_validate_reports_zero_columns_and_unreachable():
    a, b, c = edges_network([(0, 1)], 2), edges_network([(0, 1)], 2, 1), edges_network([(0, 1)], 2, 2)
    s01, s10 = load_cross_edges(["0 0"], a, b)
    rep = validate(as_general([a, b, c], [s01, s10]))
    assert not rep.ok
    assert rep.zero_cross_columns == {(0, 1): 1, (1, 0): 1}
    assert (0, 2) in rep.unreachable and (2, 1) in rep.unreachable
    assert "layer 2 unreachable from 0" in rep.messages()


def test_query_spec_dedupes_and_checks():
    q = QuerySpec(0, (3, 1, 3))
    assert q.query_nodes == (1, 3)
    with pytest.raises(ValueError):
        QuerySpec(0, ())
    mn = random_multiplex(5, 2, np.random.default_rng(0))
    with pytest.raises(ValueError, match="out of range"):
        QuerySpec(0, (7,)).check(mn)
    with pytest.raises(ValueError, match="query layer"):
        QuerySpec(2, (0,)).check(mn)


def test_manifest_round_trip_general(tmp_path):
    mn = random_general([6, 8, 5], np.random.default_rng(3))
    path = write_manifest(mn, tmp_path)
    back = load_manifest(path)
    assert back.mode == GENERAL and back.K == 3
    for a, b in zip(mn.layers, back.layers):
        assert a.node_count == b.node_count
        np.testing.assert_allclose(a.adjacency.toarray(), b.adjacency.toarray())
    for key, ct in mn.cross.items():
        np.testing.assert_allclose(ct.matrix.toarray(), back.cross[key].matrix.toarray())


def test_manifest_pads_multiplex_layers(tmp_path):
    (tmp_path / "a.tsv").write_text("0 1\n1 2\n")
    (tmp_path / "b.tsv").write_text("0 4\n")
    (tmp_path / "m.json").write_text(json.dumps({"mode": "multiplex", "layers": ["a.tsv", "b.tsv"]}))
    mn = load_manifest(tmp_path / "m.json")
    assert [net.node_count for net in mn.layers] == [5, 5]


@pytest.mark.parametrize("content, needle", [
    ("{", "invalid JSON"),
    ('{"layers": []}', "no layers"),
    ('{"mode": "odd", "layers": ["a.tsv"]}', "unknown mode"),
    ('{"mode": "general", "layers": ["a.tsv"], "cross": [{"from": 0, "to": 0, "file": "a.tsv"}]}', "bad cross"),
])
def test_bad_manifests(tmp_path, content, needle):
    (tmp_path / "a.tsv").write_text("0 1\n")
    (tmp_path / "m.json").write_text(content)
    with pytest.raises(LoadError, match=needle):
        load_manifest(tmp_path / "m.json")


def test_replace_layer_and_term_matrix():
    rng = np.random.default_rng(1)
    mn = random_general([5, 7], rng)
    t = mn.term_matrix(0, 1).toarray()
    exp = mn.cross[(1, 0)].matrix.toarray() @ mn.layers[1].transition.toarray() @ mn.cross[(0, 1)].matrix.toarray()
    np.testing.assert_allclose(t, exp)
    thin = edges_network([(0, 1)], 5)
    mn2 = replace_layer(mn, 0, thin)
    assert mn2.layers[0].edge_count == 1 and mn2.layers[0].layer_id == 0
    with pytest.raises(ValueError):
        replace_layer(mn, 0, edges_network([(0, 1)], 3))


def test_term_colsums_match_dense():
    mn = random_general([6, 4, 5], np.random.default_rng(2), density=0.2, cover_all=False)
    for i in range(mn.K):
        for j in range(mn.K):
            m = mn.term_matrix(i, j)
            exp = np.zeros(mn.layers[i].node_count) if m is None else m.toarray().sum(axis=0)
            np.testing.assert_allclose(mn.term_colsums[i][j], exp, atol=1e-12)


def test_walk_graph_is_union_of_term_supports():
    mn = random_multiplex(12, 3, np.random.default_rng(4), extra=4)
    g = mn.walk_graph(0, (0, 2)).toarray() > 0
    exp = (mn.layers[0].adjacency.toarray() > 0) | (mn.layers[2].adjacency.toarray() > 0)
    assert np.array_equal(g, exp)


@given(st.lists(st.tuples(st.integers(0, 9), st.integers(0, 9), st.floats(0.1, 10)), min_size=1, max_size=40))
def test_transition_is_column_stochastic_on_non_isolated(records):
    u, v, w = map(np.array, zip(*records))
    net = network_from_arrays(u, v, w, 10)
    sums = np.asarray(net.transition.sum(axis=0)).ravel()
    deg = net.degree
    np.testing.assert_allclose(sums[deg > 0], 1.0)
    assert np.all(sums[deg == 0] == 0)
    assert (net.adjacency != net.adjacency.T).nnz == 0
    assert sp.isspmatrix_csc(net.transition) or net.transition.format == "csc"
