import itertools

import pytest
from hypothesis import given, strategies as st

from switchscreen.net import (
    ALL_ACTIVATOR_ID,
    CensusPolicy,
    NetworkError,
    RegulatoryNetwork,
    enumerate_census,
    is_consistent,
    is_trivial,
    network_from_id,
    network_id,
    parse_network,
)

codes = st.integers(min_value=0, max_value=3**9 - 1)


def test_parse_cycle(net1):
    assert net1.edge_string() == "0->1 1->2 2->0"
    assert net1.input_node == 0 and net1.output_node == 2


def test_parse_net12(net12):
    assert net12.n_edges == 6
    assert all(sign == 1 for _, _, sign in net12.edges)
    assert net12.inputs(0) == ((0, 1), (1, 1), (2, 1))


def test_parse_repressor_product():
    net = parse_network("x0 : \nx1 : (x0)(~x2)\nx2 : (x1)")
    assert net.inputs(1) == ((0, 1), (2, -1))
    assert net.inputs(0) == ()


@pytest.mark.parametrize("text", [
    "x0 : x9",
    "x0 : x0\nx0 : x0",
    "x0 : (x0 + x0)",
    "x0 : (x0 +)",
])
def test_parse_errors(text):
    with pytest.raises(NetworkError):
        parse_network(text)


def test_spec_roundtrip(net12):
    assert parse_network(net12.to_spec()) == net12


@given(codes)
def test_id_roundtrip(code):
    assert network_id(network_from_id(code)) == code


@given(codes)
def test_spec_text_roundtrip(code):
    net = network_from_id(code)
    assert network_id(parse_network(net.to_spec())) == code


def test_trivial_examples(net12):
    assert is_trivial(RegulatoryNetwork(3))
    assert not is_trivial(net12)
    assert is_trivial(RegulatoryNetwork(3, frozenset({(0, 1, 1)})))


@given(codes)
def test_trivial_means_no_path(code):
    # brute force: trivial iff node 0 or node 1 cannot reach node 2
    net = network_from_id(code)
    reach = {n: {n} for n in range(3)}
    for _ in range(3):
        for s, t, _ in net.edges:
            for n in range(3):
                if s in reach[n]:
                    reach[n].add(t)
    reaches_two = all(n == 2 or 2 in reach[n] - {n} or any(
        (m, 2) in {(a, b) for a, b, _ in net.edges} for m in reach[n]) for n in (0, 1))
    assert is_trivial(net) == (not reaches_two)


@given(codes, st.sampled_from([(2, 0), (2, 1), (0, 1), (1, 0)]))
def test_triviality_monotone_under_deletion(code, pair):
    net = network_from_id(code)
    tgt, src = pair
    smaller = RegulatoryNetwork(3, frozenset(e for e in net.edges if (e[0], e[1]) != (src, tgt)))
    if is_trivial(net):
        assert is_trivial(smaller)


def test_consistency():
    assert is_consistent(parse_network("x0 : (x2)\nx1 : (~x0)\nx2 : (~x1)"))
    assert not is_consistent(parse_network("x0 : \nx1 : (x0)\nx2 : (~x0)"))


def test_census_counts():
    assert len(enumerate_census()) == 19683
    nontrivial = enumerate_census(CensusPolicy(exclude_trivial=True))
    assert len(nontrivial) == 19683 - 5103
    screened = enumerate_census(CensusPolicy(exclude_trivial=True, nine_edge_rule=True))
    assert len(screened) == 14069
    nine = [c for c, n in screened if n.n_edges == 9]
    assert nine == [ALL_ACTIVATOR_ID]


def test_census_brute_force_trivial_count():
    count = 0
    for a in itertools.product((-1, 0, 1), repeat=9):
        m = [a[0:3], a[3:6], a[6:9]]  # m[i][j] = a_ij
        if abs(m[2][0] * m[2][1]) + abs(m[2][0] * m[0][1]) + abs(m[2][1] * m[1][0]) == 0:
            count += 1
    assert count == 5103


def test_census_records_format():
    cen = enumerate_census(CensusPolicy(exclude_trivial=True, max_edges=2))
    for rec in cen.records():
        nid, edges, n_edges, trivial, consistent = rec.split("\t")
        assert network_from_id(int(nid)).edge_string() == edges
        assert trivial == "0" and consistent in "01" and int(n_edges) <= 2
