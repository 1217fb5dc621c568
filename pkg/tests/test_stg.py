import itertools

import pytest
from hypothesis import given, strategies as st

from switchscreen.net import network_from_id, parse_network
from switchscreen.stg import (
    ABSORBING,
    ParameterContext,
    build_complex,
    build_stg,
    label_walls,
    morse_graph,
    stg_for,
    strongly_connected_components,
)


def _essential(ctx, order0=0):
    pn = [g.essential()[0] for g in ctx.graphs]
    g0 = ctx.graphs[0]
    pn[0] = g0.vertex_id(order0, g0.split(pn[0])[1])
    return tuple(pn)


def _reach(succ, v):
    seen, todo = {v}, [v]
    while todo:
        for w in succ[todo.pop()]:
            if w not in seen:
                seen.add(w)
                todo.append(w)
    return seen


def test_cycle_has_eight_cells(ctx1):
    cx = build_complex(ctx1, _essential(ctx1))
    assert cx.shape == (2, 2, 2) and len(cx) == 8
    assert len(list(cx.walls())) == 12


def test_cycle_bistable_at_essential(ctx1):
    mg = morse_graph(stg_for(ctx1, _essential(ctx1)))
    assert mg.fp_labels() == ["FP(0,0,0)", "FP(1,1,1)"]


@pytest.mark.parametrize("logic,expected", [
    (0, ["FP(0,0,0)"]),
    (1, ["FP(0,0,0)", "FP(1,1,1)"]),
    (2, ["FP(1,1,1)"]),
])
def test_cycle_input_sweep(ctx1, logic, expected):
    pn = (logic,) + _essential(ctx1)[1:]
    assert morse_graph(stg_for(ctx1, pn)).fp_labels() == expected


def test_self_repressor_thin_band():
    net = parse_network("x0 : (~x0)\nx1 : \nx2 : ")
    ctx = ParameterContext.build(net)
    pn = _essential(ctx)
    cx = build_complex(ctx, pn)
    assert cx.shape[0] == 3
    # the essential self-repressor settles inside the thin band
    assert all(fp[0] == 1 for fp in morse_graph(stg_for(ctx, pn)).minimal_fixed_points())


def test_repressing_cycle_is_cyclic():
    net = parse_network("x0 : (~x2)\nx1 : (~x0)\nx2 : (~x1)")
    ctx = ParameterContext.build(net)
    mg = morse_graph(stg_for(ctx, _essential(ctx)))
    cyc = [n for n in mg.nodes if n.label == "Cyclic"]
    assert len(cyc) == 1 and len(cyc[0].cells) == 6
    assert [mg.nodes[i].label for i in mg.minimal()] == ["Cyclic"]


def _random_pnode(data, ctx):
    return tuple(data.draw(st.integers(0, len(g) - 1)) for g in ctx.graphs)


net_ids = st.integers(min_value=0, max_value=3**9 - 1)


@given(net_ids, st.data())
def test_no_double_absorbing_walls(code, data):
    ctx = ParameterContext.build(network_from_id(code))
    pn = _random_pnode(data, ctx)
    lab = label_walls(ctx, pn)
    for lower, upper, _ in lab.complex.walls():
        assert not (lab.label(lower, upper, lower) == ABSORBING
                    and lab.label(lower, upper, upper) == ABSORBING)


@given(net_ids, st.data())
def test_morse_graph_matches_brute_force(code, data):
    ctx = ParameterContext.build(network_from_id(code))
    stg = stg_for(ctx, _random_pnode(data, ctx))
    mg = morse_graph(stg)
    reach = {c: _reach(stg.successors, c) for c in stg.cells}
    # a recurrent class is a set of mutually reachable cells with a cycle
    classes = set()
    for c in stg.cells:
        comp = frozenset(d for d in reach[c] if c in reach[d])
        if len(comp) > 1 or c in stg.successors[c]:
            classes.add(comp)
    assert {frozenset(n.cells) for n in mg.nodes} == classes
    for i, node in enumerate(mg.nodes):
        c = node.cells[0]
        below = {j for j, other in enumerate(mg.nodes)
                 if j != i and other.cells[0] in reach[c]}
        assert mg.below[i] == below
    # every trajectory ends in some minimal node
    minimal_cells = set().union(*(set(mg.nodes[i].cells) for i in mg.minimal()))
    assert all(reach[c] & minimal_cells for c in stg.cells)


@given(st.integers(1, 12), st.data())
def test_scc_matches_brute_force(n, data):
    edges = data.draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)),
                               max_size=3 * n))
    succ = {v: [] for v in range(n)}
    for a, b in edges:
        succ[a].append(b)
    comps = strongly_connected_components(list(range(n)), succ)
    reach = {v: _reach(succ, v) for v in range(n)}
    expect = {frozenset(w for w in reach[v] if v in reach[w]) for v in range(n)}
    assert {frozenset(c) for c in comps} == expect
    # reverse topological: edges never point to a later component
    pos = {v: i for i, c in enumerate(comps) for v in c}
    assert all(pos[b] <= pos[a] for a, b in edges)


def test_stg_dot_and_morse_dot(ctx1):
    stg = stg_for(ctx1, _essential(ctx1))
    assert stg.to_dot().startswith('digraph "STG"')
    dot = morse_graph(stg).to_dot()
    assert dot.count("FP(") == 2


def test_every_cell_has_a_successor():
    ctx = ParameterContext.build(network_from_id(19597))
    for pn in itertools.islice(itertools.product(*(range(len(g)) for g in ctx.graphs)), 0, 50):
        stg = build_stg(label_walls(ctx, pn))
        assert all(stg.successors[c] for c in stg.cells)


def _euler_endpoint(net, p, x, dt=0.01, steps=4000):
    from switchscreen.sample import numeric_production
    x = list(x)
    for _ in range(steps):
        x = [xi + dt * (-p.gamma[n] * xi + numeric_production(net, p, n, x))
             for n, xi in enumerate(x)]
    return x


@pytest.mark.parametrize("code", [10816, 19597, 7636, 6679, 12274])
def test_switching_flow_settles_in_minimal_morse_nodes(code):
    from switchscreen.hill import input_regions
    from switchscreen.sample import _representative, sample_region
    net = network_from_id(code)
    ctx = ParameterContext.build(net)
    regions = input_regions(ctx, perturbed=True)
    hits = total = 0
    for k, pn in enumerate(regions[:: max(1, len(regions) // 6)]):
        p = sample_region(ctx, pn, seed=k)
        mg = morse_graph(stg_for(ctx, pn))
        minimal = set().union(*(set(mg.nodes[i].cells) for i in mg.minimal()))
        lay = build_complex(ctx, pn).layout
        for cell in lay.cells:
            x0 = [_representative(p, n, cell[n]) for n in range(3)]
            x = _euler_endpoint(net, p, x0)
            ths = [sorted(v for (t, m), v in p.theta.items() if m == n) for n in range(3)]
            end = tuple(sum(t < xi for t in th) for th, xi in zip(ths, x))
            total += 1
            hits += end in minimal
    assert hits >= 0.95 * total
