"""Cubical phase decomposition, wall labels, state transition graphs, Morse graphs.

Cells are integer tuples.  For a node ``n`` with ``s`` thresholds the cell
coordinate runs over ``0..s``; a repressing self-edge adds one thin band that
sits on the self threshold, so the coordinate runs over ``0..s+1`` and the
thin band has index ``k`` (the rank of the self threshold).  ``position``
maps an extended coordinate back to the count of thresholds below ``x_n``,
which is unambiguous for every threshold except the self threshold itself.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .logic import FactorGraph, NodeSignature, build_factor_graph, DEFAULT_BUDGET
from .net import RegulatoryNetwork

ABSORBING = "absorbing"
REPELLING = "repelling"


class Layout:
    """Cell geometry and per-cell input combinations for one choice of threshold orders.

    For every node ``n`` and cell, the cell is stationary in direction ``n``
    iff ``band[comb_a] >= lo`` and ``band[comb_b] <= hi``.  For ordinary
    cells both combinations coincide and ``lo == hi`` is the cell position;
    for a thin cell the two combinations are the self-input below and above
    the self threshold.
    """

    def __init__(self, signatures: list[NodeSignature], orders: tuple):
        self.signatures = signatures
        self.orders = orders
        n_nodes = len(signatures)
        self.rank = []
        self.thin = []
        for n, sig in enumerate(signatures):
            ranks = {t: i + 1 for i, t in enumerate(orders[n])}
            self.rank.append(ranks)
            self.thin.append(ranks[n] if sig.self_repressing else None)
        self.shape = tuple(
            sig.s + 1 + (self.thin[n] is not None) for n, sig in enumerate(signatures)
        )
        self.cells = list(itertools.product(*(range(e) for e in self.shape)))
        self.cell_index = {c: i for i, c in enumerate(self.cells)}
        nc = len(self.cells)
        self.comb_a = np.zeros((n_nodes, nc), dtype=np.int32)
        self.comb_b = np.zeros((n_nodes, nc), dtype=np.int32)
        self.lo = np.zeros((n_nodes, nc), dtype=np.int32)
        self.hi = np.zeros((n_nodes, nc), dtype=np.int32)
        for i, cell in enumerate(self.cells):
            for n in range(n_nodes):
                if self.is_thin(n, cell[n]):
                    k = self.thin[n]
                    self.comb_a[n, i] = self.combination(n, cell, self_low=True)
                    self.comb_b[n, i] = self.combination(n, cell, self_low=False)
                    self.lo[n, i] = k
                    self.hi[n, i] = k - 1
                else:
                    c = self.combination(n, cell)
                    p = self.position(n, cell[n])
                    self.comb_a[n, i] = self.comb_b[n, i] = c
                    self.lo[n, i] = self.hi[n, i] = p

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    def is_thin(self, n: int, e: int) -> bool:
        return self.thin[n] is not None and e == self.thin[n]

    def position(self, n: int, e: int) -> int:
        k = self.thin[n]
        return e if k is None or e < k else e - 1

    def above(self, m: int, e: int, target: int) -> bool:
        """Is ``x_m`` (extended coordinate ``e``) above the threshold theta_{target,m}?"""
        return self.position(m, e) >= self.rank[m][target]

    def combination(self, n: int, cell, self_low: bool | None = None) -> int:
        b = 0
        for j, (m, sign) in enumerate(self.signatures[n].in_edges):
            if m == n and self.thin[n] is not None and self.is_thin(n, cell[n]):
                high_input = self_low  # repressor contributes more below its threshold
            else:
                up = self.above(m, cell[m], n)
                high_input = up if sign > 0 else not up
            if high_input:
                b |= 1 << j
        return b

    def stationary(self, n: int, band_map) -> np.ndarray:
        """Boolean per cell: no flow out of the cell in direction ``n``."""
        bm = np.asarray(band_map)
        return (bm[self.comb_a[n]] >= self.lo[n]) & (bm[self.comb_b[n]] <= self.hi[n])


@dataclass
class CubicalComplex:
    layout: Layout

    @property
    def shape(self):
        return self.layout.shape

    @property
    def cells(self):
        return self.layout.cells

    def __len__(self):
        return self.layout.n_cells

    def walls(self):
        """Interior walls as ``(lower_cell, upper_cell, direction)``."""
        for cell in self.cells:
            for n, e in enumerate(self.shape):
                if cell[n] + 1 < e:
                    up = cell[:n] + (cell[n] + 1,) + cell[n + 1:]
                    yield cell, up, n


@dataclass
class ParameterContext:
    """A network with its factor graphs; parameter nodes are tuples of vertex ids."""

    net: RegulatoryNetwork
    graphs: list[FactorGraph]

    @classmethod
    def build(cls, net: RegulatoryNetwork, budget: int = DEFAULT_BUDGET,
              essential_rule: str = "strict") -> "ParameterContext":
        graphs = [
            build_factor_graph(NodeSignature.from_network(net, n), budget, essential_rule)
            for n in range(net.node_count)
        ]
        return cls(net, graphs)

    @cached_property
    def signatures(self):
        return [g.signature for g in self.graphs]

    def layout(self, order_indices: tuple) -> Layout:
        cache = self.__dict__.setdefault("_layouts", {})
        lay = cache.get(order_indices)
        if lay is None:
            orders = tuple(g.orders[o] for g, o in zip(self.graphs, order_indices))
            lay = cache[order_indices] = Layout(self.signatures, orders)
        return lay

    def split(self, pnode):
        parts = [g.split(v) for g, v in zip(self.graphs, pnode)]
        orders = tuple(p[0] for p in parts)
        bands = [g.template.band_maps[p[1]] for g, p in zip(self.graphs, parts)]
        return orders, bands

    @property
    def size(self) -> int:
        total = 1
        for g in self.graphs:
            total *= len(g)
        return total


@dataclass
class WallLabeling:
    complex: CubicalComplex
    labels: dict = field(default_factory=dict)  # (lower, upper, side_cell) -> label

    def label(self, lower, upper, side):
        return self.labels[(lower, upper, side)]


@dataclass
class StateTransitionGraph:
    cells: list
    successors: dict

    def edges(self):
        for c in self.cells:
            for d in self.successors[c]:
                yield c, d

    def self_edge_cells(self):
        return [c for c in self.cells if c in self.successors[c]]

    def to_dot(self) -> str:
        lines = ['digraph "STG" {']
        for c in self.cells:
            name = "".join(map(str, c))
            style = ', color="blue"' if c in self.successors[c] else ""
            lines.append(f'  "{name}" [label="{name}"{style}];')
        for a, b in self.edges():
            if a != b:
                lines.append(f'  "{"".join(map(str, a))}" -> "{"".join(map(str, b))}";')
        lines.append("}")
        return "\n".join(lines) + "\n"


def build_complex(ctx: ParameterContext, pnode) -> CubicalComplex:
    orders, _ = ctx.split(pnode)
    return CubicalComplex(ctx.layout(orders))


def _band(ctx, bands, lay, n, cell, self_low=None):
    return bands[n][lay.combination(n, cell, self_low)]


def _classical(ctx, bands, lay, lower, upper, n):
    """Labels (w.r.t. lower, w.r.t. upper) from the sign of -gamma*theta + Lambda."""
    r = lay.position(n, lower[n]) + 1  # rank of the wall threshold
    beta_lo = _band(ctx, bands, lay, n, lower)
    beta_up = _band(ctx, bands, lay, n, upper)
    wrt_lower = ABSORBING if beta_lo >= r else REPELLING
    wrt_upper = ABSORBING if beta_up < r else REPELLING
    return wrt_lower, wrt_upper


def label_walls(ctx: ParameterContext, pnode, cx: CubicalComplex | None = None) -> WallLabeling:
    orders, bands = ctx.split(pnode)
    lay = ctx.layout(orders)
    cx = cx or CubicalComplex(lay)
    out = WallLabeling(cx)
    for lower, upper, n in cx.walls():
        k = lay.thin[n]
        if k is not None and upper[n] == k:
            # wall below the thin band: classical rule for the outer cell, opposite inside
            r = lay.position(n, lower[n]) + 1
            wl = ABSORBING if _band(ctx, bands, lay, n, lower) >= r else REPELLING
            wu = REPELLING if wl == ABSORBING else ABSORBING
        elif k is not None and lower[n] == k:
            r = lay.position(n, upper[n])
            wu = ABSORBING if _band(ctx, bands, lay, n, upper) < r else REPELLING
            wl = REPELLING if wu == ABSORBING else ABSORBING
        else:
            m = next((m for m in range(len(cx.shape))
                      if m != n and lay.is_thin(m, lower[m])), None)
            if m is None:
                wl, wu = _classical(ctx, bands, lay, lower, upper, n)
                if wl == ABSORBING and wu == ABSORBING:
                    raise AssertionError(f"wall {lower}|{upper} absorbing on both sides")
            else:
                # inside a thin band: copy from the flanking wall just below it
                shift = lambda c: c[:m] + (c[m] - 1,) + c[m + 1:]
                flank = _flank_labels(ctx, bands, lay, shift(lower), shift(upper), n)
                wl, wu = flank
        out.labels[(lower, upper, lower)] = wl
        out.labels[(lower, upper, upper)] = wu
    return out


def _flank_labels(ctx, bands, lay, lower, upper, n):
    m = next((m for m in range(len(lay.shape)) if m != n and lay.is_thin(m, lower[m])), None)
    if m is None:
        return _classical(ctx, bands, lay, lower, upper, n)
    shift = lambda c: c[:m] + (c[m] - 1,) + c[m + 1:]
    return _flank_labels(ctx, bands, lay, shift(lower), shift(upper), n)


def build_stg(labeling: WallLabeling) -> StateTransitionGraph:
    cx = labeling.complex
    succ = {c: [] for c in cx.cells}
    for lower, upper, _ in cx.walls():
        if labeling.label(lower, upper, lower) == ABSORBING:
            succ[lower].append(upper)
        if labeling.label(lower, upper, upper) == ABSORBING:
            succ[upper].append(lower)
    for c in cx.cells:
        if not succ[c]:
            succ[c].append(c)
    return StateTransitionGraph(list(cx.cells), succ)


def stg_for(ctx: ParameterContext, pnode) -> StateTransitionGraph:
    return build_stg(label_walls(ctx, pnode))


# -- Morse graphs ---------------------------------------------------------------------


def strongly_connected_components(vertices, successors) -> list[list]:
    """Tarjan's algorithm, iterative; components come out in reverse topological order."""
    index = {}
    low = {}
    on_stack = set()
    stack = []
    comps = []
    counter = 0
    for root in vertices:
        if root in index:
            continue
        work = [(root, iter(successors[root]))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(successors[w])))
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                comps.append(comp)
    return comps


@dataclass
class MorseNode:
    cells: list
    label: str

    @property
    def is_fixed_point(self) -> bool:
        return self.label.startswith("FP")

    @property
    def coordinates(self):
        return self.cells[0] if self.is_fixed_point else None


@dataclass
class MorseGraph:
    nodes: list[MorseNode]
    below: list[set]  # below[i]: Morse nodes reachable from node i (excluding i)

    def minimal(self) -> list[int]:
        return [i for i, b in enumerate(self.below) if not b]

    def minimal_fixed_points(self) -> list[tuple]:
        return sorted(self.nodes[i].coordinates for i in self.minimal()
                      if self.nodes[i].is_fixed_point)

    def fp_labels(self) -> list[str]:
        return [fp_label(c) for c in self.minimal_fixed_points()]

    def to_dot(self) -> str:
        lines = ['digraph "MorseGraph" {']
        for i, node in enumerate(self.nodes):
            style = ', color="blue"' if not self.below[i] else ""
            lines.append(f'  {i} [label="{node.label}"{style}];')
        for i, b in enumerate(self.below):
            # transitive reduction for display
            for j in b:
                if not any(j in self.below[k] for k in b if k != j):
                    lines.append(f"  {i} -> {j};")
        lines.append("}")
        return "\n".join(lines) + "\n"


def fp_label(cell) -> str:
    return "FP(" + ",".join(str(c) for c in cell) + ")"


def morse_graph(stg: StateTransitionGraph) -> MorseGraph:
    comps = strongly_connected_components(stg.cells, stg.successors)
    comp_of = {}
    for i, comp in enumerate(comps):
        for c in comp:
            comp_of[c] = i
    recurrent = [
        i for i, comp in enumerate(comps)
        if len(comp) > 1 or comp[0] in stg.successors[comp[0]]
    ]
    # comps are reverse-topological: successors of comp i have index <= i
    reach = [set() for _ in comps]
    for i, comp in enumerate(comps):
        for c in comp:
            for d in stg.successors[c]:
                j = comp_of[d]
                if j != i:
                    reach[i].add(j)
                    reach[i] |= reach[j]
    position = {ci: mi for mi, ci in enumerate(recurrent)}
    nodes = []
    below = []
    for ci in recurrent:
        comp = sorted(comps[ci])
        label = fp_label(comp[0]) if len(comp) == 1 else "Cyclic"
        nodes.append(MorseNode(comp, label))
        below.append({position[j] for j in reach[ci] if j in position})
    return MorseGraph(nodes, below)
