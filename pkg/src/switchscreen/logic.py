"""Factor graphs: the combinatorial parameter regions of a single node.

A node with ``k`` inputs and ``s`` out-thresholds has ``2**k`` input
combinations.  Bit ``j`` of a combination ``b`` is set when input ``j``
contributes its larger production value (activator source above its threshold,
repressor source below).  A *band map* assigns each combination the number of
the node's thresholds lying below ``Lambda(b) / gamma``.  A factor-graph vertex
is a realizable band map together with an ordering of the thresholds.

Band maps depend only on the algebra shape ``(n_act, n_rep, s)`` so they are
computed once per shape (:class:`LogicTemplate`) and shared between nodes.
"""

from __future__ import annotations

import enum
import itertools
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import linprog

from .net import RegulatoryNetwork

log = logging.getLogger(__name__)

MAX_INPUTS = 4
MAX_THRESHOLDS = 4
DEFAULT_BUDGET = 64

# label of the phantom threshold of a node without out-edges
PHANTOM = None


@dataclass(frozen=True)
class NodeSignature:
    node: int
    in_edges: tuple[tuple[int, int], ...]
    out_thresholds: tuple

    @classmethod
    def from_network(cls, net: RegulatoryNetwork, node: int) -> "NodeSignature":
        outs = net.outputs(node) or (PHANTOM,)
        return cls(node, net.inputs(node), tuple(outs))

    @property
    def k(self) -> int:
        return len(self.in_edges)

    @property
    def s(self) -> int:
        return len(self.out_thresholds)

    @property
    def n_act(self) -> int:
        return sum(1 for _, sign in self.in_edges if sign > 0)

    @property
    def n_rep(self) -> int:
        return self.k - self.n_act

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n_act, self.n_rep, self.s)

    @property
    def self_repressing(self) -> bool:
        return (self.node, -1) in self.in_edges

    def threshold_name(self, target) -> str:
        if target is PHANTOM:
            return f"T[x{self.node}->]"
        return f"theta_{target}_{self.node}"


@dataclass(frozen=True)
class Witness:
    """Numeric point of a region: ``gamma``, thresholds by rank, per-input ``ell``/``delta``.

    ``beta`` is the constant production of a node without inputs.
    """

    gamma: float
    theta: tuple[float, ...]
    ell: tuple[float, ...] = ()
    delta: tuple[float, ...] = ()
    beta: float | None = None


def production(n_act: int, ell, delta, beta, b: int) -> float:
    """Switching production Lambda(b) under the sum-times-product convention."""
    k = len(ell)
    if k == 0:
        return beta
    total = 1.0
    if n_act:
        total = sum(ell[j] + (delta[j] if b >> j & 1 else 0.0) for j in range(n_act))
    for j in range(n_act, k):
        total *= ell[j] + (delta[j] if b >> j & 1 else 0.0)
    return total


def witness_margin(shape, band_map, w: Witness) -> float:
    """Smallest relative gap over all inequalities of the region (negative if violated)."""
    n_act, _, s = shape
    worst = math.inf
    for i in range(s - 1):
        worst = min(worst, _rel_gap(w.theta[i], w.theta[i + 1]))
    for b, beta in enumerate(band_map):
        lam = production(n_act, w.ell, w.delta, w.beta, b) / w.gamma
        for i in range(s):
            if i < beta:
                worst = min(worst, _rel_gap(w.theta[i], lam))
            else:
                worst = min(worst, _rel_gap(lam, w.theta[i]))
    return worst


def _rel_gap(lo, hi) -> float:
    return (hi - lo) / max(abs(hi), abs(lo))


# -- enumeration -----------------------------------------------------------------


def monotone_band_maps(k: int, s: int) -> list[tuple[int, ...]]:
    """All monotone maps {0,1}^k -> {0..s}, in lexicographic order."""
    n = 1 << k
    out = []
    vals = [0] * n

    def rec(b):
        if b == n:
            out.append(tuple(vals))
            return
        lo = 0
        for j in range(k):
            if b >> j & 1:
                lo = max(lo, vals[b ^ (1 << j)])
        for v in range(lo, s + 1):
            vals[b] = v
            rec(b + 1)

    rec(0)
    return out


def depends_on_all_inputs(band_map, k: int) -> bool:
    for j in range(k):
        bit = 1 << j
        if all(band_map[b] == band_map[b | bit] for b in range(1 << k) if not b & bit):
            return False
    return True


def separates_all_thresholds(band_map, s: int) -> bool:
    return all(
        any(v >= i for v in band_map) and any(v < i for v in band_map)
        for i in range(1, s + 1)
    )


def is_essential(band_map, k: int, s: int, rule: str = "strict") -> bool:
    """Essential band maps: every input matters and (strict rule) every threshold separates.

    A node without inputs has no input to test and cannot split its thresholds;
    all of its band values count as essential under either rule.
    """
    if k == 0:
        return True
    if not depends_on_all_inputs(band_map, k):
        return False
    if rule == "influence":
        return True
    return separates_all_thresholds(band_map, s)


# -- realizability ------------------------------------------------------------------


def _combination_rows(band_map, s, lam_rows, t_offset, nv, ratio=1.0):
    """Rows A x <= -1 encoding t_beta < Lambda(b) < t_{beta+1} for linear Lambda.

    With ``ratio > 1`` every "lo < hi" becomes "ratio * lo < hi".
    """
    A = []
    for b, beta in enumerate(band_map):
        row = lam_rows[b]
        if beta >= 1:
            r = -row.copy()
            r[t_offset + beta - 1] += ratio
            A.append(r)
        if beta < s:
            r = row * ratio
            r[t_offset + beta] -= 1.0
            A.append(r)
    for i in range(s - 1):
        r = np.zeros(nv)
        r[t_offset + i] = ratio
        r[t_offset + i + 1] = -1.0
        A.append(r)
    return A


def _solve(A, nv, bounds):
    if not A:
        return np.array([max(lo if lo is not None else 0.0, 1.0) for lo, _ in bounds])
    res = linprog(np.zeros(nv), A_ub=np.array(A), b_ub=-np.ones(len(A)),
                  bounds=bounds, method="highs")
    return res.x if res.status == 0 else None


def _lp_sum(band_map, n_act, n_rep, s, rho=(), ratio=1.0):
    """Lambda = (sum of activators) * prod(rho_r ** b_r); linear in (ell, delta, theta)."""
    nv = 2 * n_act + s
    rows = []
    for b in range(len(band_map)):
        scale = 1.0
        for r in range(n_rep):
            if b >> (n_act + r) & 1:
                scale *= rho[r]
        row = np.zeros(nv)
        for j in range(n_act):
            row[j] = scale
            if b >> j & 1:
                row[n_act + j] = scale
        rows.append(row)
    A = _combination_rows(band_map, s, rows, 2 * n_act, nv, ratio)
    x = _solve(A, nv, [(1.0, None)] * nv)
    if x is None:
        return None
    ell = list(x[:n_act]) + [1.0] * n_rep
    delta = list(x[n_act:2 * n_act]) + [r - 1.0 for r in rho]
    return Witness(1.0, tuple(x[2 * n_act:]), tuple(ell), tuple(delta))


def _lp_product(band_map, k, s, log_gap=None):
    """All factors multiply: linear in logs (c, log-ratios r_j > 0, log-thresholds).

    ``log_gap`` fixes the separation of every inequality in log space; by
    default unit gaps are solved for and shrunk to keep numbers moderate.
    """
    if k == 0:
        beta = band_map[0]
        # Lambda = beta + 0.5 sits between the beta-th and (beta+1)-th threshold
        theta = tuple(float(i + 1) + (0.0 if i < beta else 1.0) for i in range(s))
        return Witness(1.0, theta, beta=float(beta) + 0.5)
    nv = 1 + k + s
    rows = []
    for b in range(len(band_map)):
        row = np.zeros(nv)
        row[0] = 1.0
        for j in range(k):
            if b >> j & 1:
                row[1 + j] = 1.0
        rows.append(row)
    A = _combination_rows(band_map, s, rows, 1 + k, nv)
    bounds = [(None, None)] + [(1.0, None)] * k + [(None, None)] * s
    x = _solve(A, nv, bounds)
    if x is None:
        return None
    if log_gap is not None:
        x = x * log_gap
    else:
        # unit margins in log space; shrink to keep numbers moderate (ratio gaps >= e**0.2)
        x = x * (0.2 if np.max(np.abs(x)) * 0.2 < 30 else 6.0 / np.max(np.abs(x)))
    u = math.exp(x[0] / k)
    ell = tuple(u for _ in range(k))
    delta = tuple(u * (math.exp(x[1 + j]) - 1.0) for j in range(k))
    return Witness(1.0, tuple(math.exp(v) for v in x[1 + k:]), ell, delta)


def _relaxation_feasible(band_map, n_act, n_rep, s):
    """Necessary condition for a single repressor: split thresholds t' < t freely."""
    # variables: ell, delta (n_act each), t (s), t' (s); b_r = 1 combos compare against t'
    nv = 2 * n_act + 2 * s
    A = []
    bit = 1 << n_act
    for b, beta in enumerate(band_map):
        row = np.zeros(nv)
        for j in range(n_act):
            row[j] = 1.0
            if b >> j & 1:
                row[n_act + j] = 1.0
        off = 2 * n_act + (s if b & bit else 0)
        if beta >= 1:
            r = -row.copy()
            r[off + beta - 1] += 1.0
            A.append(r)
        if beta < s:
            r = row.copy()
            r[off + beta] -= 1.0
            A.append(r)
    for off in (2 * n_act, 2 * n_act + s):
        for i in range(s - 1):
            r = np.zeros(nv)
            r[off + i] = 1.0
            r[off + i + 1] = -1.0
            A.append(r)
    for i in range(s):
        r = np.zeros(nv)
        r[2 * n_act + s + i] = 1.0
        r[2 * n_act + i] = -1.0
        A.append(r)
    x = _solve(A, nv, [(1.0, None)] * nv)
    if x is None:
        return None
    t = x[2 * n_act:2 * n_act + s]
    tp = x[2 * n_act + s:]
    return [float(a / c) for a, c in zip(t, tp)]


def realizability_witness(shape, band_map, budget: int = DEFAULT_BUDGET, seed: int = 0):
    """Find a numeric point of the region, or ``None`` (unverified).

    Pure sums and pure products are linear programs (directly or in logs) and
    are decided exactly.  Sums multiplied by repressor factors are linear once
    the repressor ratios are fixed; ratios are tried from a relaxation hint and
    then log-uniform samples, ``budget`` attempts in total.
    """
    n_act, n_rep, s = shape
    k = n_act + n_rep
    if n_act <= 1:
        return _lp_product(band_map, k, s)
    if n_rep == 0:
        return _lp_sum(band_map, n_act, 0, s)
    if budget <= 0:
        return None
    hints = []
    if n_rep == 1:
        ratios = _relaxation_feasible(band_map, n_act, n_rep, s)
        if ratios is None:
            return None
        geo = math.exp(sum(math.log(r) for r in ratios) / len(ratios))
        hints = [(r,) for r in sorted(set([min(ratios), geo, max(ratios)]))]
    rng = np.random.default_rng(seed)
    for attempt in range(budget):
        if attempt < len(hints):
            rho = hints[attempt]
        else:
            rho = tuple(1.0 + 10.0 ** rng.uniform(-3.0, 3.0) for _ in range(n_rep))
        w = _lp_sum(band_map, n_act, n_rep, s, rho)
        if w is not None and witness_margin(shape, band_map, w) > 1e-6:
            return w
    return None


def margin_witness(shape, band_map, margin: float, hint: Witness | None = None,
                   budget: int = DEFAULT_BUDGET, seed: int = 0):
    """A witness whose every inequality holds with relative gap >= ``margin``, or ``None``."""
    n_act, n_rep, s = shape
    k = n_act + n_rep
    ratio = 1.0 / (1.0 - margin) * (1.0 + 1e-9)
    if n_act <= 1:
        w = _lp_product(band_map, k, s, log_gap=math.log(ratio))
    elif n_rep == 0:
        w = _lp_sum(band_map, n_act, 0, s, ratio=ratio)
    else:
        w = None
        rhos = []
        if hint is not None:
            rhos.append(tuple(1.0 + d for d in hint.delta[n_act:]))
        rng = np.random.default_rng(seed)
        rhos += [tuple(1.0 + 10.0 ** rng.uniform(-3.0, 3.0) for _ in range(n_rep))
                 for _ in range(budget)]
        for rho in rhos:
            w = _lp_sum(band_map, n_act, n_rep, s, rho, ratio=ratio)
            if w is not None:
                break
    if w is None or witness_margin(shape, band_map, w) < margin:
        return None
    return w


# -- templates ------------------------------------------------------------------------


@dataclass
class LogicTemplate:
    """Realizable band maps of one algebra shape and their covering relation."""

    shape: tuple[int, int, int]
    band_maps: list[tuple[int, ...]]
    witnesses: list[Witness]
    unverified: list[tuple[int, ...]]
    up: list[list[int]]
    essential: np.ndarray
    essential_influence: np.ndarray
    index: dict = field(repr=False)

    @property
    def k(self):
        return self.shape[0] + self.shape[1]

    @property
    def s(self):
        return self.shape[2]

    def __len__(self):
        return len(self.band_maps)

    @property
    def table(self) -> np.ndarray:
        """``(n_logic, 2**k)`` int8 array of band values."""
        t = getattr(self, "_table", None)
        if t is None:
            t = np.array(self.band_maps, dtype=np.int8).reshape(len(self.band_maps), 1 << self.k)
            self._table = t
        return t

    @property
    def minimum(self) -> int:
        return self.index[(0,) * (1 << self.k)]

    @property
    def maximum(self) -> int:
        return self.index[(self.s,) * (1 << self.k)]

    def edge_arrays(self):
        """CSR form of the covering relation: (offsets, targets) as int32."""
        cached = getattr(self, "_csr", None)
        if cached is None:
            offsets = np.zeros(len(self.up) + 1, dtype=np.int32)
            offsets[1:] = np.cumsum([len(u) for u in self.up])
            targets = np.array([t for u in self.up for t in u], dtype=np.int32)
            cached = self._csr = (offsets, targets)
        return cached


@lru_cache(maxsize=None)
def logic_template(shape, budget: int = DEFAULT_BUDGET, seed: int = 0) -> LogicTemplate:
    n_act, n_rep, s = shape
    k = n_act + n_rep
    if k > MAX_INPUTS or s > MAX_THRESHOLDS or s < 1:
        raise ValueError(f"unsupported node shape {shape}")
    maps, wits, unverified = [], [], []
    for bm in monotone_band_maps(k, s):
        w = realizability_witness(shape, bm, budget, seed)
        if w is None:
            unverified.append(bm)
        else:
            maps.append(bm)
            wits.append(w)
    if unverified and n_act >= 2 and n_rep >= 1:
        log.info("shape %s: %d candidate band maps left unverified", shape, len(unverified))
    index = {bm: i for i, bm in enumerate(maps)}
    up = []
    for bm in maps:
        nbrs = []
        for b in range(len(bm)):
            if bm[b] < s:
                cand = bm[:b] + (bm[b] + 1,) + bm[b + 1:]
                j = index.get(cand)
                if j is not None:
                    nbrs.append(j)
        up.append(nbrs)
    ess = np.array([is_essential(bm, k, s, "strict") for bm in maps], dtype=bool)
    ess_inf = np.array([is_essential(bm, k, s, "influence") for bm in maps], dtype=bool)
    return LogicTemplate(shape, maps, wits, unverified, up, ess, ess_inf, index)


# -- factor graphs --------------------------------------------------------------------


class Order(enum.Enum):
    LESS = "less"
    GREATER = "greater"
    EQUAL = "equal"
    INCOMPARABLE = "incomparable"


@dataclass(frozen=True)
class LogicClass:
    signature: NodeSignature
    threshold_order: tuple
    band_map: tuple[int, ...]
    witness: Witness | None = None

    @property
    def verified(self) -> bool:
        return self.witness is not None

    def band_string(self) -> str:
        return "".join(str(v) for v in self.band_map)


class FactorGraph:
    """All parameter regions of one node: band maps crossed with threshold orders.

    Vertex ``v`` is ``(order_index, logic_index) = divmod(v, n_logic)``.
    """

    def __init__(self, signature: NodeSignature, budget: int = DEFAULT_BUDGET,
                 essential_rule: str = "strict"):
        self.signature = signature
        self.node = signature.node
        self.template = logic_template(signature.shape, budget)
        self.orders = list(itertools.permutations(signature.out_thresholds))
        self.essential_rule = essential_rule
        self.n_logic = len(self.template)

    def __len__(self):
        return self.n_logic * len(self.orders)

    def split(self, v: int) -> tuple[int, int]:
        return divmod(v, self.n_logic)

    def vertex_id(self, order_index: int, logic_index: int) -> int:
        return order_index * self.n_logic + logic_index

    def vertex(self, v: int) -> LogicClass:
        o, lg = self.split(v)
        t = self.template
        return LogicClass(self.signature, self.orders[o], t.band_maps[lg], t.witnesses[lg])

    def find(self, band_map, order=None) -> int:
        o = 0 if order is None else self.orders.index(tuple(order))
        return self.vertex_id(o, self.template.index[tuple(band_map)])

    @property
    def vertices(self) -> list[LogicClass]:
        return [self.vertex(v) for v in range(len(self))]

    @property
    def unverified_count(self) -> int:
        return len(self.template.unverified) * len(self.orders)

    def logic_essential(self) -> np.ndarray:
        t = self.template
        return t.essential if self.essential_rule == "strict" else t.essential_influence

    @property
    def essential_mask(self) -> np.ndarray:
        return np.tile(self.logic_essential(), len(self.orders))

    def essential(self) -> list[int]:
        return [int(v) for v in np.flatnonzero(self.essential_mask)]

    def neighbors(self, v: int, transpositions: bool = True) -> list[int]:
        o, lg = self.split(v)
        t = self.template
        out = [self.vertex_id(o, u) for u in t.up[lg]]
        bm = t.band_maps[lg]
        for b in range(len(bm)):
            if bm[b] > 0:
                cand = bm[:b] + (bm[b] - 1,) + bm[b + 1:]
                j = t.index.get(cand)
                if j is not None:
                    out.append(self.vertex_id(o, j))
        if transpositions:
            order = self.orders[o]
            for r in range(1, len(order)):
                # swap ranks r and r+1 when no combination sits between them
                if r not in bm:
                    swapped = list(order)
                    swapped[r - 1], swapped[r] = swapped[r], swapped[r - 1]
                    out.append(self.vertex_id(self.orders.index(tuple(swapped)), lg))
        return out

    def edges(self, transpositions: bool = True):
        for v in range(len(self)):
            for u in self.neighbors(v, transpositions):
                if u > v:
                    yield v, u

    def to_dot(self) -> str:
        sig = self.signature
        lines = [f'graph "PG({self.node})" {{']
        ess = self.essential_mask
        for v in range(len(self)):
            lc = self.vertex(v)
            order = "<".join(sig.threshold_name(t) for t in lc.threshold_order)
            color = ', color="blue"' if ess[v] else ""
            lines.append(f'  {v} [label="{lc.band_string()}\\n{order}"{color}];')
        for a, b in self.edges():
            lines.append(f"  {a} -- {b};")
        lines.append("}")
        return "\n".join(lines) + "\n"

    def records(self):
        sig = self.signature
        ess = self.essential_mask
        for v in range(len(self)):
            lc = self.vertex(v)
            yield {
                "vertex": v,
                "band_map": lc.band_string(),
                "threshold_order": [sig.threshold_name(t) for t in lc.threshold_order],
                "essential": bool(ess[v]),
                "realizable": lc.verified,
            }


def build_factor_graph(sig: NodeSignature, realizability_budget: int = DEFAULT_BUDGET,
                       essential_rule: str = "strict") -> FactorGraph:
    return FactorGraph(sig, realizability_budget, essential_rule)


def partial_order_compare(a: LogicClass, b: LogicClass) -> Order:
    if a.signature.shape != b.signature.shape or a.threshold_order != b.threshold_order:
        return Order.INCOMPARABLE
    le = all(x <= y for x, y in zip(a.band_map, b.band_map))
    ge = all(x >= y for x, y in zip(a.band_map, b.band_map))
    if le and ge:
        return Order.EQUAL
    if le:
        return Order.LESS
    if ge:
        return Order.GREATER
    return Order.INCOMPARABLE


def neighborhood(graphs, transpositions: bool = True) -> list[tuple[int, ...]]:
    """Tuples at product-graph distance <= 1 from the product of essential sets.

    Essential tuples come first, followed by the one-step perturbations in
    lexicographic order.
    """
    ess = [g.essential() for g in graphs]
    if any(not e for e in ess):
        log.info("empty essential set: neighborhood is empty")
        return []
    out = list(itertools.product(*ess))
    for i, g in enumerate(graphs):
        es = set(ess[i])
        ring = sorted({u for v in ess[i] for u in g.neighbors(v, transpositions)} - es)
        for combo in itertools.product(*(ess[:i] + [ring] + ess[i + 1:])):
            out.append(combo)
    return out


def one_edge_neighborhood(fg1: FactorGraph, fg2: FactorGraph, transpositions: bool = True):
    return set(neighborhood([fg1, fg2], transpositions))
