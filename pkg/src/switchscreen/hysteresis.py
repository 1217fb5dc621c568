"""Hysteresis along monotone input paths, network scores and the census screen.

The input node's factor graph supplies the paths: within one threshold order
its band maps form a DAG whose edges raise a single band value by one.  A
path of at least three vertices exhibits ascending hysteresis for a fixed
choice of the other nodes' vertices when

* at the first vertex all stable states have output coordinate 0,
* at the last vertex all stable states have output coordinate > 0,
* at some interior vertex both kinds coexist.

Stable states are minimal Morse nodes labelled FP, which in these state
transition graphs are exactly the cells without outgoing edges.  That makes
the per-vertex test a bitmask intersection, and the number of hysteretic
paths a dynamic program over the DAG instead of an enumeration.
"""

from __future__ import annotations

import enum
import hashlib
import itertools
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np

from . import __version__
from .kernels import batch_classes, path_counts, vertex_classes
from .logic import DEFAULT_BUDGET, LogicTemplate, neighborhood
from .net import CensusPolicy, RegulatoryNetwork, is_consistent, network_from_id, network_id
from .stg import Layout, ParameterContext, morse_graph, stg_for

log = logging.getLogger(__name__)

ROBUST_THRESHOLD = 0.5


class Direction(enum.Enum):
    ASCENDING = "asc"
    DESCENDING = "desc"


class Mode(enum.Enum):
    ESSENTIAL_PARTIAL = "essential-partial"
    ESSENTIAL_FULL = "essential-full"
    PERTURBED_PARTIAL = "perturbed-partial"
    PERTURBED_FULL = "perturbed-full"

    @property
    def full(self) -> bool:
        return self in (Mode.ESSENTIAL_FULL, Mode.PERTURBED_FULL)

    @property
    def perturbed(self) -> bool:
        return self in (Mode.PERTURBED_PARTIAL, Mode.PERTURBED_FULL)


class PathError(ValueError):
    pass


# -- path lattices --------------------------------------------------------------------


@dataclass
class PathLattice:
    """Topological order, CSR edges and path totals for one logic template."""

    topo: np.ndarray
    offsets: np.ndarray
    targets: np.ndarray
    vmin: int
    vmax: int
    total_partial: int  # paths with at least three vertices
    total_full: int  # such paths from the minimum to the maximum

    @property
    def n_vertices(self) -> int:
        return len(self.offsets) - 1


@lru_cache(maxsize=None)
def _lattice_for(shape, budget) -> PathLattice:
    from .logic import logic_template
    return path_lattice(logic_template(shape, budget))


def path_lattice(t: LogicTemplate) -> PathLattice:
    offsets, targets = t.edge_arrays()
    # every edge raises the band sum by one, so sorting by it is topological
    topo = np.argsort(t.table.sum(axis=1), kind="stable").astype(np.int32)
    n = len(t)
    ends = [1] * n  # paths ending at v, any length
    from_min = [0] * n
    from_min[t.minimum] = 1
    off, tgt = offsets.tolist(), targets.tolist()
    for v in topo.tolist():
        for i in range(off[v], off[v + 1]):
            w = tgt[i]
            ends[w] += ends[v]
            from_min[w] += from_min[v]
    n_edges = len(tgt)
    total_partial = sum(ends) - n - n_edges
    direct = int(t.maximum in t.up[t.minimum])
    total_full = from_min[t.maximum] - direct if t.maximum != t.minimum else 0
    return PathLattice(topo, offsets, targets, t.minimum, t.maximum,
                       total_partial, total_full)


def endpoint_tests(classes: np.ndarray, direction: Direction, lax: bool = False):
    """Per-vertex start / interior / end predicates from the class bits.

    Bit 0 marks a stable state with output coordinate 0, bit 1 one above it.
    """
    lo, hi = (1, 2) if direction is Direction.ASCENDING else (2, 1)
    if lax:
        start = (classes & lo) != 0
        end = (classes & hi) != 0
    else:
        start = classes == lo
        end = classes == hi
    mid = classes == 3
    return (start.astype(np.uint8), mid.astype(np.uint8), end.astype(np.uint8))


# -- explicit route ---------------------------------------------------------------------


@dataclass
class InputPath:
    vertices: list[int]
    full: bool = False

    def __len__(self):
        return len(self.vertices)


def validate_path(graph, path: InputPath) -> None:
    if len(path) < 3:
        raise PathError("path too short")
    order = None
    t = graph.template
    for a, b in zip(path.vertices, path.vertices[1:]):
        oa, la = graph.split(a)
        ob, lb = graph.split(b)
        if order is None:
            order = oa
        if oa != order or ob != order or lb not in t.up[la]:
            raise PathError(f"{a} -> {b} is not an increasing factor-graph edge")
    if path.full:
        first = graph.split(path.vertices[0])[1]
        last = graph.split(path.vertices[-1])[1]
        if first != t.minimum or last != t.maximum:
            raise PathError("a full path runs from the minimal to the maximal vertex")


def stable_states(ctx: ParameterContext, pnode) -> list[tuple]:
    return morse_graph(stg_for(ctx, pnode)).minimal_fixed_points()


def detect_hysteresis(ctx: ParameterContext, path: InputPath, others,
                      direction: Direction = Direction.ASCENDING,
                      lax_endpoints: bool = False) -> bool:
    """Decide hysteresis from explicit Morse graphs along ``path``.

    ``others`` holds the vertex ids of every node except the input node, in
    node order.
    """
    net = ctx.net
    validate_path(ctx.graphs[net.input_node], path)
    out = net.output_node
    classes = []
    for v in path.vertices:
        pnode = list(others)
        pnode.insert(net.input_node, v)
        fps = stable_states(ctx, tuple(pnode))
        c = 0
        for cell in fps:
            c |= 1 if cell[out] == 0 else 2
        classes.append(c)
    start, mid, end = endpoint_tests(np.array(classes, dtype=np.uint8), direction, lax_endpoints)
    return bool(start[0] and end[-1] and mid[1:-1].any())


def enumerate_paths(graph, order_index: int = 0, full: bool = False, limit: int | None = None):
    """Yield every monotone path with at least three vertices (small graphs only)."""
    t = graph.template
    starts = [t.minimum] if full else range(len(t))
    produced = 0
    for s0 in starts:
        stack = [[s0]]
        while stack:
            p = stack.pop()
            if len(p) >= 3 and (not full or p[-1] == t.maximum):
                yield InputPath([graph.vertex_id(order_index, u) for u in p], full)
                produced += 1
                if limit is not None and produced >= limit:
                    return
            for w in t.up[p[-1]]:
                stack.append(p + [w])


# -- fast scoring -------------------------------------------------------------------------


def _pack(mask: np.ndarray) -> np.ndarray:
    """Pack a ``(rows, cells)`` boolean array into ``(rows, words)`` uint64."""
    rows, nc = mask.shape
    words = (nc + 63) // 64
    padded = np.zeros((rows, words * 64), dtype=bool)
    padded[:, :nc] = mask
    packed = np.packbits(padded, axis=1, bitorder="little")
    return np.ascontiguousarray(packed.view("<u8").astype(np.uint64))


def _unique_rows(a: np.ndarray):
    """Row-wise unique with inverse indices via 1-D uniques, one word at a time."""
    u, key = np.unique(a[:, 0], return_inverse=True)
    key = key.reshape(-1).astype(np.int64)
    for k in range(1, a.shape[1]):
        uk, ik = np.unique(a[:, k], return_inverse=True)
        key = key * len(uk) + ik.reshape(-1)
        key_u, key = np.unique(key, return_inverse=True)
        key = key.reshape(-1)
    first = np.zeros(key.max() + 1 if len(key) else 0, dtype=np.int64)
    first[key[::-1]] = np.arange(len(key) - 1, -1, -1)
    return a[first], key


def _stationary_words(lay: Layout, graphs, n: int) -> np.ndarray:
    table = graphs[n].template.table
    ok = (table[:, lay.comb_a[n]] >= lay.lo[n]) & (table[:, lay.comb_b[n]] <= lay.hi[n])
    return _pack(ok)


@dataclass
class Tally:
    hysteretic: int = 0
    total: int = 0

    @property
    def percent(self) -> float:
        return 100.0 * self.hysteretic / self.total if self.total else 0.0


@dataclass
class ScoreSet:
    """Tallies for every (direction, mode) plus bookkeeping counts."""

    tallies: dict
    n_essential_pairs: int
    n_perturbed_pairs: int
    n_paths_partial: int
    n_paths_full: int
    unverified: int

    def tally(self, direction: Direction, mode: Mode) -> Tally:
        return self.tallies[(direction, mode)]

    def percent(self, direction: Direction, mode: Mode) -> float:
        return self.tally(direction, mode).percent


class NetworkScorer:
    def __init__(self, net: RegulatoryNetwork, budget: int = DEFAULT_BUDGET,
                 essential_rule: str = "strict", transpositions: bool = True,
                 lax_endpoints: bool = False):
        self.net = net
        self.budget = budget
        self.transpositions = transpositions
        self.lax = lax_endpoints
        self.ctx = ParameterContext.build(net, budget, essential_rule)
        self.input = net.input_node
        self.others = [n for n in range(net.node_count) if n != self.input]
        self._memo: dict = {}

    @property
    def input_graph(self):
        return self.ctx.graphs[self.input]

    def pair_sets(self):
        graphs = [self.ctx.graphs[n] for n in self.others]
        ess = [g.essential() for g in graphs]
        essential = list(itertools.product(*ess))
        perturbed = neighborhood(graphs, self.transpositions) if essential else []
        return essential, perturbed

    def _results(self, classes: np.ndarray, lat: PathLattice):
        key = classes.tobytes()
        res = self._memo.get(key)
        if res is None:
            res = {}
            for d in Direction:
                start, mid, end = endpoint_tests(classes, d, self.lax)
                res[d] = path_counts(lat.topo, lat.offsets, lat.targets,
                                     start, mid, end, lat.vmin, lat.vmax)
            self._memo[key] = res
        return res

    def blocks(self):
        """The perturbed pair set as a union of disjoint Cartesian products.

        The first block is the product of essential sets; block ``i + 1``
        swaps node ``others[i]``'s essential set for its one-step ring.
        """
        graphs = [self.ctx.graphs[n] for n in self.others]
        ess = [g.essential() for g in graphs]
        if any(not e for e in ess):
            return []
        rings = []
        for g, e in zip(graphs, ess):
            es = set(e)
            rings.append(sorted({u for v in e for u in g.neighbors(v, self.transpositions)} - es))
        out = [(ess, True)]
        for i in range(len(graphs)):
            if rings[i]:
                out.append((ess[:i] + [rings[i]] + ess[i + 1:], False))
        return out

    def _words(self, lay: Layout, n: int) -> np.ndarray:
        cache = lay.__dict__.setdefault("_words", {})
        w = cache.get(n)
        if w is None:
            w = cache[n] = _stationary_words(lay, self.ctx.graphs, n)
        return w

    def _joint_masks(self, lay: Layout, logic_sets):
        """Distinct AND-combinations of the other nodes' sink masks, with multiplicities."""
        masks = counts = None
        for n, idx in zip(self.others, logic_sets):
            u, inv = _unique_rows(self._words(lay, n)[idx])
            c = np.bincount(inv, minlength=len(u))
            if masks is None:
                masks, counts = u, c.astype(np.int64)
                continue
            prod = (masks[:, None, :] & u[None, :, :]).reshape(-1, u.shape[1])
            weights = (counts[:, None] * c[None, :]).reshape(-1)
            masks, inv = _unique_rows(prod)
            counts = np.bincount(inv, weights=weights, minlength=len(masks))
            counts = counts.astype(np.int64)
        return masks, counts

    def score(self) -> ScoreSet:
        ctx = self.ctx
        g0 = self.input_graph
        lat = _lattice_for(g0.signature.shape, self.budget)
        n_orders0 = len(g0.orders)
        hyst = {(d, m): 0 for d in Direction for m in Mode}
        n_ess = n_pert = 0
        out = self.net.output_node
        seen: dict = {}  # class vector -> [classes, essential weight, total weight]

        for vertex_sets, essential in self.blocks():
            size = 1
            for vs in vertex_sets:
                size *= len(vs)
            n_pert += size
            if essential:
                n_ess += size
            # per node: threshold order -> logic indices
            by_order = []
            for n, vs in zip(self.others, vertex_sets):
                g = ctx.graphs[n]
                groups: dict = {}
                for v in vs:
                    o, lg = g.split(v)
                    groups.setdefault(o, []).append(lg)
                by_order.append([(o, np.array(l)) for o, l in sorted(groups.items())])
            for combo in itertools.product(*by_order):
                for o0 in range(n_orders0):
                    orders = [o for o, _ in combo]
                    orders.insert(self.input, o0)
                    lay = ctx.layout(tuple(orders))
                    s0 = self._words(lay, self.input)
                    masks, counts = self._joint_masks(lay, [l for _, l in combo])
                    j0 = _pack(np.array([[c[out] == 0 for c in lay.cells]]))[0]
                    classes = batch_classes(s0, np.ascontiguousarray(masks), j0)
                    for r in range(len(classes)):
                        key = classes[r].tobytes()
                        entry = seen.get(key)
                        if entry is None:
                            entry = seen[key] = [classes[r], 0, 0]
                        w = int(counts[r])
                        entry[2] += w
                        if essential:
                            entry[1] += w

        for classes, w_ess, w_all in seen.values():
            res = self._results(classes, lat)
            for d in Direction:
                partial, full = res[d]
                hyst[(d, Mode.PERTURBED_PARTIAL)] += partial * w_all
                hyst[(d, Mode.PERTURBED_FULL)] += full * w_all
                hyst[(d, Mode.ESSENTIAL_PARTIAL)] += partial * w_ess
                hyst[(d, Mode.ESSENTIAL_FULL)] += full * w_ess

        tallies = {}
        for d in Direction:
            for mode in Mode:
                pairs = n_pert if mode.perturbed else n_ess
                paths = lat.total_full if mode.full else lat.total_partial
                tallies[(d, mode)] = Tally(hyst[(d, mode)], n_orders0 * paths * pairs)
        unverified = sum(g.unverified_count for g in ctx.graphs)
        return ScoreSet(tallies, n_ess, n_pert,
                        lat.total_partial * n_orders0, lat.total_full * n_orders0, unverified)


def score_network(net: RegulatoryNetwork, direction: Direction = Direction.ASCENDING,
                  mode: Mode = Mode.ESSENTIAL_PARTIAL, **kwargs) -> float:
    return NetworkScorer(net, **kwargs).score().percent(direction, mode)


# -- reports ----------------------------------------------------------------------------


@dataclass
class HysteresisReport:
    id: int | None
    edges: str
    n_edges: int
    consistent: bool
    direction: str
    hysteresis: float
    perturbed: float
    robustness: float | None
    full: float
    perturbed_full: float
    classification: str
    counts: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)

    @classmethod
    def from_scores(cls, net: RegulatoryNetwork, scores: ScoreSet, direction: Direction):
        h = scores.tally(direction, Mode.ESSENTIAL_PARTIAL)
        p = scores.tally(direction, Mode.PERTURBED_PARTIAL)
        rob = robustness(h.percent, p.percent)
        flags = []
        if h.total == 0:
            flags.append("empty-denominator")
        nid = network_id(net) if net.node_count == 3 else None
        return cls(
            id=nid,
            edges=net.edge_string(),
            n_edges=net.n_edges,
            consistent=is_consistent(net),
            direction=direction.value,
            hysteresis=round(h.percent, 6),
            perturbed=round(p.percent, 6),
            robustness=None if rob is None else round(rob, 6),
            full=round(scores.percent(direction, Mode.ESSENTIAL_FULL), 6),
            perturbed_full=round(scores.percent(direction, Mode.PERTURBED_FULL), 6),
            classification=classify(rob),
            counts={
                "paths": scores.n_paths_partial,
                "full_paths": scores.n_paths_full,
                "essential_pairs": scores.n_essential_pairs,
                "neighborhood_pairs": scores.n_perturbed_pairs,
                "unverified": scores.unverified,
            },
            flags=flags,
        )

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def robustness(hysteresis: float, perturbed: float) -> float | None:
    if hysteresis <= 0:
        return None
    return perturbed / hysteresis


def classify(rob: float | None) -> str:
    if rob is None:
        return "none"
    return "Robust" if rob > ROBUST_THRESHOLD else "Fragile"


def analyze(net: RegulatoryNetwork, direction: Direction = Direction.ASCENDING,
            **kwargs) -> HysteresisReport:
    return HysteresisReport.from_scores(net, NetworkScorer(net, **kwargs).score(), direction)


# -- census screen ------------------------------------------------------------------------


@dataclass(frozen=True)
class ScreenConfig:
    direction: str = "asc"
    budget: int = DEFAULT_BUDGET
    essential_rule: str = "strict"
    transpositions: bool = True
    lax_endpoints: bool = False
    seed: int = 0
    # census policy
    exclude_trivial: bool = True
    nine_edge_rule: bool = True
    max_edges: int | None = None
    only_sign: int | None = None
    modes: tuple = ("EP", "PP", "EF", "PF")

    def policy(self) -> CensusPolicy:
        return CensusPolicy(self.exclude_trivial, self.nine_edge_rule, self.max_edges, self.only_sign)

    def digest(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _screen_one(args):
    code, cfg = args
    net = network_from_id(code)
    try:
        rep = analyze(net, Direction(cfg.direction), budget=cfg.budget,
                      essential_rule=cfg.essential_rule,
                      transpositions=cfg.transpositions,
                      lax_endpoints=cfg.lax_endpoints)
        return code, rep, None
    except Exception as exc:  # recorded, never fatal for the screen
        log.warning("network %d failed: %s", code, exc)
        return code, None, f"{type(exc).__name__}: {exc}"


@dataclass
class ScreenResult:
    reports: list
    failures: list


def screen_census(census, config: ScreenConfig = ScreenConfig(), jobs: int = 1,
                  progress=None) -> ScreenResult:
    tasks = [(code, config) for code, _ in census]
    results = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            for i, r in enumerate(ex.map(_screen_one, tasks, chunksize=32)):
                results.append(r)
                if progress:
                    progress(i + 1, len(tasks))
    else:
        for i, t in enumerate(tasks):
            results.append(_screen_one(t))
            if progress:
                progress(i + 1, len(tasks))
    reports = [r for _, r, err in results if r is not None]
    failures = [(code, err) for code, r, err in results if r is None]
    reports.sort(key=lambda r: (-r.hysteresis, -r.perturbed, r.id))
    return ScreenResult(reports, failures)


# -- results database -----------------------------------------------------------------------

DB_FORMAT = "switchscreen-db/1"


def write_database(path: str, result: ScreenResult, config: ScreenConfig) -> None:
    """Write one JSON record per line plus ``<path>.idx`` mapping ids to byte offsets."""
    header = {
        "format": DB_FORMAT,
        "version": __version__,
        "config_hash": config.digest(),
        "seed": config.seed,
        "config": asdict(config),
        "records": len(result.reports),
        "failures": [{"id": c, "error": e} for c, e in result.failures],
    }
    index = {}
    with open(path, "wb") as fh:
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode())
        for rank, rep in enumerate(result.reports, 1):
            index[rep.id] = fh.tell()
            rec = asdict(rep)
            rec["rank"] = rank
            fh.write((json.dumps(rec, sort_keys=True) + "\n").encode())
    with open(path + ".idx", "w") as fh:
        for nid in sorted(index):
            fh.write(f"{nid}\t{index[nid]}\n")


class Database:
    def __init__(self, path: str):
        self.path = path
        with open(path, "rb") as fh:
            self.header = json.loads(fh.readline())
        if self.header.get("format") != DB_FORMAT:
            raise ValueError(f"{path}: not a results database")
        self.index = {}
        idx = path + ".idx"
        if os.path.exists(idx):
            with open(idx) as fh:
                for line in fh:
                    nid, off = line.split("\t")
                    self.index[int(nid)] = int(off)

    def get(self, nid: int) -> dict | None:
        off = self.index.get(nid)
        if off is None:
            return None
        with open(self.path, "rb") as fh:
            fh.seek(off)
            return json.loads(fh.readline())

    def __iter__(self):
        with open(self.path, "rb") as fh:
            fh.readline()
            for line in fh:
                yield json.loads(line)
