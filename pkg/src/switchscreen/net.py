"""Small signed regulatory networks: parsing, validation and the 3-node census.

A network lives on nodes ``0..N-1``.  Edge ``(source, target, sign)`` means
``source`` activates (``+1``) or represses (``-1``) ``target``.  The edge
coefficient ``a[i][j]`` describes the edge from ``j`` to ``i``.

Production at a node follows one fixed convention: the activator terms are
summed and the sum is multiplied by one factor per repressor.  The text format
mirrors that, one line per node::

    x0 : (x0 + x1 + x2)
    x1 : (x0)(~x2)
    x2 : x0
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Iterator

ACTIVATE = 1
REPRESS = -1

# base-3 digit for each coefficient value
_DIGIT = {-1: 0, 0: 1, 1: 2}
_COEF = {0: -1, 1: 0, 2: 1}

_NAME = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


class NetworkError(ValueError):
    """Raised for malformed or inconsistent network descriptions."""


@dataclass(frozen=True)
class RegulatoryNetwork:
    node_count: int
    edges: frozenset = field(default_factory=frozenset)
    input_node: int = 0
    output_node: int | None = None
    name: str = ""

    def __post_init__(self):
        if self.node_count < 1:
            raise NetworkError("a network needs at least one node")
        if self.output_node is None:
            object.__setattr__(self, "output_node", min(2, self.node_count - 1))
        seen = set()
        for src, tgt, sign in self.edges:
            if not (0 <= src < self.node_count and 0 <= tgt < self.node_count):
                raise NetworkError(f"edge {src}->{tgt} references an unknown node")
            if sign not in (ACTIVATE, REPRESS):
                raise NetworkError(f"edge sign must be +1 or -1, got {sign}")
            if (src, tgt) in seen:
                raise NetworkError(f"duplicate edge {src}->{tgt}")
            seen.add((src, tgt))
        for role, idx in (("input", self.input_node), ("output", self.output_node)):
            if not 0 <= idx < self.node_count:
                raise NetworkError(f"{role} node {idx} out of range")

    # -- structure -----------------------------------------------------------

    def coefficient(self, target: int, source: int) -> int:
        """Edge coefficient a_{target,source} in {-1, 0, +1}."""
        for src, tgt, sign in self.edges:
            if src == source and tgt == target:
                return sign
        return 0

    def coefficients(self) -> tuple[tuple[int, ...], ...]:
        a = [[0] * self.node_count for _ in range(self.node_count)]
        for src, tgt, sign in self.edges:
            a[tgt][src] = sign
        return tuple(tuple(row) for row in a)

    def inputs(self, node: int) -> tuple[tuple[int, int], ...]:
        """In-edges of ``node`` as ``(source, sign)``: activators first, then repressors."""
        act = sorted(src for src, tgt, sign in self.edges if tgt == node and sign > 0)
        rep = sorted(src for src, tgt, sign in self.edges if tgt == node and sign < 0)
        return tuple((s, ACTIVATE) for s in act) + tuple((s, REPRESS) for s in rep)

    def outputs(self, node: int) -> tuple[int, ...]:
        return tuple(sorted(tgt for src, tgt, _ in self.edges if src == node))

    def self_repressing(self, node: int) -> bool:
        return (node, node, REPRESS) in self.edges

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    # -- text forms ----------------------------------------------------------

    def node_name(self, node: int) -> str:
        return f"x{node}"

    def expression(self, node: int) -> str:
        ins = self.inputs(node)
        act = [self.node_name(s) for s, sign in ins if sign > 0]
        rep = [self.node_name(s) for s, sign in ins if sign < 0]
        parts = []
        if act:
            parts.append("(" + " + ".join(act) + ")")
        parts.extend(f"(~{r})" for r in rep)
        return "".join(parts)

    def to_spec(self) -> str:
        return "\n".join(
            f"{self.node_name(n)} : {self.expression(n)}".rstrip()
            for n in range(self.node_count)
        ) + "\n"

    def edge_string(self) -> str:
        """Compact edge list such as ``0->1 1->2 2-|0``; ``-`` for no edges."""
        items = sorted(self.edges)
        if not items:
            return "-"
        return " ".join(f"{s}{'->' if sign > 0 else '-|'}{t}" for s, t, sign in items)

    def __str__(self) -> str:
        return self.name or self.edge_string()


def parse_network(spec_text: str, name: str = "") -> RegulatoryNetwork:
    """Parse the line-per-node text format.

    Blank lines and ``#`` comments are ignored; ``;`` may separate nodes on a
    single line.
    """
    lines = []
    for raw in spec_text.replace(";", "\n").splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            lines.append(line)
    if not lines:
        raise NetworkError("empty network description")

    names: list[str] = []
    exprs: list[str] = []
    for line in lines:
        if ":" not in line:
            raise NetworkError(f"expected '<name> : <expr>', got {line!r}")
        lhs, rhs = line.split(":", 1)
        lhs = lhs.strip()
        if not _NAME.match(lhs):
            raise NetworkError(f"invalid node name {lhs!r}")
        if lhs in names:
            raise NetworkError(f"duplicate node definition {lhs!r}")
        names.append(lhs)
        exprs.append(rhs.strip())

    index = {n: i for i, n in enumerate(names)}
    edges = set()
    for target, expr in enumerate(exprs):
        regulators = set()
        for source_name, sign in _parse_expression(expr):
            if source_name not in index:
                raise NetworkError(f"unknown node {source_name!r} in expression for {names[target]!r}")
            if source_name in regulators:
                raise NetworkError(f"duplicate regulator {source_name!r} in expression for {names[target]!r}")
            regulators.add(source_name)
            edges.add((index[source_name], target, sign))
    return RegulatoryNetwork(len(names), frozenset(edges), name=name)


def _parse_expression(expr: str) -> list[tuple[str, int]]:
    expr = expr.replace(" ", "").replace("\t", "")
    if not expr:
        return []
    if "(" not in expr and ")" not in expr:
        groups = [expr]
    else:
        groups = re.findall(r"\(([^()]*)\)", expr)
        if "".join(f"({g})" for g in groups) != expr:
            raise NetworkError(f"malformed expression {expr!r}")
    out = []
    sum_groups = 0
    for g in groups:
        terms = g.split("+")
        if any(t == "" for t in terms):
            raise NetworkError(f"malformed expression {expr!r}")
        if any(t.startswith("~") for t in terms):
            if len(terms) != 1:
                raise NetworkError(f"repressors must be separate factors in {expr!r}")
            term = terms[0][1:]
            if not _NAME.match(term):
                raise NetworkError(f"malformed term {terms[0]!r}")
            out.append((term, REPRESS))
        else:
            sum_groups += 1
            for t in terms:
                if not _NAME.match(t):
                    raise NetworkError(f"malformed term {t!r}")
                out.append((t, ACTIVATE))
    if sum_groups > 1:
        raise NetworkError(f"activators must form a single sum in {expr!r}")
    return out


# -- three node census ----------------------------------------------------------


def network_id(net: RegulatoryNetwork) -> int:
    """Base-3 code of (a00, a01, ..., a22), a00 most significant."""
    if net.node_count != 3:
        raise NetworkError("canonical ids are defined for 3-node networks")
    code = 0
    for row in net.coefficients():
        for a in row:
            code = code * 3 + _DIGIT[a]
    return code


def network_from_id(code: int) -> RegulatoryNetwork:
    if not 0 <= code < 3**9:
        raise NetworkError(f"network id {code} out of range")
    digits = []
    for _ in range(9):
        code, d = divmod(code, 3)
        digits.append(d)
    digits.reverse()
    edges = set()
    for k, d in enumerate(digits):
        a = _COEF[d]
        if a:
            tgt, src = divmod(k, 3)
            edges.add((src, tgt, a))
    return RegulatoryNetwork(3, frozenset(edges))


def is_trivial(net: RegulatoryNetwork) -> bool:
    if net.node_count != 3:
        raise NetworkError("triviality is defined for 3-node networks")
    a = net.coefficients()
    return abs(a[2][0] * a[2][1]) + abs(a[2][0] * a[0][1]) + abs(a[2][1] * a[1][0]) == 0


def is_consistent(net: RegulatoryNetwork) -> bool:
    """True iff every node's out-edges all carry the same sign."""
    signs: dict[int, set] = {}
    for src, _, sign in net.edges:
        signs.setdefault(src, set()).add(sign)
    return all(len(s) == 1 for s in signs.values())


def only_sign(net: RegulatoryNetwork, sign: int) -> bool:
    return bool(net.edges) and all(e[2] == sign for e in net.edges)


@dataclass(frozen=True)
class CensusPolicy:
    exclude_trivial: bool = False
    # keep only the all-activator network among the 512 complete ones
    nine_edge_rule: bool = False
    max_edges: int | None = None
    only_sign: int | None = None


@dataclass
class NetworkCensus:
    policy: CensusPolicy
    networks: list[tuple[int, RegulatoryNetwork]]

    def __len__(self) -> int:
        return len(self.networks)

    def __iter__(self) -> Iterator[tuple[int, RegulatoryNetwork]]:
        return iter(self.networks)

    def ids(self) -> list[int]:
        return [i for i, _ in self.networks]

    def records(self) -> Iterator[str]:
        for nid, net in self.networks:
            yield "\t".join(
                [str(nid), net.edge_string(), str(net.n_edges),
                 str(int(is_trivial(net))), str(int(is_consistent(net)))]
            )


ALL_ACTIVATOR_ID = network_id(
    RegulatoryNetwork(3, frozenset((s, t, 1) for s, t in itertools.product(range(3), repeat=2)))
)


def admit(net: RegulatoryNetwork, policy: CensusPolicy) -> bool:
    if policy.exclude_trivial and is_trivial(net):
        return False
    if policy.nine_edge_rule and net.n_edges == 9 and network_id(net) != ALL_ACTIVATOR_ID:
        return False
    if policy.max_edges is not None and net.n_edges > policy.max_edges:
        return False
    if policy.only_sign is not None and not only_sign(net, policy.only_sign):
        return False
    return True


def enumerate_census(policy: CensusPolicy = CensusPolicy()) -> NetworkCensus:
    nets = []
    for code in range(3**9):
        net = network_from_id(code)
        if admit(net, policy):
            nets.append((code, net))
    return NetworkCensus(policy, nets)
