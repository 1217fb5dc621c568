"""Numeric parameter points inside combinatorial parameter regions.

A sample starts from each node's stored region witness (widened so every
inequality holds with the requested relative margin), then takes seeded
log-normal jitter steps, rejecting any step that leaves the region or drops
below the margin.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .logic import PHANTOM, Witness, margin_witness, witness_margin
from .stg import ABSORBING, REPELLING, ParameterContext

DEFAULT_MARGIN = 0.05
JITTER = 0.25


class SampleError(RuntimeError):
    pass


def _tkey(target, source) -> str:
    return f"theta_{'x' if target is PHANTOM else target}_{source}"


@dataclass
class NumericParameter:
    """Positive parameters keyed the way they are written out.

    ``theta[(target, source)]`` is the threshold of ``x_source`` acting on
    ``target`` (``target`` is ``None`` for a phantom threshold);
    ``ell[(target, source)]`` and ``delta[(target, source)]`` belong to the
    edge ``source -> target``; ``beta[n]`` is the constant production of a
    node without inputs.
    """

    gamma: dict = field(default_factory=dict)
    theta: dict = field(default_factory=dict)
    ell: dict = field(default_factory=dict)
    delta: dict = field(default_factory=dict)
    beta: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def items(self):
        for n in sorted(self.gamma):
            yield f"gamma{n}", self.gamma[n]
        for (t, m) in sorted(self.theta, key=lambda k: (k[1], -1 if k[0] is None else k[0])):
            yield _tkey(t, m), self.theta[(t, m)]
        for (n, m) in sorted(self.ell):
            yield f"ell_{n}_{m}", self.ell[(n, m)]
        for (n, m) in sorted(self.delta):
            yield f"delta_{n}_{m}", self.delta[(n, m)]
        for n in sorted(self.beta):
            yield f"beta{n}", self.beta[n]

    def to_text(self) -> str:
        lines = [f"# {k}={v}" for k, v in sorted(self.provenance.items())]
        lines += [f"{k}={float(v)!r}" for k, v in self.items()]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "NumericParameter":
        p = cls()
        for raw in re.split(r"[\n,]", text):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    k, v = body.split("=", 1)
                    p.provenance[k.strip()] = v.strip()
                continue
            if "=" not in line:
                raise ValueError(f"expected key=value, got {line!r}")
            key, value = (x.strip() for x in line.split("=", 1))
            v = float(value)
            # basal and jump rates may be zero (degenerate models), everything else positive
            floor_ok = key.startswith(("ell_", "delta_")) and v == 0
            if not (v > 0 or floor_ok) or not math.isfinite(v):
                raise ValueError(f"{key} must be positive, got {value}")
            if m := re.fullmatch(r"gamma(\d+)", key):
                p.gamma[int(m[1])] = v
            elif m := re.fullmatch(r"beta(\d+)", key):
                p.beta[int(m[1])] = v
            elif m := re.fullmatch(r"theta_(x|\d+)_(\d+)", key):
                t = None if m[1] == "x" else int(m[1])
                p.theta[(t, int(m[2]))] = v
            elif m := re.fullmatch(r"(ell|delta)_(\d+)_(\d+)", key):
                getattr(p, m[1])[(int(m[2]), int(m[3]))] = v
            else:
                raise ValueError(f"unknown parameter {key!r}")
        return p

    def node_witness(self, sig, order) -> Witness:
        n = sig.node
        return Witness(
            self.gamma[n],
            tuple(self.theta[(t, n)] for t in order),
            tuple(self.ell[(n, m)] for m, _ in sig.in_edges),
            tuple(self.delta[(n, m)] for m, _ in sig.in_edges),
            self.beta.get(n),
        )


def _jitter(w: Witness, rng, scale: float) -> Witness:
    f = lambda v: v * math.exp(rng.normal(0.0, scale))
    return Witness(
        f(w.gamma),
        tuple(sorted(f(t) for t in w.theta)),
        tuple(f(v) for v in w.ell),
        tuple(f(v) for v in w.delta),
        None if w.beta is None else f(w.beta),
    )


def sample_region(ctx: ParameterContext, pnode, seed: int = 0,
                  margin: float = DEFAULT_MARGIN, steps: int = 8,
                  max_tries: int = 2000) -> NumericParameter:
    """Sample a numeric point of the parameter region ``pnode`` (one vertex id per node)."""
    rng = np.random.default_rng(seed)
    out = NumericParameter(provenance={"pnode": ",".join(map(str, pnode)),
                                       "seed": seed, "margin": margin})
    for g, v in zip(ctx.graphs, pnode):
        sig = g.signature
        o, lg = g.split(v)
        t = g.template
        if lg >= len(t):
            raise SampleError(f"vertex {v} of node {sig.node} is not a verified region")
        bm = t.band_maps[lg]
        base = None
        # widen past the target so jitter has room to move
        for m in (4 * margin, 2 * margin, 1.5 * margin, margin):
            if m < 0.5:
                base = margin_witness(sig.shape, bm, m, t.witnesses[lg], seed=seed)
                if base is not None:
                    break
        if base is None:
            raise SampleError(f"node {sig.node}: no witness with margin {margin} for {bm}")
        w = base
        accepted = tries = misses = 0
        scale = JITTER
        while accepted < steps:
            tries += 1
            if tries > max_tries:
                raise SampleError(
                    f"node {sig.node}: rejection budget exhausted after {accepted} accepted steps"
                )
            cand = _jitter(w, rng, scale)
            if witness_margin(sig.shape, bm, cand) >= margin:
                w = cand
                accepted += 1
                misses = 0
            else:
                misses += 1
                if misses % 25 == 0:
                    scale /= 2
        n = sig.node
        order = g.orders[o]
        out.gamma[n] = w.gamma
        for target, th in zip(order, w.theta):
            out.theta[(target, n)] = th
        for (m, _), l, d in zip(sig.in_edges, w.ell, w.delta):
            out.ell[(n, m)] = l
            out.delta[(n, m)] = d
        if w.beta is not None:
            out.beta[n] = w.beta
    return out


def normalize_scale(net, p: NumericParameter, top: float = 3.0) -> NumericParameter:
    """Rescale ``p`` inside its region so every gamma is 1 and every node's largest threshold is ``top``.

    Scaling ``x_n`` by ``c`` (its thresholds and its production along with it) and
    dividing node ``n``'s equation by ``gamma_n`` leaves every region inequality
    unchanged, so the result lies in the same parameter region.
    """
    q = NumericParameter(dict(p.gamma), dict(p.theta), dict(p.ell), dict(p.delta),
                         dict(p.beta), dict(p.provenance))
    q.provenance["scale_top"] = top
    for n in range(net.node_count):
        keys = [k for k in q.theta if k[1] == n]
        c = top / max(q.theta[k] for k in keys)
        for k in keys:
            q.theta[k] *= c
        f = c / q.gamma[n]
        q.gamma[n] = 1.0
        ins = net.inputs(n)
        if not ins:
            q.beta[n] *= f
            continue
        # one factor for the activator sum, one per repressor
        factors = any(sg > 0 for _, sg in ins) + sum(sg < 0 for _, sg in ins)
        per = f ** (1.0 / factors)
        for m, _ in ins:
            q.ell[(n, m)] *= per
            q.delta[(n, m)] *= per
    return q


def check_region(ctx: ParameterContext, pnode, p: NumericParameter) -> float:
    """Smallest relative inequality gap of ``p`` over the region (negative if outside)."""
    worst = math.inf
    for g, v in zip(ctx.graphs, pnode):
        o, lg = g.split(v)
        w = p.node_witness(g.signature, g.orders[o])
        worst = min(worst, witness_margin(g.signature.shape, g.template.band_maps[lg], w))
    return worst


# -- numeric wall labels ----------------------------------------------------------------


def _representative(p: NumericParameter, n: int, band: int) -> float:
    ths = sorted(v for (t, m), v in p.theta.items() if m == n)
    if band == 0:
        return ths[0] / 2.0
    if band == len(ths):
        return ths[-1] * 2.0
    return (ths[band - 1] + ths[band]) / 2.0


def numeric_production(net, p: NumericParameter, n: int, x) -> float:
    ins = net.inputs(n)
    if not ins:
        return p.beta[n]
    act = [(m, s) for m, s in ins if s > 0]
    rep = [(m, s) for m, s in ins if s < 0]
    total = 1.0
    if act:
        total = sum(p.ell[(n, m)] + (p.delta[(n, m)] if x[m] > p.theta[(n, m)] else 0.0)
                    for m, _ in act)
    for m, _ in rep:
        total *= p.ell[(n, m)] + (p.delta[(n, m)] if x[m] < p.theta[(n, m)] else 0.0)
    return total


def numeric_labeling(ctx: ParameterContext, pnode, p: NumericParameter) -> dict:
    """Wall labels from the sign of -gamma*theta + Lambda at cell representatives.

    Only for networks without repressing self-edges (no thin bands).
    """
    net = ctx.net
    if any(net.self_repressing(n) for n in range(net.node_count)):
        raise ValueError("numeric labels need a network without repressing self-edges")
    orders, _ = ctx.split(pnode)
    lay = ctx.layout(orders)
    labels = {}
    for cell in lay.cells:
        for n in range(net.node_count):
            if cell[n] + 1 >= lay.shape[n]:
                continue
            upper = cell[:n] + (cell[n] + 1,) + cell[n + 1:]
            ths = sorted(v for (t, m), v in p.theta.items() if m == n)
            wall = ths[cell[n]]
            g = p.gamma[n]
            lo_x = [_representative(p, m, cell[m]) for m in range(net.node_count)]
            up_x = [_representative(p, m, upper[m]) for m in range(net.node_count)]
            lam_lo = numeric_production(net, p, n, lo_x)
            lam_up = numeric_production(net, p, n, up_x)
            labels[(cell, upper, cell)] = ABSORBING if lam_lo - g * wall > 0 else REPELLING
            labels[(cell, upper, upper)] = ABSORBING if lam_up - g * wall < 0 else REPELLING
    return labels
