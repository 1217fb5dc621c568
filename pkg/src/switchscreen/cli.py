"""Command-line entry point: ``switchscreen screen|query|inspect|hill``.

Exit codes: 0 success, 1 configuration error, 2 partial failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .hysteresis import (
    Database,
    Direction,
    HysteresisReport,
    NetworkScorer,
    ScreenConfig,
    _lattice_for,
    screen_census,
    write_database,
)
from .logic import DEFAULT_BUDGET
from .net import NetworkError, enumerate_census, network_from_id, network_id, parse_network

log = logging.getLogger("switchscreen")

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 1, 2

MODE_FIELDS = {"EP": "hysteresis", "PP": "perturbed", "EF": "full", "PF": "perturbed_full"}


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _header(prefix: str, config_hash: str, seed, **extra) -> str:
    parts = [f"switchscreen version={__version__}", f"config_hash={config_hash}", f"seed={seed}"]
    parts += [f"{k}={v}" for k, v in extra.items()]
    return f"{prefix} " + " ".join(parts) + "\n"


def _digest(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, default=str).encode()).hexdigest()[:16]


def _write(path: str, text: str) -> None:
    with open(path, "w") as fh:
        fh.write(text)


def _load_network(args):
    if args.spec:
        try:
            with open(args.spec) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read {args.spec}: {exc}") from None
        try:
            return None, parse_network(text, name=os.path.basename(args.spec))
        except NetworkError as exc:
            raise ConfigError(str(exc)) from None
    if args.network is None:
        raise ConfigError("give a network id or --spec FILE")
    if not 0 <= args.network < 3**9:
        raise ConfigError(f"network id must be in [0, {3**9 - 1}]")
    return args.network, network_from_id(args.network)


def _modes(text: str) -> tuple:
    modes = tuple(m.strip().upper() for m in text.split(",") if m.strip())
    bad = [m for m in modes if m not in MODE_FIELDS]
    if bad or not modes:
        raise ConfigError(f"--modes takes a comma list of {','.join(MODE_FIELDS)}; got {text!r}")
    return modes


# -- screen -------------------------------------------------------------------------------


def cmd_screen(args) -> int:
    only = 1 if args.only_activators else -1 if args.only_repressors else None
    cfg = ScreenConfig(
        direction=args.direction, budget=args.budget, essential_rule=args.essential_rule,
        transpositions=not args.no_transpositions, lax_endpoints=args.lax_endpoints,
        seed=args.seed, max_edges=args.max_edges, only_sign=only, modes=_modes(args.modes),
    )
    if args.max_edges is not None and not 0 <= args.max_edges <= 9:
        raise ConfigError("--max-edges must be between 0 and 9")
    census = enumerate_census(cfg.policy())
    os.makedirs(args.out, exist_ok=True)
    h = cfg.digest()

    lines = [_header("#", h, cfg.seed), "#id\tedges\tn_edges\ttrivial\tconsistent\n"]
    lines += [r + "\n" for r in census.records()]
    _write(os.path.join(args.out, "census.tsv"), "".join(lines))

    def progress(i, n):
        if not args.quiet and (i % 500 == 0 or i == n):
            print(f"screened {i}/{n}", file=sys.stderr)

    result = screen_census(census, cfg, jobs=args.jobs, progress=progress)
    db = os.path.join(args.out, f"{cfg.direction}.db")
    write_database(db, result, cfg)

    fields = [MODE_FIELDS[m] for m in cfg.modes]
    rows = [_header("#", h, cfg.seed),
            "#rank\tid\tedges\t" + "\t".join(fields) + "\trobustness\tclass\n"]
    for rank, r in enumerate(result.reports[: args.top], 1):
        vals = "\t".join(f"{getattr(r, f):.2f}" for f in fields)
        rob = "-" if r.robustness is None else f"{r.robustness:.3f}"
        rows.append(f"{rank}\t{r.id}\t{r.edges}\t{vals}\t{rob}\t{r.classification}\n")
    _write(os.path.join(args.out, f"summary-{cfg.direction}.tsv"), "".join(rows))

    # 10%-wide bins, last bin closed so 100% lands in it
    bins = np.zeros(10, dtype=int)
    for r in result.reports:
        bins[min(int(r.hysteresis // 10), 9)] += 1
    hist = [_header("#", h, cfg.seed), "lo,hi,count\n"]
    hist += [f"{10 * i},{10 * (i + 1)},{c}\n" for i, c in enumerate(bins)]
    _write(os.path.join(args.out, f"histogram-{cfg.direction}.csv"), "".join(hist))

    print("".join(rows[1: 2 + min(args.top, 20)]), end="")
    if result.failures:
        for code, err in result.failures:
            print(f"network {code} failed: {err}", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


# -- query -------------------------------------------------------------------------------


def _matches(rec: dict, args) -> bool:
    field = MODE_FIELDS[args.mode]
    score = rec[field]
    if args.score is not None and abs(score - args.score) > 1e-6:
        return False
    if args.min_score is not None and score < args.min_score - 1e-9:
        return False
    if args.robust and rec["classification"] != "Robust":
        return False
    if args.consistent and not rec["consistent"]:
        return False
    if args.max_rank is not None and rec["rank"] > args.max_rank:
        return False
    if args.edges is not None and rec["n_edges"] != args.edges:
        return False
    if args.id is not None and rec["id"] != args.id:
        return False
    return True


def cmd_query(args) -> int:
    if not os.path.exists(args.db):
        raise ConfigError(f"no database at {args.db}")
    try:
        db = Database(args.db)
    except (ValueError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{args.db}: {exc}") from None
    if args.id is not None and db.index:
        rec = db.get(args.id)
        records = [rec] if rec is not None else []
    else:
        records = iter(db)
    out = sys.stdout
    hdr = db.header
    out.write(_header("#", hdr["config_hash"], hdr["seed"], direction=hdr["config"]["direction"]))
    if not args.json:
        out.write("#rank\tid\tedges\thysteresis\tperturbed\tfull\tperturbed_full\trobustness\tclass\n")
    count = 0
    for rec in records:
        if not _matches(rec, args):
            continue
        count += 1
        if args.json:
            out.write(json.dumps(rec, sort_keys=True) + "\n")
        else:
            rob = "-" if rec["robustness"] is None else f"{rec['robustness']:.3f}"
            out.write(f"{rec['rank']}\t{rec['id']}\t{rec['edges']}\t{rec['hysteresis']:.2f}\t"
                      f"{rec['perturbed']:.2f}\t{rec['full']:.2f}\t{rec['perturbed_full']:.2f}\t"
                      f"{rob}\t{rec['classification']}\n")
    if not args.quiet:
        print(f"{count} record(s)", file=sys.stderr)
    return EXIT_OK


# -- inspect -----------------------------------------------------------------------------


def _parse_pnode(text: str, ctx) -> tuple:
    try:
        pnode = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise ConfigError(f"--pnode takes comma-separated vertex ids, got {text!r}") from None
    if len(pnode) != ctx.net.node_count:
        raise ConfigError(f"--pnode needs {ctx.net.node_count} vertex ids")
    for g, v in zip(ctx.graphs, pnode):
        if not 0 <= v < len(g):
            raise ConfigError(f"vertex {v} out of range for node {g.node} ({len(g)} vertices)")
        if not g.vertex(v).verified:
            raise ConfigError(f"vertex {v} of node {g.node} is not a realizable region")
    return pnode


def cmd_inspect(args) -> int:
    from .stg import morse_graph, stg_for
    nid, net = _load_network(args)
    scorer = NetworkScorer(net, args.budget, lax_endpoints=args.lax_endpoints)
    ctx = scorer.ctx
    pnode = _parse_pnode(args.pnode, ctx) if args.pnode else None
    os.makedirs(args.out, exist_ok=True)
    h = _digest({"network": net.to_spec(), "budget": args.budget, "pnode": args.pnode})
    tag = "//"
    for g in ctx.graphs:
        _write(os.path.join(args.out, f"pg{g.node}.dot"),
               _header(tag, h, args.seed) + g.to_dot())
        recs = [_header("#", h, args.seed)] + [json.dumps(r) + "\n" for r in g.records()]
        _write(os.path.join(args.out, f"pg{g.node}.jsonl"), "".join(recs))
    g0 = ctx.graphs[net.input_node]
    lat = _lattice_for(g0.signature.shape, args.budget)
    info = {
        "network": network_id(net) if net.node_count == 3 else "-",
        "edges": net.edge_string(),
        "input_vertices_per_order": len(g0.template),
        "orders": len(g0.orders),
        "minimum": lat.vmin,
        "maximum": lat.vmax,
        "partial_paths": lat.total_partial,
        "full_paths": lat.total_full,
    }
    for g in ctx.graphs:
        info[f"pg{g.node}_vertices"] = len(g)
        info[f"pg{g.node}_essential"] = len(g.essential())
    _write(os.path.join(args.out, "lattice.txt"),
           _header("#", h, args.seed) + "".join(f"{k}={v}\n" for k, v in info.items()))
    print(net.to_spec(), end="")
    for k, v in info.items():
        print(f"{k}={v}")
    if pnode is not None:
        stg = stg_for(ctx, pnode)
        mg = morse_graph(stg)
        _write(os.path.join(args.out, "stg.dot"), _header(tag, h, args.seed) + stg.to_dot())
        _write(os.path.join(args.out, "morse.dot"), _header(tag, h, args.seed) + mg.to_dot())
        fps = mg.fp_labels()
        _write(os.path.join(args.out, "fixed_points.txt"),
               _header("#", h, args.seed) + "".join(f + "\n" for f in fps))
        print("pnode=" + ",".join(map(str, pnode)))
        print("stable=" + " ".join(fps))
    if args.report:
        rep = HysteresisReport.from_scores(net, scorer.score(), Direction(args.direction))
        print(rep.to_json())
    return EXIT_OK


# -- hill --------------------------------------------------------------------------------


def cmd_hill(args) -> int:
    from .hill import (HillError, build_model, input_regions, numeric_hysteresis_score,
                       point_curves)
    from .sample import NumericParameter
    from .stg import ParameterContext

    nid, net = _load_network(args)
    direction = Direction(args.direction)
    if args.n < 1:
        raise ConfigError("--n must be at least 1")
    os.makedirs(args.out, exist_ok=True)
    if args.params_file:
        try:
            with open(args.params_file) as fh:
                params = NumericParameter.from_text(fh.read())
            model = build_model(net, params, args.n)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"{args.params_file}: {exc}") from None
        if all(v == 0 for v in params.delta.values()):
            print("warning: every delta is zero; the model is linear and cannot fold",
                  file=sys.stderr)
        h = _digest({"network": net.to_spec(), "params": params.to_text(), "n": args.n})
        rng = np.random.default_rng(args.seed)
        hits = failures = 0
        for k, (guess, curve, note) in enumerate(point_curves(model, rng, args.guesses, direction)):
            if curve is None:
                failures += 1
                print(f"guess {k}: {note}", file=sys.stderr)
                continue
            path = os.path.join(args.out, f"curve-{k}.csv")
            _write(path, _header("#", h, args.seed, n=args.n, status=curve.status.value,
                                 folds=len(curve.folds)) + curve.to_csv())
            hits += note == "hysteretic"
            folds = " ".join(f"{f.s:.6f}" for f in curve.folds)
            print(f"guess {k}: {note}; folds at s = [{folds}] -> {path}")
        print(f"hysteretic={int(hits > 0)}")
        return EXIT_PARTIAL if failures == args.guesses else EXIT_OK

    ctx = ParameterContext.build(net, args.budget)
    regions = input_regions(ctx, perturbed=args.perturbed)
    if not regions:
        raise ConfigError("no realizable regions for this network")
    score = numeric_hysteresis_score(ctx, args.n, regions, args.samples, args.guesses,
                                     direction, seed=args.seed, jobs=args.jobs)
    if score.samples and score.hysteretic == 0:
        print("warning: no hysteretic samples", file=sys.stderr)
    rec = {
        "source": "hill", "n": args.n, "id": nid, "edges": net.edge_string(),
        "direction": direction.value, "perturbed": args.perturbed, "samples": score.samples,
        "hysteretic": score.hysteretic, "failures": score.failures,
        "score": round(score.percent, 6),
    }
    h = _digest({k: rec[k] for k in ("n", "edges", "direction", "perturbed", "samples")})
    path = os.path.join(args.out, f"hill-n{args.n:g}.jsonl")
    _write(path, _header("#", h, args.seed) + json.dumps(rec, sort_keys=True) + "\n")
    print(json.dumps(rec, sort_keys=True))
    return EXIT_PARTIAL if score.failures else EXIT_OK


# -- parser ------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="switchscreen", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"switchscreen {__version__}")
    verb = _Parser(add_help=False)
    verb.add_argument("-v", "--verbose", action="store_true")
    verb.add_argument("-q", "--quiet", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, seed=0):
        sp.add_argument("--direction", choices=["asc", "desc"], default="asc")
        sp.add_argument("--seed", type=int, default=seed)
        sp.add_argument("--out", default=".")
        sp.add_argument("--jobs", type=int, default=1)
        sp.add_argument("--budget", type=int, default=DEFAULT_BUDGET,
                        help="witness search budget per logic class")

    s = sub.add_parser("screen", parents=[verb], help="score every network of the census")
    common(s)
    s.add_argument("--modes", default="EP,PP,EF,PF",
                   help="columns for the summary: EP, PP (partial paths), EF, PF (full paths)")
    s.add_argument("--max-edges", type=int)
    sign = s.add_mutually_exclusive_group()
    sign.add_argument("--only-repressors", action="store_true")
    sign.add_argument("--only-activators", action="store_true")
    s.add_argument("--lax-endpoints", action="store_true")
    s.add_argument("--essential-rule", choices=["strict", "influence"], default="strict")
    s.add_argument("--no-transpositions", action="store_true")
    s.add_argument("--top", type=int, default=50)
    s.set_defaults(func=cmd_screen)

    q = sub.add_parser("query", parents=[verb], help="filter a results database")
    q.add_argument("db")
    q.add_argument("--mode", type=str.upper, choices=list(MODE_FIELDS), default="EP")
    q.add_argument("--score", type=float)
    q.add_argument("--min-score", type=float)
    q.add_argument("--robust", action="store_true")
    q.add_argument("--consistent", action="store_true")
    q.add_argument("--max-rank", type=int)
    q.add_argument("--edges", type=int)
    q.add_argument("--id", type=int)
    q.add_argument("--json", action="store_true")
    q.set_defaults(func=cmd_query)

    i = sub.add_parser("inspect", parents=[verb], help="factor graphs, STG and Morse graph artifacts")
    common(i)
    i.add_argument("network", nargs="?", type=int)
    i.add_argument("--spec", help="network text file instead of an id")
    i.add_argument("--pnode", help="comma-separated factor-graph vertex ids, one per node")
    i.add_argument("--lax-endpoints", action="store_true")
    i.add_argument("--report", action="store_true", help="also print the hysteresis report")
    i.set_defaults(func=cmd_inspect)

    h = sub.add_parser("hill", parents=[verb], help="Hill-model continuation and numeric scores")
    common(h)
    h.add_argument("network", nargs="?", type=int)
    h.add_argument("--spec")
    h.add_argument("--params-file", help="key=value parameters; runs the curves for that point")
    h.add_argument("--n", type=float, default=4.0, help="Hill exponent")
    h.add_argument("--samples", type=int, default=100)
    h.add_argument("--guesses", type=int, default=10)
    h.add_argument("--perturbed", action="store_true",
                   help="sample the one-edge neighborhood instead of essential pairs")
    h.set_defaults(func=cmd_hill)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise ConfigError("choose a subcommand: screen, query, inspect or hill")
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if getattr(args, "jobs", 1) < 1:
            raise ConfigError("--jobs must be at least 1")
        return args.func(args)
    except ConfigError as exc:
        print(f"switchscreen: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
