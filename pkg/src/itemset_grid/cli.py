"""Command-line entry point: ``itemset-grid {gen,split,mine,compare,sweep}``.

Exit codes: 0 success, 1 internal or verification failure, 2 usage error.
Every subcommand accepts ``--config FILE.json`` whose keys mirror the flag
names (dashes or underscores); explicit flags win over the file.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import dataio, report, simnet
from .costmodel import GRID_LOGP, LogPParams
from .dataio import GenParams, PartitionSpec, atomic_write_text
from .itemsets import InvalidInputError

log = logging.getLogger("itemset_grid")


class UsageError(Exception):
    pass


def _support(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (0 < v <= 1):
        raise argparse.ArgumentTypeError("support must be a fraction in (0, 1]")
    return v


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _add_cluster_flags(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group()
    src.add_argument("--input", help="transaction file")
    src.add_argument("--parts", help="partition manifest.json written by 'split'")
    p.add_argument("--nodes", type=_positive_int, help="number of simulated nodes")
    p.add_argument("--ratios", help="size ratio, '1:r' or explicit 'w1:...:wM'")
    p.add_argument("--seed", type=int, default=0, help="partition shuffle seed")
    p.add_argument("--support", type=_support, help="minimum support fraction")
    p.add_argument("--k", type=_positive_int, default=10, help="largest itemset size")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="itemset-grid", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic basket dataset")
    g.add_argument("--out")
    g.add_argument("--transactions", type=_positive_int, default=10_000)
    g.add_argument("--items", type=_positive_int, default=1_000)
    g.add_argument("--avg-size", type=float, default=20.0)
    g.add_argument("--patterns", type=_positive_int, default=200)
    g.add_argument("--avg-pattern", type=float, default=4.0)
    g.add_argument("--corruption", type=float, default=0.25)
    g.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("split", help="partition a dataset into per-node files")
    sp.add_argument("--input")
    sp.add_argument("--out-dir")
    sp.add_argument("--nodes", type=_positive_int)
    sp.add_argument("--ratios")
    sp.add_argument("--seed", type=int, default=0)

    m = sub.add_parser("mine", help="run one protocol in the simulator")
    _add_cluster_flags(m)
    m.add_argument("--protocol", choices=["centralized", "fdm", "gfm"], default="gfm")
    m.add_argument("--trace-out", help="RunTrace JSON")
    m.add_argument("--csv-out", help="per-node per-level counters CSV")
    m.add_argument("--traffic-out", help="per-round traffic CSV")

    c = sub.add_parser("compare", help="run FDM and GFM on identical inputs and report")
    _add_cluster_flags(c)
    c.add_argument("--logp", default=GRID_LOGP.label(), help="L,o,g network parameters in work units")
    c.add_argument("--json-out", help="comparison report JSON")
    c.add_argument("--csv-out", help="one table-shaped CSV row")
    c.add_argument("--levels-csv", help="candidate counts per level (plot data)")
    c.add_argument("--traffic-csv", help="itemset units per pass (plot data)")

    w = sub.add_parser("sweep", help="compare over a grid of supports and ratios")
    w.add_argument("--input")
    w.add_argument("--nodes", type=_positive_int)
    w.add_argument("--supports", default="0.01,0.02", help="comma-separated support fractions")
    w.add_argument("--ratio-list", default="1:1,1:5,1:10", help="comma-separated ratios")
    w.add_argument("--seed", type=int, default=0)
    w.add_argument("--k", type=_positive_int, default=10)
    w.add_argument("--logp", default=GRID_LOGP.label(), help="L,o,g network parameters in work units")
    w.add_argument("--csv-out")
    w.add_argument("--json-out")

    for p in (g, sp, m, c, w):
        p.add_argument("--config", help="JSON file of flag defaults")
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        try:
            cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, ValueError) as e:
            parser.error(f"cannot read config {args.config}: {e}")
        if not isinstance(cfg, dict):
            parser.error("config file must hold a JSON object")
        subparser = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in subparser._actions}
        defaults = {}
        for key, value in cfg.items():
            dest = key.replace("-", "_")
            if dest not in known or dest in ("config", "help"):
                parser.error(f"unknown config key {key!r} for '{args.command}'")
            # string defaults go through each action's type= conversion
            defaults[dest] = ",".join(map(str, value)) if isinstance(value, list) else str(value)
        subparser.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def _write(path, text: str) -> None:
    if path:
        atomic_write_text(path, text)


def _load_cluster(args, allow_cluster: bool = True):
    """Resolve --input/--parts/--nodes/--ratios into (partitions, dataset info, partition info)."""
    if args.ratios and not args.nodes:
        raise UsageError("--ratios requires --nodes")
    if not allow_cluster and (args.nodes or args.ratios or args.parts):
        raise UsageError("centralized mining takes a single --input and no cluster flags")
    if args.support is None:
        raise UsageError("--support is required")
    if args.parts:
        if args.nodes or args.ratios:
            raise UsageError("--parts already fixes the cluster; drop --nodes/--ratios")
        manifest, parts = dataio.read_manifest(args.parts)
        info = {"nodes": len(parts), "ratios": manifest["ratios"], "seed": manifest["seed"],
                "ratio_label": ":".join(f"{w:g}" for w in manifest["ratios"])}
        dataset = {"source": manifest["source"], "universe_size": parts[0].universe_size,
                   "transactions": sum(p.count for p in parts), "digest": simnet.db_digest(parts)}
        return parts, dataset, info
    if not args.input:
        raise UsageError("one of --input or --parts is required")
    db = dataio.read_db(args.input)
    nodes = args.nodes or 1
    ratio_text = args.ratios or "1:1"
    weights = dataio.parse_ratio(ratio_text, nodes)
    spec = PartitionSpec(nodes, tuple(weights), seed=args.seed)
    parts = dataio.partition(db, spec)
    info = {"nodes": nodes, "ratios": list(spec.ratios), "seed": args.seed, "ratio_label": ratio_text}
    dataset = {"source": str(args.input), "universe_size": db.universe_size,
               "transactions": db.count, "digest": simnet.db_digest([db])}
    return parts, dataset, info


def cmd_gen(args) -> int:
    if not args.out:
        raise UsageError("--out is required")
    params = GenParams(
        num_transactions=args.transactions,
        universe_size=args.items,
        avg_transaction_size=args.avg_size,
        num_patterns=args.patterns,
        avg_pattern_size=args.avg_pattern,
        corruption=args.corruption,
        seed=args.seed,
    )
    db = dataio.generate(params)
    dataio.write_db(db, args.out)
    print(f"wrote {db.count} transactions over {db.universe_size} items to {args.out}")
    return 0


def cmd_split(args) -> int:
    if not (args.input and args.out_dir and args.nodes):
        raise UsageError("--input, --out-dir and --nodes are required")
    db = dataio.read_db(args.input)
    spec = PartitionSpec(args.nodes, tuple(dataio.parse_ratio(args.ratios or "1:1", args.nodes)), args.seed)
    parts = dataio.partition(db, spec)
    path = dataio.write_partitions(parts, args.out_dir, spec, args.input)
    print(f"wrote {len(parts)} parts {[p.count for p in parts]} and {path}")
    return 0


def cmd_mine(args) -> int:
    parts, _, info = _load_cluster(args, allow_cluster=args.protocol != "centralized")
    trace = simnet.run(args.protocol, parts, args.support, args.k, meta={"partition": info})
    _write(args.trace_out, trace.to_json())
    _write(args.csv_out, trace.levels_csv())
    _write(args.traffic_out, trace.traffic_csv())
    levels = {l: len(v) for l, v in trace.by_level().items()}
    print(f"{trace.protocol}: {len(trace.frequent)} frequent itemsets {levels}, "
          f"passes={trace.passes} messages={trace.meter.total_messages} units={trace.meter.total_units}")
    return 0


def cmd_compare(args) -> int:
    parts, dataset, info = _load_cluster(args)
    try:
        logp = LogPParams.parse(args.logp)
    except ValueError as e:
        raise UsageError(f"--logp: {e}") from None
    rep, fdm, gfm = report.compare(parts, args.support, args.k, logp, dataset, info)
    _write(args.json_out, report.report_json(rep))
    _write(args.csv_out, report.table_csv([rep["table_row"]]))
    _write(args.levels_csv, report.levels_series_csv([fdm, gfm]))
    _write(args.traffic_csv, report.traffic_series_csv([fdm, gfm]))
    row = rep["table_row"]
    print(f"{rep['status']}: support={row['support_pct']}% ratio={row['ratio']} "
          f"FDM={row['fdm_model_units']:.1f} GFM={row['gfm_model_units']:.1f} {report.COST_UNITS} "
          f"factor={row['factor_pct']:.2f}% passes fdm={fdm.passes} gfm={gfm.passes}")
    return 0 if rep["status"] == "OK" else 1


def cmd_sweep(args) -> int:
    if not (args.input and args.nodes):
        raise UsageError("--input and --nodes are required")
    try:
        supports = [_support(s) for s in str(args.supports).split(",")]
    except argparse.ArgumentTypeError as e:
        raise UsageError(f"--supports: {e}") from None
    ratios = [r.strip() for r in str(args.ratio_list).split(",") if r.strip()]
    try:
        logp = LogPParams.parse(args.logp)
    except ValueError as e:
        raise UsageError(f"--logp: {e}") from None
    db = dataio.read_db(args.input)
    dataset = {"source": str(args.input), "universe_size": db.universe_size,
               "transactions": db.count, "digest": simnet.db_digest([db])}
    rows, reports, status = [], [], 0
    for ratio in ratios:
        spec = PartitionSpec(args.nodes, tuple(dataio.parse_ratio(ratio, args.nodes)), args.seed)
        parts = dataio.partition(db, spec)
        info = {"nodes": args.nodes, "ratios": list(spec.ratios), "seed": args.seed, "ratio_label": ratio}
        for s in supports:
            rep, _, _ = report.compare(parts, s, args.k, logp, dataset, info)
            rows.append(rep["table_row"])
            reports.append(rep)
            if rep["status"] != "OK":
                status = 1
            log.info("support=%s ratio=%s factor=%s%%", s, ratio, rep["table_row"]["factor_pct"])
    text = report.table_csv(rows)
    _write(args.csv_out, text)
    _write(args.json_out, json.dumps(reports, indent=2, sort_keys=True) + "\n")
    if not args.csv_out:
        sys.stdout.write(text)
    return status


COMMANDS = {"gen": cmd_gen, "split": cmd_split, "mine": cmd_mine, "compare": cmd_compare, "sweep": cmd_sweep}


def main(argv=None) -> int:
    args = parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, InvalidInputError) as e:
        print(f"itemset-grid {args.command}: error: {e}", file=sys.stderr)
        return 2
    except (OSError, dataio.ParseError, simnet.ConfigurationError) as e:
        print(f"itemset-grid {args.command}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
