"""FDM-versus-GFM comparison reports (JSON document plus table-shaped CSV rows)."""

from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict
from typing import Sequence

from . import simnet
from .costmodel import LogPParams, estimate_factors, overall_cost
from .itemsets import SupportThreshold, TransactionDB

COST_UNITS = "model-units"
TABLE_COLUMNS = ["support_pct", "ratio", "size", "nodes", "fdm_model_units", "gfm_model_units", "factor_pct"]
THREADS_ENV = "ITEMSET_GRID_THREADS"


def thread_cap() -> int:
    raw = os.environ.get(THREADS_ENV, "0").strip() or "0"
    n = int(raw)
    if n < 0:
        raise ValueError(f"{THREADS_ENV} must be >= 0")
    return n if n else min(2, os.cpu_count() or 1)


def run_pair(partitions: Sequence[TransactionDB], s: float, k: int, meta: dict):
    """Run FDM and GFM on the same partitions, concurrently when allowed."""
    if thread_cap() > 1:
        with ThreadPoolExecutor(max_workers=2) as pool:
            f = pool.submit(simnet.run, "fdm", partitions, s, k, meta)
            g = pool.submit(simnet.run, "gfm", partitions, s, k, meta)
            return f.result(), g.result()
    return simnet.run("fdm", partitions, s, k, meta), simnet.run("gfm", partitions, s, k, meta)


def _protocol_summary(trace: simnet.RunTrace) -> dict:
    return {
        "passes": trace.passes,
        "rounds": trace.rounds,
        "messages": trace.meter.total_messages,
        "itemset_units": trace.meter.total_units,
        "itemset_units_by_pass": {str(p): u for p, u in trace.meter.units_by_pass().items()},
        "frequent_by_level": {str(l): len(v) for l, v in trace.by_level().items()},
        "frequent_total": len(trace.frequent),
        "remote_work": sum(s.remote_work for n in trace.nodes for s in n.levels)
        + sum(p.remote_work for n in trace.nodes for p in n.passes if trace.protocol == "gfm"),
    }


def compare(partitions: Sequence[TransactionDB], s: float, k: int, logp: LogPParams,
            dataset: dict, partition_info: dict) -> tuple[dict, simnet.RunTrace, simnet.RunTrace]:
    """Build the comparison report; ``report['status']`` is 'FAILED' when the results differ."""
    threshold = SupportThreshold(s)
    meta = {"partition": partition_info}
    fdm, gfm = run_pair(partitions, threshold.fraction, k, meta)
    same = fdm.frequent_itemsets() == gfm.frequent_itemsets()
    costs = overall_cost(fdm, gfm, logp)
    factors = estimate_factors(fdm, gfm, logp)
    ratio = partition_info.get("ratio_label", "")
    report = {
        "status": "OK" if same else "FAILED",
        "cost_units": COST_UNITS,
        "dataset": dataset,
        "partition": {**partition_info, "sizes": [p.count for p in partitions]},
        "support": threshold.fraction,
        "global_threshold": fdm.config["global_threshold"],
        "k": k,
        "logp": {"L": logp.L, "o": logp.o, "g": logp.g, "P": len(partitions)},
        "protocols": {
            "fdm": {**_protocol_summary(fdm), "comm_cost": costs.c_fdm, "overall_cost": costs.total_fdm},
            "gfm": {**_protocol_summary(gfm), "comm_cost": costs.c_gfm, "overall_cost": costs.total_gfm},
        },
        "costs": costs.to_dict(),
        "factors": factors.to_dict(),
        "table_row": {
            "support_pct": round(100 * threshold.fraction, 6),
            "ratio": ratio,
            "size": sum(p.count for p in partitions),
            "nodes": len(partitions),
            "fdm_model_units": costs.total_fdm,
            "gfm_model_units": costs.total_gfm,
            "factor_pct": round(100 * costs.factor, 4),
        },
    }
    if not same:
        only_fdm = sorted(fdm.frequent_itemsets() - gfm.frequent_itemsets())
        only_gfm = sorted(gfm.frequent_itemsets() - fdm.frequent_itemsets())
        report["mismatch"] = {"only_fdm": [list(x) for x in only_fdm[:50]],
                              "only_gfm": [list(x) for x in only_gfm[:50]]}
    return report, fdm, gfm


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def table_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, TABLE_COLUMNS, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def levels_series_csv(traces: Sequence[simnet.RunTrace]) -> str:
    """Candidate counts per protocol, node and level (plot data)."""
    buf = io.StringIO()
    cols = ["protocol", "node", "level", "generated", "candidates", "successes"]
    w = csv.DictWriter(buf, cols, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for t in traces:
        for n in t.nodes:
            for s in n.levels:
                w.writerow({"protocol": t.protocol, "node": n.node, **asdict(s)})
    return buf.getvalue()


def traffic_series_csv(traces: Sequence[simnet.RunTrace]) -> str:
    """Itemset units and messages per protocol and pass (plot data)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["protocol", "pass", "messages", "itemset_units"])
    for t in traces:
        msgs = t.meter.messages_by_pass()
        for p, units in t.meter.units_by_pass().items():
            w.writerow([t.protocol, p, msgs.get(p, 0), units])
    return buf.getvalue()
