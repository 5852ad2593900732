"""LogP communication costs, Apriori work bounds and factor estimation.

The communication formulas are evaluated as written: every pass costs
``2P * sum_{i=1}^{P-1} (payload_i * g + L**2 + o)``, so per-node payload
arrays longer than P-1 have their trailing entries ignored. Both protocols
share that structure, which keeps their ratio meaningful.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

from .simnet import NodeReport, RunTrace


class DimensionError(ValueError):
    pass


@dataclass(frozen=True)
class LogPParams:
    L: float = 1.0
    o: float = 1.0
    g: float = 1.0
    P: int = 1

    def __post_init__(self):
        if min(self.L, self.o, self.g) < 0:
            raise ValueError("LogP parameters must be non-negative")
        if self.P < 1:
            raise ValueError("P must be >= 1")

    @classmethod
    def parse(cls, text: str, P: int = 1) -> "LogPParams":
        """``"L,o,g"`` as used on the command line."""
        parts = [float(v) for v in text.split(",")]
        if len(parts) != 3:
            raise ValueError(f"expected L,o,g but got {text!r}")
        return cls(*parts, P=P)

    def label(self) -> str:
        return f"{self.L:g},{self.o:g},{self.g:g}"


# Default network in work units (one unit = counting one candidate on a
# partition): wide-area latency ~100 units, per-message handling ~10 units,
# one unit per itemset on the wire.
GRID_LOGP = LogPParams(L=100.0, o=10.0, g=1.0)


def _pass_cost(params: LogPParams, payload: Sequence[float]) -> float:
    P = params.P
    if P > 1 and len(payload) < P - 1:
        raise DimensionError(f"need at least {P - 1} node entries, got {len(payload)}")
    return 2 * P * sum(payload[i] * params.g + params.L ** 2 + params.o for i in range(P - 1))


def c_fdm(params: LogPParams, gc: Sequence[Sequence[float]], k: int) -> float:
    """FDM communication cost; ``gc[l-1][i]`` is GC_{l,i}, the candidates node i sends at level l."""
    if len(gc) != k:
        raise DimensionError(f"gc has {len(gc)} levels, expected k={k}")
    return sum(_pass_cost(params, level) for level in gc)


def c_gfm(params: LogPParams, lf_k: Sequence[float], sf: Sequence[Sequence[float]],
          k: int, x: int) -> float:
    """GFM communication cost.

    ``lf_k[i]`` is the first-pass payload of node i; ``sf`` lists the later
    passes in order, standing for levels k-1 down to x, so it must hold
    exactly k - x entries (none when x == k).
    """
    if x > k:
        raise DimensionError(f"x={x} exceeds k={k}")
    if len(sf) != k - x:
        raise DimensionError(f"sf has {len(sf)} passes, expected k - x = {k - x}")
    return _pass_cost(params, lf_k) + sum(_pass_cost(params, level) for level in sf)


def work_bound(items_involved: float | Sequence[float], gs: Sequence[float]) -> float:
    """Sum over l of (I_l - l) / (l + 1) * GS_l, l starting at 0.

    A scalar ``items_involved`` is used for every level and also caps the sum
    at l = I - 1.
    """
    if isinstance(items_involved, (int, float)):
        top = min(len(gs), int(items_involved))
        items = [items_involved] * top
    else:
        if len(items_involved) != len(gs):
            raise DimensionError("items_involved and gs must be aligned")
        items, top = items_involved, len(gs)
    return sum((items[l] - l) / (l + 1) * gs[l] for l in range(top))


def work_bound_factored(items_involved: Sequence[float], ls: Sequence[float],
                        p_l: Sequence[float], p_il: Sequence[float]) -> float:
    """Sum of (P_Il * I_l - l) / (l + 1) * P_l * LS_l."""
    n = len(ls)
    if not (len(items_involved) == len(p_l) == len(p_il) == n):
        raise DimensionError("all per-level arrays must be aligned")
    return sum((p_il[l] * items_involved[l] - l) / (l + 1) * p_l[l] * ls[l] for l in range(n))


def node_work_arrays(node: NodeReport) -> tuple[list[int], list[int]]:
    """(I_l, successes_l) for l = 0 .. last-1 of one node's executed levels.

    Level 0 stands for the empty itemset: one success (if the node has any
    data) and every present item involved. The term for level l bounds the
    candidates generated at level l + 1.
    """
    levels = node.levels[:-1]
    items = [node.items_present] + [s.items_involved for s in levels]
    succ = [1 if node.items_present else 0] + [s.successes for s in levels]
    return items, succ


def node_work(node: NodeReport) -> float:
    items, succ = node_work_arrays(node)
    return work_bound(items, succ)


def candidate_bound_ok(node: NodeReport) -> bool:
    """Check generated(l+1) <= (I_l - l)/(l+1) * S_l at every executed level."""
    items, succ = node_work_arrays(node)
    for l, stats in enumerate(node.levels):
        if stats.generated * (l + 1) > (items[l] - l) * succ[l]:
            return False
    return True


def fdm_payloads(trace: RunTrace) -> list[list[int]]:
    """GC_{l,i} per level (rows) and node (columns)."""
    levels = max((len(n.levels) for n in trace.nodes), default=0)
    return [
        [n.levels[l].candidates if l < len(n.levels) else 0 for n in trace.nodes]
        for l in range(levels)
    ]


def gfm_payloads(trace: RunTrace) -> tuple[list[int], list[list[int]]]:
    """(LF_k per node, SF per later pass per node)."""
    def sent(node: NodeReport, p: int) -> int:
        for ps in node.passes:
            if ps.pass_no == p:
                return ps.sent
        return 0

    lf = [sent(n, 1) for n in trace.nodes]
    sf = [[sent(n, p) for n in trace.nodes] for p in range(2, trace.passes + 1)]
    return lf, sf


def _check_comparable(a: RunTrace, b: RunTrace) -> None:
    for key in ("support", "k", "universe_size", "partition_sizes", "data_digest"):
        if a.config.get(key) != b.config.get(key):
            raise ValueError(f"traces differ in {key}: {a.config.get(key)!r} vs {b.config.get(key)!r}")


@dataclass
class CostBreakdown:
    total_fdm: float
    total_gfm: float
    c_fdm: float
    c_gfm: float
    work_fdm: float
    work_gfm: float
    rs_fdm: int
    rs_gfm: int
    k: int
    x: int

    @property
    def factor(self) -> float:
        """1 - total_gfm/total_fdm, the relative saving of GFM."""
        return 1 - self.total_gfm / self.total_fdm if self.total_fdm else 0.0

    def to_dict(self) -> dict:
        return {**asdict(self), "factor": self.factor}


def gfm_x(k: int, gfm_passes: int) -> int:
    """Lowest level reached by the top-down passes: k - (extra passes)."""
    return k - max(gfm_passes - 1, 0)


def overall_cost(trace_fdm: RunTrace, trace_gfm: RunTrace, params: LogPParams) -> CostBreakdown:
    """Overall FDM and GFM costs: summed per-node work bounds, remote counting and LogP terms.

    P is taken from the number of partitions. FDM is charged for the levels
    it executed; ``k`` is the larger of the two protocols' pass counts.
    """
    if trace_fdm.protocol != "fdm" or trace_gfm.protocol != "gfm":
        raise ValueError("expected an fdm trace and a gfm trace")
    _check_comparable(trace_fdm, trace_gfm)
    params = replace(params, P=len(trace_fdm.nodes))
    gc = fdm_payloads(trace_fdm)
    lf, sf = gfm_payloads(trace_gfm)
    # a skewed node can hold locally frequent sets longer than any global one,
    # so GFM may need more passes than FDM ran levels
    k = max(trace_fdm.passes, trace_gfm.passes)
    x = gfm_x(k, trace_gfm.passes)
    cf = c_fdm(params, gc, len(gc))
    cg = c_gfm(params, lf, sf, k, x) if trace_gfm.passes else 0.0
    work_fdm = sum(node_work(n) for n in trace_fdm.nodes)
    work_gfm = sum(node_work(n) for n in trace_gfm.nodes)
    rs_fdm = sum(s.remote_work for n in trace_fdm.nodes for s in n.levels)
    rs_gfm = sum(p.remote_work for n in trace_gfm.nodes for p in n.passes)
    return CostBreakdown(
        total_fdm=work_fdm + rs_fdm + cf,
        total_gfm=work_gfm + rs_gfm + cg,
        c_fdm=cf,
        c_gfm=cg,
        work_fdm=work_fdm,
        work_gfm=work_gfm,
        rs_fdm=rs_fdm,
        rs_gfm=rs_gfm,
        k=k,
        x=x,
    )


def critical_level(rates: Sequence[float], drop: float = 0.5) -> int:
    """First level (1-based) whose rate falls below ``drop`` times the previous one.

    Falls back to the last level when the rate never collapses; 0 for no levels.
    """
    for l in range(1, len(rates)):
        if rates[l] < drop * rates[l - 1]:
            return l + 1
    return len(rates)


def _ratio(num: float, den: float) -> float:
    if den <= 0:
        return 1.0
    return min(1.0, max(0.0, num / den))


@dataclass
class FactorReport:
    p_l: list[float]
    p_il: list[float]
    success_rate_local: list[float]
    success_rate_fdm: list[float]
    critical_level: int
    k: int
    x: int
    fdm_passes: int
    gfm_passes: int
    gain: float
    mean_p_l: float = field(default=0.0)

    def to_dict(self) -> dict:
        return asdict(self)


def estimate_factors(trace_fdm: RunTrace, trace_gfm: RunTrace,
                     params: LogPParams | None = None) -> FactorReport:
    """Per-level P_l and P_Il, critical level, x and communication gain.

    P_l = sum_i GS_{l,i} / sum_i LS_{l,i} and P_Il likewise on items
    involved; both are clamped to [0, 1] and read 1 where GFM had nothing.
    The critical level is detected on GFM's local success-rate profile.
    """
    _check_comparable(trace_fdm, trace_gfm)
    depth = max(
        max((len(n.levels) for n in trace_fdm.nodes), default=0),
        max((len(n.levels) for n in trace_gfm.nodes), default=0),
    )

    def total(trace, l, attr):
        return sum(getattr(n.levels[l], attr) for n in trace.nodes if l < len(n.levels))

    p_l, p_il, local_rate, fdm_rate = [], [], [], []
    for l in range(depth):
        p_l.append(_ratio(total(trace_fdm, l, "successes"), total(trace_gfm, l, "successes")))
        p_il.append(_ratio(total(trace_fdm, l, "items_involved"), total(trace_gfm, l, "items_involved")))
        gen = total(trace_gfm, l, "generated")
        local_rate.append(total(trace_gfm, l, "successes") / gen if gen else 0.0)
        gen = total(trace_fdm, l, "generated")
        fdm_rate.append(total(trace_fdm, l, "successes") / gen if gen else 0.0)
    costs = overall_cost(trace_fdm, trace_gfm, params or LogPParams())
    gain = 1 - costs.c_gfm / costs.c_fdm if costs.c_fdm else 0.0
    return FactorReport(
        p_l=p_l,
        p_il=p_il,
        success_rate_local=local_rate,
        success_rate_fdm=fdm_rate,
        critical_level=critical_level(local_rate),
        k=costs.k,
        x=costs.x,
        fdm_passes=trace_fdm.passes,
        gfm_passes=trace_gfm.passes,
        gain=gain,
        mean_p_l=sum(p_l) / len(p_l) if p_l else 0.0,
    )
