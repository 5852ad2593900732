"""Lockstep round-based simulation of M mining nodes with traffic accounting.

Messages emitted in round r are delivered at the start of round r + 1, sorted
by (sender, kind, payload). Nodes are stepped in ascending id order. Payload
size is counted in itemset units; a rough byte estimate is kept for reports.
"""

from __future__ import annotations

import csv
import enum
import hashlib
import io
import json
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Any, Iterable, Sequence

from .itemsets import Itemset, LevelStats, SupportCount, SupportThreshold, TransactionDB

MAX_ROUNDS = 100_000


class ConfigurationError(ValueError):
    pass


class Kind(enum.IntEnum):
    CANDIDATE_SET = 0
    COUNT_REQUEST = 1
    COUNT_RESPONSE = 2
    FREQUENT_BROADCAST = 3

    @property
    def label(self) -> str:
        return {0: "CandidateSet", 1: "CountRequest", 2: "CountResponse", 3: "FrequentBroadcast"}[self.value]


@dataclass(frozen=True)
class Message:
    sender: int
    recipient: int
    round: int
    kind: Kind
    payload: tuple  # of Itemset or SupportCount
    pass_no: int = 0

    def __post_init__(self):
        if self.sender == self.recipient:
            raise ConfigurationError(f"node {self.sender} cannot message itself")

    @property
    def payload_units(self) -> int:
        return len(self.payload)

    @property
    def payload_bytes(self) -> int:
        total = 0
        for p in self.payload:
            if isinstance(p, SupportCount):
                total += 2 + len(p.itemset)
            else:
                total += 1 + len(p)
        return 4 * total

    def delivery_key(self):
        return (self.sender, int(self.kind), self.payload)


@dataclass
class PassStats:
    """One communication pass at one node.

    ``sent`` is the payload (itemsets) this node sent to each peer,
    ``remote_work`` the remote-originated itemsets it counted for others.
    """

    pass_no: int
    sent: int = 0
    remote_work: int = 0
    exact_frequent: int = 0
    inferred_frequent: int = 0
    failed: int = 0


class TrafficMeter:
    """Per-(round, node, kind) message and itemset-unit tallies."""

    def __init__(self):
        self._tally: dict[tuple[int, int, int], list[int]] = {}
        self._round_pass: dict[int, int] = {}
        self.log: list[tuple[int, int, int, int, int, int]] = []

    def record(self, messages: Iterable[Message]) -> None:
        for m in messages:
            slot = self._tally.setdefault((m.round, m.sender, int(m.kind)), [0, 0, 0, m.pass_no])
            slot[0] += 1
            slot[1] += m.payload_units
            slot[2] += m.payload_bytes
            self.log.append((m.round, m.sender, m.recipient, int(m.kind), m.pass_no, m.payload_units))

    def rows(self, protocol: str = "") -> list[dict]:
        out = []
        for (rnd, node, kind), (msgs, units, nbytes, pass_no) in sorted(self._tally.items()):
            out.append({
                "protocol": protocol,
                "node": node,
                "round": rnd,
                "pass": pass_no,
                "kind": Kind(kind).label,
                "messages": msgs,
                "itemset_units": units,
                "bytes_estimate": nbytes,
            })
        return out

    def units_by_pass(self) -> dict[int, int]:
        out: dict[int, int] = defaultdict(int)
        for (_, _, _), (_, units, _, pass_no) in self._tally.items():
            out[pass_no] += units
        return dict(sorted(out.items()))

    def messages_by_pass(self) -> dict[int, int]:
        out: dict[int, int] = defaultdict(int)
        for (_, _, _), (msgs, _, _, pass_no) in self._tally.items():
            out[pass_no] += msgs
        return dict(sorted(out.items()))

    @property
    def total_messages(self) -> int:
        return sum(v[0] for v in self._tally.values())

    @property
    def total_units(self) -> int:
        return sum(v[1] for v in self._tally.values())

    def mutate(self, rnd: int, node: int, kind: Kind, units_delta: int) -> None:
        """Test hook: corrupt one tally in place."""
        self._tally[(rnd, node, int(kind))][1] += units_delta


@dataclass
class NodeReport:
    node: int
    transactions: int
    items_present: int
    levels: list[LevelStats] = field(default_factory=list)
    passes: list[PassStats] = field(default_factory=list)


@dataclass
class FrequentEntry:
    count: int
    exact: bool = True


def db_digest(parts: Sequence[TransactionDB]) -> str:
    h = hashlib.sha256()
    for p in parts:
        h.update(f"n={p.universe_size};D={p.count};".encode())
        h.update(repr(p.transactions).encode())
        h.update(b"|")
    return h.hexdigest()


@dataclass
class RunTrace:
    protocol: str
    config: dict[str, Any]
    nodes: list[NodeReport]
    meter: TrafficMeter
    frequent: dict[Itemset, FrequentEntry]
    rounds: int
    passes: int
    partitions: list[TransactionDB] = field(default_factory=list, repr=False, compare=False)
    node_results: list[dict[Itemset, int]] = field(default_factory=list, repr=False, compare=False)
    candidate_log: list[list[tuple[Itemset, ...]]] = field(default_factory=list, repr=False, compare=False)

    def frequent_itemsets(self) -> set[Itemset]:
        return set(self.frequent)

    def by_level(self) -> dict[int, dict[Itemset, int]]:
        out: dict[int, dict[Itemset, int]] = defaultdict(dict)
        for x, e in self.frequent.items():
            out[len(x)][x] = e.count
        return dict(sorted(out.items()))

    def to_dict(self) -> dict:
        return {
            "protocol": self.protocol,
            "config": self.config,
            "rounds": self.rounds,
            "passes": self.passes,
            "nodes": [
                {
                    "node": n.node,
                    "transactions": n.transactions,
                    "items_present": n.items_present,
                    "levels": [asdict(s) for s in n.levels],
                    "passes": [asdict(s) for s in n.passes],
                }
                for n in self.nodes
            ],
            "traffic": self.meter.rows(self.protocol),
            "frequent": [
                {"itemset": list(x), "count": e.count, "exact": e.exact}
                for x, e in sorted(self.frequent.items(), key=lambda kv: (len(kv[0]), kv[0]))
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def traffic_csv(self) -> str:
        buf = io.StringIO()
        cols = ["protocol", "node", "round", "kind", "messages", "itemset_units"]
        w = csv.DictWriter(buf, cols, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        w.writerows(self.meter.rows(self.protocol))
        return buf.getvalue()

    def levels_csv(self) -> str:
        buf = io.StringIO()
        cols = ["protocol", "node", "level", "generated", "candidates", "successes",
                "failures", "items_involved", "remote_work"]
        w = csv.DictWriter(buf, cols, lineterminator="\n")
        w.writeheader()
        for n in self.nodes:
            for s in n.levels:
                w.writerow({"protocol": self.protocol, "node": n.node, **asdict(s)})
        return buf.getvalue()


def simulate(nodes: Sequence, meter: TrafficMeter, max_rounds: int = MAX_ROUNDS) -> int:
    """Step node state machines in lockstep until quiescent; returns rounds executed."""
    inflight: list[Message] = []
    ids = [n.node_id for n in nodes]
    if ids != sorted(ids) or len(set(ids)) != len(ids):
        raise ConfigurationError("nodes must be ordered by unique ascending id")
    valid = set(ids)
    rnd = 0
    while True:
        rnd += 1
        if rnd > max_rounds:
            raise RuntimeError(f"simulation did not quiesce within {max_rounds} rounds")
        inbox: dict[int, list[Message]] = defaultdict(list)
        for m in inflight:
            inbox[m.recipient].append(m)
        out: list[Message] = []
        for node in nodes:
            msgs = sorted(inbox.pop(node.node_id, ()), key=Message.delivery_key)
            sent = node.step(rnd, msgs)
            for m in sent:
                if m.sender != node.node_id or m.round != rnd or m.recipient not in valid:
                    raise ConfigurationError(f"node {node.node_id} emitted malformed message {m!r}")
            out.extend(sent)
        meter.record(out)
        if not out and all(n.finished for n in nodes):
            return rnd
        inflight = out


def run(protocol: str, partitions: Sequence[TransactionDB], s: SupportThreshold | float,
        k: int, meta: dict | None = None) -> RunTrace:
    """Execute ``protocol`` ('fdm', 'gfm' or 'centralized') over the partitions."""
    from . import protocols

    if not isinstance(s, SupportThreshold):
        s = SupportThreshold(s)
    partitions = list(partitions)
    if not partitions:
        raise ConfigurationError("need at least one partition")
    sizes = {p.universe_size for p in partitions}
    if len(sizes) != 1:
        raise ConfigurationError(f"partitions disagree on universe size: {sorted(sizes)}")
    if k < 1:
        raise ConfigurationError("k must be >= 1")
    impl = protocols.get(protocol)
    config = {
        "protocol": impl.name,
        "support": s.fraction,
        "k": k,
        "universe_size": partitions[0].universe_size,
        "partition_sizes": [p.count for p in partitions],
        "global_threshold": s.absolute(sum(p.count for p in partitions)),
        "data_digest": db_digest(partitions),
        "meta": dict(meta or {}),
    }
    nodes = impl.make_nodes(partitions, s, k)
    meter = TrafficMeter()
    rounds = simulate(nodes, meter)
    frequent = impl.finalize(nodes)
    return RunTrace(
        protocol=impl.name,
        config=config,
        nodes=[n.report() for n in nodes],
        meter=meter,
        frequent=frequent,
        rounds=rounds,
        passes=max((n.passes_issued for n in nodes), default=0),
        partitions=partitions,
        node_results=[n.result() for n in nodes],
        candidate_log=[list(getattr(n, "ll_history", [])) for n in nodes],
    )


@dataclass
class ReplayResult:
    ok: bool
    divergence: str | None = None

    def __bool__(self) -> bool:
        return self.ok


class ConfigMismatchError(ValueError):
    pass


def _first_divergence(a, b, path="") -> str | None:
    if type(a) is not type(b):
        return path or "<root>"
    if isinstance(a, dict):
        for key in sorted(set(a) | set(b), key=str):
            if key not in a or key not in b:
                return f"{path}.{key}"
            d = _first_divergence(a[key], b[key], f"{path}.{key}")
            if d:
                return d
        return None
    if isinstance(a, list):
        for i, (x, y) in enumerate(zip(a, b)):
            d = _first_divergence(x, y, f"{path}[{i}]")
            if d:
                return d
        if len(a) != len(b):
            return f"{path}[{min(len(a), len(b))}]"
        return None
    return None if a == b else (path or "<root>")


def compare_traces(a: RunTrace, b: RunTrace) -> ReplayResult:
    """Field-by-field comparison; refuses traces produced from different configs."""
    if a.config != b.config:
        key = _first_divergence(a.config, b.config, "config")
        raise ConfigMismatchError(f"traces come from different configurations (first difference at {key})")
    where = _first_divergence(a.to_dict(), b.to_dict())
    return ReplayResult(where is None, where)


def replay_check(trace: RunTrace) -> ReplayResult:
    """Re-run the trace's configuration and demand an identical trace."""
    if not trace.partitions:
        raise ConfigurationError("trace carries no input partitions to replay")
    cfg = trace.config
    again = run(cfg["protocol"], trace.partitions, cfg["support"], cfg["k"], meta=cfg["meta"])
    return compare_traces(trace, again)
