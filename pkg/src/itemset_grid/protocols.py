"""Node state machines for centralized Apriori, FDM and GFM.

Each node exposes ``step(round, inbox) -> outgoing``, ``finished``,
``passes_issued``, ``report()`` and ``result()``; the simulator in
:mod:`itemset_grid.simnet` drives them in lockstep.

FDM spends three rounds per level: (a) extend the itemsets that are both
globally and locally frequent, count the new candidates and broadcast the
locally frequent ones, (b) count what peers sent and answer, (c) sum counts
and broadcast the globally frequent ones. The next level's (a) round first merges the
broadcasts, so every node holds the same global level before generating.

GFM mines locally up to k, then runs its top-down loop in two-round passes:
odd rounds resolve the previous pass and send the next request, even rounds
answer peers' requests.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

from .itemsets import (
    FrequentLevel,
    Itemset,
    LevelStats,
    SupportCount,
    SupportThreshold,
    TransactionDB,
    _items_in,
    apriori_gen,
    count_supports,
    maximal,
    mine_apriori,
)
from .simnet import FrequentEntry, Kind, Message, NodeReport, PassStats


def _immediate_subsets(x: Itemset) -> list[Itemset]:
    return [x[:j] + x[j + 1:] for j in range(len(x))]


class _Node:
    def __init__(self, node_id: int, num_nodes: int, db: TransactionDB, s: SupportThreshold,
                 k: int, total_count: int):
        self.node_id = node_id
        self.num_nodes = num_nodes
        self.db = db
        self.s = s
        self.k = k
        self.local_threshold = s.absolute(db)
        self.global_threshold = s.absolute(total_count)
        self.finished = False
        self.passes_issued = 0
        self.levels: list[LevelStats] = []
        self.pass_stats: dict[int, PassStats] = {}

    @property
    def peers(self) -> list[int]:
        return [j for j in range(self.num_nodes) if j != self.node_id]

    def _pass(self, pass_no: int) -> PassStats:
        if pass_no not in self.pass_stats:
            self.pass_stats[pass_no] = PassStats(pass_no)
        return self.pass_stats[pass_no]

    def _send_all(self, rnd: int, kind: Kind, payload: tuple, pass_no: int) -> list[Message]:
        return [Message(self.node_id, j, rnd, kind, payload, pass_no) for j in self.peers]

    def report(self) -> NodeReport:
        return NodeReport(
            node=self.node_id,
            transactions=self.db.count,
            items_present=len(self.db.tidmasks),
            levels=list(self.levels),
            passes=[self.pass_stats[p] for p in sorted(self.pass_stats)],
        )


class CentralizedNode(_Node):
    """Single node running plain Apriori over the merged data."""

    def step(self, rnd, inbox):
        if not self.finished:
            run = mine_apriori(self.db, self.s, self.k)
            self.levels = run.stats
            self._result = run.frequent()
            self.finished = True
        return []

    def result(self) -> dict[Itemset, int]:
        return dict(self._result)


class FdmNode(_Node):
    def __init__(self, *args):
        super().__init__(*args)
        self.level = 0
        self.global_levels: list[dict[Itemset, int]] = []
        self.local_counts: dict[Itemset, int] = {}
        self.candidates: tuple[Itemset, ...] = ()   # GC_{l,i}: locally frequent, sent to peers
        self.admitted: dict[Itemset, int] = {}
        self.totals: dict[Itemset, int] = {}

    def step(self, rnd, inbox):
        if self.finished:
            return []
        phase = (rnd - 1) % 3
        if phase == 0:
            return self._merge_and_generate(rnd, inbox)
        if phase == 1:
            return self._answer(rnd, inbox)
        return self._decide(rnd, inbox)

    def _merge_and_generate(self, rnd, inbox):
        if self.level:
            merged = dict(self.admitted)
            for m in inbox:
                assert m.kind == Kind.FREQUENT_BROADCAST
                for x, c in m.payload:
                    if merged.setdefault(x, c) != c:
                        raise AssertionError(f"nodes disagree on global count of {x}")
            self.global_levels.append(dict(sorted(merged.items())))
            stats = self.levels[-1]
            mine = [x for x in self.candidates if x in merged]
            stats.successes = len(mine)
            stats.failures = len(self.candidates) - len(mine)
            stats.items_involved = _items_in(mine)
            if not merged or self.level == self.k:
                self.finished = True
                return []
        self.level += 1
        if self.level == 1:
            generated = [(i,) for i in sorted(self.db.tidmasks)]
        else:
            # local pruning: extend only itemsets frequent both globally and here
            heavy = [x for x in self.global_levels[-1] if self.local_counts.get(x, 0) >= self.local_threshold]
            generated = apriori_gen(heavy)
        counts = count_supports(self.db, generated)
        self.local_counts = dict(zip(generated, counts))
        self.candidates = tuple(x for x, c in zip(generated, counts) if c >= self.local_threshold)
        self.levels.append(LevelStats(level=self.level, generated=len(generated),
                                      candidates=len(self.candidates)))
        self.passes_issued = self.level
        self._pass(self.level).sent = len(self.candidates)
        return self._send_all(rnd, Kind.CANDIDATE_SET, self.candidates, self.level)

    def _answer(self, rnd, inbox):
        out = []
        requested = sorted({x for m in inbox for x in m.payload} - self.local_counts.keys())
        extra = dict(zip(requested, count_supports(self.db, requested)))
        work = 0
        for m in inbox:
            assert m.kind == Kind.CANDIDATE_SET
            payload = tuple(SupportCount(x, self.local_counts.get(x, extra.get(x))) for x in m.payload)
            work += len(m.payload)
            out.append(Message(self.node_id, m.sender, rnd, Kind.COUNT_RESPONSE, payload, self.level))
        self.levels[-1].remote_work = work
        self._pass(self.level).remote_work = work
        return out

    def _decide(self, rnd, inbox):
        totals = {x: self.local_counts[x] for x in self.candidates}
        for m in inbox:
            assert m.kind == Kind.COUNT_RESPONSE
            for x, c in m.payload:
                totals[x] += c
        self.admitted = {x: c for x, c in totals.items() if c >= self.global_threshold}
        payload = tuple(SupportCount(x, c) for x, c in sorted(self.admitted.items()))
        return self._send_all(rnd, Kind.FREQUENT_BROADCAST, payload, self.level)

    def result(self) -> dict[Itemset, int]:
        out = {}
        for lv in self.global_levels:
            out.update(lv)
        return out


class GfmNode(_Node):
    def __init__(self, *args):
        super().__init__(*args)
        local = mine_apriori(self.db, self.s, self.k)
        self.levels = local.stats
        self.local_levels: list[FrequentLevel] = local.levels
        self.local_counts: dict[Itemset, int] = local.frequent()
        self.ll: tuple[Itemset, ...] = tuple(sorted(e.itemset for e in maximal(local.levels)))
        self.ll_history: list[tuple[Itemset, ...]] = []
        self.pending: tuple[Itemset, ...] | None = None
        self.responses: dict[int, dict[Itemset, int]] = {}
        # per-node counts (own entry = local count) of every itemset this node requested
        self.counted: dict[Itemset, tuple[int, ...]] = {}
        self._counted_by_item: dict[int, set[Itemset]] = {}
        self.exact: dict[Itemset, int] = {}        # passed with a fully summed count
        self.inferred: dict[Itemset, int] = {}     # admitted from summed lower bounds
        self.known_frequent: set[Itemset] = set()  # downward closure of exact | inferred
        self.failed: set[Itemset] = set()

    def step(self, rnd, inbox):
        out = []
        for m in inbox:
            if m.kind == Kind.COUNT_REQUEST:
                counts = count_supports(self.db, m.payload)
                self._pass(m.pass_no).remote_work += len(m.payload)
                payload = tuple(SupportCount(x, c) for x, c in zip(m.payload, counts))
                out.append(Message(self.node_id, m.sender, rnd, Kind.COUNT_RESPONSE, payload, m.pass_no))
            elif m.kind == Kind.COUNT_RESPONSE:
                self.responses[m.sender] = dict(m.payload)
            else:
                raise AssertionError(f"GFM node got unexpected {m.kind!r}")
        if rnd % 2 == 1 and not self.finished:
            if self.pending is not None:
                self._resolve()
            if self.ll:
                self.passes_issued += 1
                self.ll_history.append(self.ll)
                self._pass(self.passes_issued).sent = len(self.ll)
                out.extend(self._send_all(rnd, Kind.COUNT_REQUEST, self.ll, self.passes_issued))
                self.pending, self.ll = self.ll, ()
            else:
                self.finished = True
        return out

    def _mark_frequent(self, x: Itemset) -> None:
        stack = [x]
        while stack:
            y = stack.pop()
            if y in self.known_frequent:
                continue
            self.known_frequent.add(y)
            if len(y) > 1:
                stack.extend(_immediate_subsets(y))

    def lower_bound(self, y: Itemset) -> int:
        """Own exact count plus, per peer, the largest count of any counted superset."""
        total = self.local_counts[y]
        pools = sorted((self._counted_by_item.get(i, set()) for i in y), key=len)
        supers = set.intersection(*pools) if pools else set(self.counted)
        if not supers:
            return total
        for j in self.peers:
            total += max(self.counted[z][j] for z in supers)
        return total

    def _resolve(self) -> None:
        pending = self.pending
        if len(self.responses) != len(self.peers):
            raise AssertionError(f"node {self.node_id} missing count responses")
        stats = self._pass(self.passes_issued)
        failing = []
        for x in pending:
            per_node = tuple(
                self.local_counts[x] if j == self.node_id else self.responses[j][x]
                for j in range(self.num_nodes)
            )
            self.counted[x] = per_node
            for i in x:
                self._counted_by_item.setdefault(i, set()).add(x)
            total = sum(per_node)
            if total >= self.global_threshold:
                self.exact[x] = total
                self._mark_frequent(x)
                stats.exact_frequent += 1
            else:
                self.failed.add(x)
                failing.append(x)
                stats.failed += 1
        nxt: set[Itemset] = set()
        for x in failing:
            for y in _immediate_subsets(x) if len(x) > 1 else ():
                if y in nxt or y in self.known_frequent or y in self.failed:
                    continue
                bound = self.lower_bound(y)
                if bound >= self.global_threshold:
                    self.inferred[y] = bound
                    self._mark_frequent(y)
                    stats.inferred_frequent += 1
                else:
                    nxt.add(y)
        self.ll = tuple(sorted(y for y in nxt if y not in self.known_frequent))
        self.pending = None
        self.responses = {}

    def result(self) -> dict[Itemset, int]:
        """Frequent itemsets known here: exact totals, or lower bounds where inferred."""
        out = {}
        for y in self.known_frequent:
            out[y] = self.exact[y] if y in self.exact else self.lower_bound(y)
        return out


def gfm_finalize(nodes: Sequence[GfmNode]) -> dict[Itemset, FrequentEntry]:
    """Union of every node's globally frequent sets; exact counts win over bounds."""
    out: dict[Itemset, FrequentEntry] = {}
    for node in nodes:
        for y in node.known_frequent:
            if y in node.exact:
                out[y] = FrequentEntry(node.exact[y], True)
    for node in nodes:
        for y in node.known_frequent:
            if y in out and out[y].exact:
                continue
            b = node.lower_bound(y)
            if y not in out or b > out[y].count:
                out[y] = FrequentEntry(b, False)
    return dict(sorted(out.items(), key=lambda kv: (len(kv[0]), kv[0])))


def _fdm_finalize(nodes: Sequence[FdmNode]) -> dict[Itemset, FrequentEntry]:
    results = [n.result() for n in nodes]
    if any(r != results[0] for r in results[1:]):
        raise AssertionError("FDM nodes ended with different global frequent sets")
    return {x: FrequentEntry(c) for x, c in sorted(results[0].items(), key=lambda kv: (len(kv[0]), kv[0]))}


def _centralized_finalize(nodes) -> dict[Itemset, FrequentEntry]:
    return {x: FrequentEntry(c) for x, c in sorted(nodes[0].result().items(), key=lambda kv: (len(kv[0]), kv[0]))}


@dataclass(frozen=True)
class Protocol:
    name: str
    node_cls: type
    finalize: Callable
    merge_partitions: bool = False

    def make_nodes(self, partitions: Sequence[TransactionDB], s: SupportThreshold, k: int):
        if self.merge_partitions:
            merged = TransactionDB(tuple(t for p in partitions for t in p.transactions),
                                   partitions[0].universe_size)
            partitions = [merged]
        total = sum(p.count for p in partitions)
        m = len(partitions)
        return [self.node_cls(i, m, p, s, k, total) for i, p in enumerate(partitions)]


PROTOCOLS = {
    "fdm": Protocol("fdm", FdmNode, _fdm_finalize),
    "gfm": Protocol("gfm", GfmNode, gfm_finalize),
    "centralized": Protocol("centralized", CentralizedNode, _centralized_finalize, merge_partitions=True),
}


def get(name: str) -> Protocol:
    key = name.lower().replace("_", "-")
    if key == "centralized-reference":
        key = "centralized"
    if key not in PROTOCOLS:
        raise ValueError(f"unknown protocol {name!r}; choose from {sorted(PROTOCOLS)}")
    return PROTOCOLS[key]
