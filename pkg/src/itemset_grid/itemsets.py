"""Itemsets, transaction databases and the sequential Apriori engine.

Itemsets are plain tuples of strictly ascending non-negative ints. Support
counting goes through a vertical index: every item owns a Python int used as
a bitmask over transaction positions, so the support of an itemset is the
popcount of the AND of its items' masks. :func:`support` keeps the direct
scan with a merge-style subset test; both paths are cross-checked in tests.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from itertools import combinations
from typing import Iterable, NamedTuple, Sequence

import numpy as np

Itemset = tuple[int, ...]

# brute-force enumeration refuses universes larger than this
BRUTE_FORCE_MAX_UNIVERSE = 24


class InvalidInputError(ValueError):
    """Raised for malformed itemsets, transactions or thresholds."""


def is_ascending(items: Sequence[int]) -> bool:
    return all(a < b for a, b in zip(items, items[1:]))


def as_itemset(items: Iterable[int]) -> Itemset:
    """Normalize any iterable of item ids into a sorted, duplicate-free tuple."""
    out = tuple(sorted(set(int(i) for i in items)))
    if out and out[0] < 0:
        raise InvalidInputError(f"negative item id {out[0]}")
    return out


def is_subset_sorted(small: Sequence[int], big: Sequence[int]) -> bool:
    """Merge-style containment test for two ascending sequences."""
    n, m = len(small), len(big)
    if n > m:
        return False
    i = j = 0
    while i < n:
        if j >= m:
            return False
        a, b = small[i], big[j]
        if a == b:
            i += 1
            j += 1
        elif a > b:
            j += 1
        else:
            return False
    return True


class SupportCount(NamedTuple):
    itemset: Itemset
    count: int


@dataclass(frozen=True)
class SupportThreshold:
    """Relative minimum support; frequency means ``count >= absolute(db)``."""

    fraction: float

    def __post_init__(self):
        if not (0 < self.fraction <= 1):
            raise InvalidInputError(f"support fraction must be in (0, 1], got {self.fraction}")

    def absolute(self, count: int | "TransactionDB") -> int:
        if isinstance(count, TransactionDB):
            count = count.count
        # decimal string -> exact rational, so 0.7 * 10 is 7 and not 7.000000000000001
        exact = Fraction(repr(float(self.fraction))) * count
        return max(1, math.ceil(exact))


@dataclass(frozen=True)
class TransactionDB:
    transactions: tuple[Itemset, ...]
    universe_size: int

    def __post_init__(self):
        if self.universe_size < 0:
            raise InvalidInputError("universe_size must be non-negative")
        for pos, t in enumerate(self.transactions):
            if not is_ascending(t):
                raise InvalidInputError(f"transaction {pos} is not strictly ascending: {t}")
            if t and (t[0] < 0 or t[-1] >= self.universe_size):
                raise InvalidInputError(
                    f"transaction {pos} has item outside universe [0, {self.universe_size})"
                )

    @classmethod
    def from_lists(cls, rows: Iterable[Iterable[int]], universe_size: int | None = None) -> "TransactionDB":
        txs = tuple(as_itemset(r) for r in rows)
        if universe_size is None:
            universe_size = 1 + max((t[-1] for t in txs if t), default=-1)
        return cls(txs, universe_size)

    @property
    def count(self) -> int:
        return len(self.transactions)

    def __len__(self) -> int:
        return len(self.transactions)

    def __iter__(self):
        return iter(self.transactions)

    def items_present(self) -> Itemset:
        return tuple(sorted(self.tidmasks))

    @cached_property
    def tidmasks(self) -> dict[int, int]:
        """item -> bitmask of the transaction positions containing it."""
        d = len(self.transactions)
        if d == 0:
            return {}
        lengths = np.fromiter((len(t) for t in self.transactions), dtype=np.int64, count=d)
        total = int(lengths.sum())
        if total == 0:
            return {}
        flat = np.fromiter((i for t in self.transactions for i in t), dtype=np.int64, count=total)
        tids = np.repeat(np.arange(d, dtype=np.int64), lengths)
        order = np.argsort(flat, kind="stable")
        flat, tids = flat[order], tids[order]
        bounds = np.flatnonzero(np.diff(flat)) + 1
        starts = np.concatenate(([0], bounds))
        ends = np.concatenate((bounds, [total]))
        masks = {}
        row = np.zeros(d, dtype=bool)
        for s, e in zip(starts.tolist(), ends.tolist()):
            row[:] = False
            row[tids[s:e]] = True
            packed = np.packbits(row, bitorder="little")
            masks[int(flat[s])] = int.from_bytes(packed.tobytes(), "little")
        return masks

    def check_items(self, x: Sequence[int]) -> None:
        for item in x:
            if item < 0 or item >= self.universe_size:
                raise InvalidInputError(
                    f"item {item} outside universe [0, {self.universe_size})"
                )


def support(db: TransactionDB, x: Sequence[int]) -> SupportCount:
    """Count transactions containing ``x`` by scanning the database."""
    x = tuple(x)
    if not is_ascending(x):
        raise InvalidInputError(f"itemset must be strictly ascending: {x}")
    db.check_items(x)
    return SupportCount(x, sum(1 for t in db.transactions if is_subset_sorted(x, t)))


def count_supports(db: TransactionDB, itemsets: Sequence[Itemset]) -> list[int]:
    """Supports of many itemsets via the vertical bitmask index.

    Consecutive itemsets sharing a prefix reuse the prefix mask, so passing
    candidates in lexicographic order is much cheaper than random order.
    """
    masks = db.tidmasks
    full = db.count
    out = []
    last_prefix: Itemset | None = None
    last_mask = 0
    for x in itemsets:
        if not x:
            out.append(full)
            continue
        db.check_items(x)
        prefix = x[:-1]
        if prefix != last_prefix:
            m = -1
            for item in prefix:
                m &= masks.get(item, 0)
                if not m:
                    break
            last_prefix, last_mask = prefix, m
        m = last_mask & masks.get(x[-1], 0) if prefix else masks.get(x[-1], 0)
        out.append(m.bit_count())
    return out


@dataclass(frozen=True)
class FrequentLevel:
    level: int
    entries: tuple[SupportCount, ...] = ()

    def __post_init__(self):
        for e in self.entries:
            if len(e.itemset) != self.level:
                raise InvalidInputError(f"itemset {e.itemset} does not belong to level {self.level}")

    @classmethod
    def from_counts(cls, level: int, counts: dict[Itemset, int]) -> "FrequentLevel":
        return cls(level, tuple(SupportCount(x, c) for x, c in sorted(counts.items())))

    @cached_property
    def counts(self) -> dict[Itemset, int]:
        return {e.itemset: e.count for e in self.entries}

    def itemsets(self) -> list[Itemset]:
        return [e.itemset for e in self.entries]

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, x) -> bool:
        return tuple(x) in self.counts

    def __iter__(self):
        return iter(self.entries)


@dataclass
class LevelStats:
    """Per-level tallies for one node.

    ``generated`` is the raw candidate count, ``candidates`` the set whose
    frequency is actually decided (equal to ``generated`` except in FDM, where
    it is the locally frequent subset sent for global counting). ``successes``
    and ``failures`` split ``candidates``; ``items_involved`` counts distinct
    items in the successful itemsets (level 0: items present in the data).
    """

    level: int
    generated: int = 0
    candidates: int = 0
    successes: int = 0
    failures: int = 0
    items_involved: int = 0
    remote_work: int = 0

    def success_rate(self) -> float:
        return self.successes / self.generated if self.generated else 0.0


@dataclass
class AprioriRun:
    levels: list[FrequentLevel]
    stats: list[LevelStats]
    items_present: int = 0

    def frequent(self) -> dict[Itemset, int]:
        out = {}
        for lv in self.levels:
            out.update(lv.counts)
        return out


def _items_in(itemsets: Iterable[Itemset]) -> int:
    seen = set()
    for x in itemsets:
        seen.update(x)
    return len(seen)


def apriori_gen(frequent_prev: FrequentLevel | Iterable[Itemset]) -> list[Itemset]:
    """Join (l-1)-itemsets sharing their first l-2 items, then prune by subsets."""
    if isinstance(frequent_prev, FrequentLevel):
        prev = sorted(frequent_prev.counts)
    else:
        prev = sorted(set(tuple(x) for x in frequent_prev))
    if not prev:
        return []
    prev_set = set(prev)
    out = []
    start = 0
    n = len(prev)
    while start < n:
        prefix = prev[start][:-1]
        end = start + 1
        while end < n and prev[end][:-1] == prefix:
            end += 1
        group = prev[start:end]
        for a_pos in range(len(group)):
            a = group[a_pos]
            for b in group[a_pos + 1:]:
                cand = a + (b[-1],)
                # the two generating subsets are known frequent; check the rest
                if all(cand[:j] + cand[j + 1:] in prev_set for j in range(len(cand) - 2)):
                    out.append(cand)
        start = end
    return out


def mine_apriori(db: TransactionDB, s: SupportThreshold, k: int) -> AprioriRun:
    """Level-wise Apriori up to size ``k``; stops early at the first empty level."""
    if k < 1:
        raise InvalidInputError("k must be >= 1")
    threshold = s.absolute(db)
    present = db.items_present() if db.count else ()
    levels: list[FrequentLevel] = []
    stats: list[LevelStats] = []
    candidates: list[Itemset] = [(i,) for i in present]
    for level in range(1, k + 1):
        counts = count_supports(db, candidates)
        frequent = {x: c for x, c in zip(candidates, counts) if c >= threshold}
        lv = FrequentLevel.from_counts(level, frequent)
        levels.append(lv)
        stats.append(LevelStats(
            level=level,
            generated=len(candidates),
            candidates=len(candidates),
            successes=len(frequent),
            failures=len(candidates) - len(frequent),
            items_involved=_items_in(frequent),
        ))
        if not frequent or level == k:
            break
        candidates = apriori_gen(lv)
    return AprioriRun(levels, stats, items_present=len(present))


def maximal(levels: Sequence[FrequentLevel]) -> list[SupportCount]:
    """Frequent itemsets with no frequent proper superset.

    Relies on downward closure: an itemset with any frequent proper superset
    also has one exactly one item larger.
    """
    covered: set[Itemset] = set()
    by_level = {lv.level: lv for lv in levels}
    for lv in levels:
        for x in lv.counts:
            if len(x) > 1:
                covered.update(x[:j] + x[j + 1:] for j in range(len(x)))
    out = []
    for level in sorted(by_level):
        for e in by_level[level].entries:
            if e.itemset not in covered:
                out.append(e)
    return out


def brute_force_frequent(db: TransactionDB, s: SupportThreshold, k: int) -> list[FrequentLevel]:
    """Oracle: count every sub-itemset of every transaction, no candidate generation.

    Output is shaped like :func:`mine_apriori` levels: sizes 1.. up to ``k``,
    stopping after the first empty level.
    """
    if db.universe_size > BRUTE_FORCE_MAX_UNIVERSE:
        raise InvalidInputError(
            f"universe of {db.universe_size} items is too large to enumerate "
            f"(limit {BRUTE_FORCE_MAX_UNIVERSE})"
        )
    if k < 1:
        raise InvalidInputError("k must be >= 1")
    threshold = s.absolute(db)
    tally: Counter[Itemset] = Counter()
    for t in db.transactions:
        for size in range(1, min(k, len(t)) + 1):
            tally.update(combinations(t, size))
    levels = []
    for level in range(1, k + 1):
        frequent = {x: c for x, c in tally.items() if len(x) == level and c >= threshold}
        levels.append(FrequentLevel.from_counts(level, frequent))
        if not frequent:
            break
    return levels
