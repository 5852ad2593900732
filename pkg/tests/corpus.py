"""Seeded random small databases and cluster layouts for equivalence checks."""

import random
from dataclasses import dataclass

from itemset_grid.dataio import PartitionSpec, partition, ratio_weights
from itemset_grid.itemsets import TransactionDB

SUPPORTS = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]
NODE_COUNTS = [1, 2, 3, 5]
RATIOS = [1, 5, 10]


@dataclass
class Case:
    seed: int
    rows: list
    n: int
    s: float
    k: int
    m: int
    ratio: int

    @property
    def db(self):
        return TransactionDB.from_lists(self.rows, self.n)

    def parts(self):
        spec = PartitionSpec(self.m, tuple(ratio_weights(self.m, self.ratio)), seed=self.seed)
        return partition(self.db, spec)

    def __str__(self):
        return f"seed={self.seed} n={self.n} D={len(self.rows)} s={self.s} k={self.k} M={self.m} 1:{self.ratio}"


def make_case(seed: int) -> Case:
    rng = random.Random(seed)
    n = rng.randint(3, 20)
    m = rng.choice(NODE_COUNTS)
    d = rng.randint(max(m, 1), 200)
    density = rng.uniform(0.05, 0.4)
    # a few planted patterns so deeper levels are reachable
    patterns = [rng.sample(range(n), rng.randint(2, min(5, n))) for _ in range(rng.randint(0, 3))]
    rows = []
    for _ in range(d):
        t = {i for i in range(n) if rng.random() < density}
        if patterns and rng.random() < 0.5:
            t.update(rng.choice(patterns))
        rows.append(sorted(t))
    return Case(seed, rows, n, rng.choice(SUPPORTS), rng.randint(2, 5), m, rng.choice(RATIOS))


def corpus(size: int = 200, base: int = 0) -> list[Case]:
    return [make_case(base + i) for i in range(size)]
