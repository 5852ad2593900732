import time
from dataclasses import dataclass, field

import pytest

from itemset_grid import simnet
from itemset_grid.dataio import GenParams, PartitionSpec, generate, partition, ratio_weights
from itemset_grid.itemsets import TransactionDB

TOY_ROWS = [[1, 2, 3], [1, 2], [1, 3], [2, 3], [1, 2, 3]]

BENCH_PARAMS = GenParams(num_transactions=100_000, universe_size=1_000, avg_transaction_size=20,
                         num_patterns=200, avg_pattern_size=4, corruption=0.25, seed=1)
BENCH_K = 4
BENCH_SUPPORTS = (0.01, 0.02)
BENCH_NODES = (4, 8)


@pytest.fixture
def toy():
    return TransactionDB.from_lists(TOY_ROWS, 4)


@pytest.fixture
def toy_split():
    # {T1, T2} on node 0, {T3, T4, T5} on node 1
    return [TransactionDB.from_lists(TOY_ROWS[:2], 4), TransactionDB.from_lists(TOY_ROWS[2:], 4)]


@dataclass
class BenchRun:
    nodes: int
    support: float
    fdm: simnet.RunTrace
    gfm: simnet.RunTrace


@dataclass
class Bench:
    runs: list = field(default_factory=list)
    seconds: float = 0.0


@pytest.fixture(scope="session")
def bench():
    """The quest-style benchmark: 100k transactions, 1000 items, 4 and 8 nodes, 1% and 2% support."""
    start = time.perf_counter()
    db = generate(BENCH_PARAMS)
    out = Bench()
    for m in BENCH_NODES:
        parts = partition(db, PartitionSpec(m, tuple(ratio_weights(m, 1)), seed=1))
        for s in BENCH_SUPPORTS:
            fdm = simnet.run("fdm", parts, s, BENCH_K)
            gfm = simnet.run("gfm", parts, s, BENCH_K)
            out.runs.append(BenchRun(m, s, fdm, gfm))
    out.seconds = time.perf_counter() - start
    return out


# one PASS/FAIL line per acceptance criterion at the end of the run

_criteria: dict[str, list] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    name = marker.args[0]
    entry = _criteria.setdefault(name, [True, []])
    if rep.failed:
        entry[0] = False
    if rep.when == "call":
        entry[1].extend(v for k, v in item.user_properties if k == "detail")


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for name, (ok, details) in _criteria.items():
        tr.write_line(f"{'PASS' if ok else 'FAIL'}  {name}")
        for d in details:
            tr.write_line(f"      {d}")
