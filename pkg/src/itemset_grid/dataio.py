"""Synthetic basket data, the transaction file format, and horizontal partitioning.

Transaction file::

    # n=<universe_size> D=<count>
    1 2 3
    1 2

one transaction per line, ascending space-separated item ids, LF-terminated.
An empty transaction is an empty line.
"""

from __future__ import annotations

import bisect
import json
import os
import random
import re
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .itemsets import InvalidInputError, TransactionDB, is_ascending

_HEADER = re.compile(r"^#\s*n=(\d+)\s+D=(\d+)\s*$")


class ParseError(ValueError):
    def __init__(self, path, line_no: int, msg: str):
        super().__init__(f"{path}:{line_no}: {msg}")
        self.path = path
        self.line_no = line_no


@dataclass(frozen=True)
class GenParams:
    num_transactions: int
    universe_size: int
    avg_transaction_size: float = 20.0
    num_patterns: int = 200
    avg_pattern_size: float = 4.0
    corruption: float = 0.25
    seed: int = 0

    def __post_init__(self):
        if self.num_transactions < 1 or self.universe_size < 1 or self.num_patterns < 1:
            raise InvalidInputError("transaction, item and pattern counts must all be >= 1")
        if not (1 <= self.avg_transaction_size <= self.universe_size):
            raise InvalidInputError("avg_transaction_size must be in [1, universe_size]")
        if not (1 <= self.avg_pattern_size <= self.universe_size):
            raise InvalidInputError("avg_pattern_size must be in [1, universe_size]")
        if not (0 <= self.corruption <= 1):
            raise InvalidInputError("corruption must be a probability")


def generate(params: GenParams) -> TransactionDB:
    """Simplified Quest-style basket generator.

    Seed patterns get Poisson sizes around ``avg_pattern_size`` over uniformly
    drawn items and exponential selection weights. Each transaction draws a
    Poisson target size around ``avg_transaction_size`` and keeps adding
    weighted-random patterns (each item dropped with probability
    ``corruption``) while they fit; a pattern that would overshoot is taken
    half the time and then ends the transaction. Short transactions are padded
    with uniform random items.
    """
    p = params
    n = p.universe_size
    np_rng = np.random.default_rng(p.seed)
    pat_sizes = np.clip(np_rng.poisson(p.avg_pattern_size - 1, p.num_patterns) + 1, 1, n)
    patterns = [
        tuple(int(i) for i in np_rng.choice(n, size=int(sz), replace=False))
        for sz in pat_sizes
    ]
    weights = np_rng.exponential(1.0, p.num_patterns)
    cum = np.cumsum(weights / weights.sum()).tolist()
    cum[-1] = 1.0
    targets = np.clip(np_rng.poisson(p.avg_transaction_size, p.num_transactions), 1, n).tolist()
    rng = random.Random(int(np_rng.integers(2**63)))
    rand = rng.random
    randrange = rng.randrange
    drop = p.corruption
    rows = []
    for target in targets:
        basket: set[int] = set()
        for _ in range(4 * target):
            if len(basket) >= target:
                break
            pat = patterns[bisect.bisect_left(cum, rand())]
            picked = [i for i in pat if rand() >= drop] if drop else pat
            if len(basket) + len(picked) > target:
                if rand() < 0.5:
                    basket.update(picked)
                break
            basket.update(picked)
        while len(basket) < target:
            basket.add(randrange(n))
        rows.append(tuple(sorted(basket)))
    return TransactionDB(tuple(rows), n)


def format_db(db: TransactionDB) -> str:
    lines = [f"# n={db.universe_size} D={db.count}"]
    lines.extend(" ".join(map(str, t)) for t in db.transactions)
    return "\n".join(lines) + "\n"


def atomic_write_text(path, text: str) -> None:
    """Write via temp file + rename; '-', symlinks and non-regular targets are written in place."""
    if str(path) == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    path = Path(path)
    if path.is_symlink() or (path.exists() and not path.is_file()):
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_db(db: TransactionDB, path) -> None:
    atomic_write_text(path, format_db(db))


def parse_db(text: str, path="<string>") -> TransactionDB:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ParseError(path, 1, "missing header line")
    m = _HEADER.match(lines[0])
    if not m:
        raise ParseError(path, 1, f"bad header {lines[0]!r}, expected '# n=<items> D=<count>'")
    n, d = int(m.group(1)), int(m.group(2))
    rows = []
    for line_no, line in enumerate(lines[1:], start=2):
        tokens = line.split()
        try:
            t = tuple(int(tok) for tok in tokens)
        except ValueError:
            raise ParseError(path, line_no, f"non-numeric token in {line!r}") from None
        if any(tok.startswith(("+", "-")) for tok in tokens):
            raise ParseError(path, line_no, "item ids must be unsigned decimals")
        if not is_ascending(t):
            raise ParseError(path, line_no, "items must be strictly ascending (no duplicates)")
        if t and t[-1] >= n:
            raise ParseError(path, line_no, f"item {t[-1]} outside universe n={n}")
        rows.append(t)
    if len(rows) != d:
        raise ParseError(path, len(lines), f"header says D={d} but found {len(rows)} transactions")
    return TransactionDB(tuple(rows), n)


def read_db(path) -> TransactionDB:
    return parse_db(Path(path).read_text(encoding="utf-8"), path)


def ratio_weights(num_nodes: int, r: float) -> list[float]:
    """``1:r`` over M nodes: weights linearly spaced from 1 to r."""
    if num_nodes < 1:
        raise InvalidInputError("num_nodes must be >= 1")
    if r <= 0:
        raise InvalidInputError("ratio must be positive")
    if num_nodes == 1:
        return [1.0]
    return [1 + (r - 1) * i / (num_nodes - 1) for i in range(num_nodes)]


def parse_ratio(text: str, num_nodes: int) -> list[float]:
    """Accept ``1:r`` (interpolated) or an explicit ``w1:w2:...:wM`` list."""
    parts = [float(x) for x in text.split(":")]
    if len(parts) == 2 and num_nodes != 2:
        if parts[0] != 1:
            raise InvalidInputError(f"two-endpoint ratio must start at 1, got {text!r}")
        return ratio_weights(num_nodes, parts[1])
    if len(parts) != num_nodes:
        raise InvalidInputError(f"ratio {text!r} has {len(parts)} weights for {num_nodes} nodes")
    return parts


@dataclass(frozen=True)
class PartitionSpec:
    num_nodes: int
    ratios: tuple[float, ...] = field(default=())
    seed: int = 0

    def __post_init__(self):
        if self.num_nodes < 1:
            raise InvalidInputError("num_nodes must be >= 1")
        if not self.ratios:
            object.__setattr__(self, "ratios", (1.0,) * self.num_nodes)
        object.__setattr__(self, "ratios", tuple(float(w) for w in self.ratios))
        if len(self.ratios) != self.num_nodes:
            raise InvalidInputError("need exactly one weight per node")
        if any(w <= 0 for w in self.ratios):
            raise InvalidInputError("partition weights must be positive")


def apportion(total: int, weights: Sequence[float]) -> list[int]:
    """Largest-remainder apportionment; ties go to the lower index."""
    wsum = sum(weights)
    quotas = [total * w / wsum for w in weights]
    sizes = [int(q) for q in quotas]
    rest = total - sum(sizes)
    order = sorted(range(len(weights)), key=lambda i: (-(quotas[i] - sizes[i]), i))
    for i in order[:rest]:
        sizes[i] += 1
    return sizes


def partition(db: TransactionDB, spec: PartitionSpec) -> list[TransactionDB]:
    """Seeded shuffle, contiguous split by apportioned sizes.

    Each part keeps its transactions in their original relative order.
    """
    if spec.num_nodes > db.count:
        raise InvalidInputError(f"cannot split {db.count} transactions over {spec.num_nodes} nodes")
    sizes = apportion(db.count, spec.ratios)
    perm = np.random.default_rng(spec.seed).permutation(db.count)
    parts = []
    start = 0
    for size in sizes:
        idx = np.sort(perm[start:start + size]).tolist()
        parts.append(TransactionDB(tuple(db.transactions[i] for i in idx), db.universe_size))
        start += size
    return parts


def write_partitions(parts: Sequence[TransactionDB], out_dir, spec: PartitionSpec, source) -> Path:
    """Write one transaction file per part plus ``manifest.json``; returns the manifest path."""
    out_dir = Path(out_dir)
    entries = []
    for i, part in enumerate(parts):
        name = f"part-{i:03d}.txt"
        write_db(part, out_dir / name)
        entries.append({"path": name, "count": part.count})
    manifest = {
        "source": str(source),
        "parts": entries,
        "seed": spec.seed,
        "ratios": list(spec.ratios),
    }
    path = out_dir / "manifest.json"
    atomic_write_text(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def read_manifest(path) -> tuple[dict, list[TransactionDB]]:
    """Load a partition manifest; part paths are relative to the manifest's directory."""
    path = Path(path)
    manifest = json.loads(path.read_text(encoding="utf-8"))
    for key in ("source", "parts", "seed", "ratios"):
        if key not in manifest:
            raise InvalidInputError(f"{path}: manifest missing {key!r}")
    parts = []
    for entry in manifest["parts"]:
        part = read_db(path.parent / entry["path"])
        if part.count != entry["count"]:
            raise InvalidInputError(f"{entry['path']}: manifest count {entry['count']} != {part.count}")
        parts.append(part)
    return manifest, parts
