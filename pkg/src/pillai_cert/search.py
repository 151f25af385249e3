"""Brute-force enumeration of ``U_n - base**m = c``.

The table maps each ``c`` to every ``(n, m)`` in the searched box that
produces it.  Two index conventions ship as presets:

``stated``
    ``n >= 3`` with ``n = 4`` skipped (``P_1 = P_2 = P_3`` and ``P_4 = P_5``,
    so only one index per repeated value is kept), and ``m >= 0``.
``theorem``
    ``n >= 5`` and ``m >= 1``.
"""
from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from .sequence import PADOVAN, RecurrenceSpec, term, terms

__all__ = [
    "SearchConfig",
    "Representation",
    "SolutionTable",
    "CONVENTIONS",
    "CLAIMED_REPRESENTATIONS",
    "CORRECTED_REPRESENTATIONS",
    "enumerate_table",
    "multi_represented",
    "verify_representation",
    "DiffReport",
    "diff_against_claim",
    "table_to_json",
    "table_from_json",
    "table_to_csv",
]


@dataclass(frozen=True)
class SearchConfig:
    n_min: int = 0
    n_max: int = 500
    m_min: int = 0
    m_max: int = 200
    base: int = 3
    skip: frozenset[int] = frozenset()
    spec: RecurrenceSpec = PADOVAN
    convention: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "skip", frozenset(self.skip))
        if self.n_min < 0 or self.m_min < 0:
            raise ValueError("ranges must start at a non-negative index")
        if self.base < 2:
            raise ValueError("base must be at least 2")

    @classmethod
    def preset(cls, convention: str, n_max: int = 500, m_max: int = 200,
               base: int = 3, spec: RecurrenceSpec = PADOVAN) -> "SearchConfig":
        try:
            n_min, m_min, skip = CONVENTIONS[convention]
        except KeyError:
            raise ValueError(f"unknown convention {convention!r}; "
                             f"expected one of {sorted(CONVENTIONS)}") from None
        return cls(n_min, n_max, m_min, m_max, base, skip, spec, convention)

    def indices(self) -> list[int]:
        return [n for n in range(self.n_min, self.n_max + 1) if n not in self.skip]

    def with_n_range(self, n_min: int, n_max: int) -> "SearchConfig":
        return SearchConfig(n_min, n_max, self.m_min, self.m_max, self.base,
                            self.skip, self.spec, self.convention)

    def describe(self) -> dict:
        return {"n_min": self.n_min, "n_max": self.n_max, "m_min": self.m_min,
                "m_max": self.m_max, "base": self.base, "skip": sorted(self.skip),
                "recurrence": self.spec.name, "convention": self.convention}


CONVENTIONS: dict[str, tuple[int, int, frozenset[int]]] = {
    "stated": (3, 0, frozenset({4})),
    "theorem": (5, 1, frozenset()),
}


@dataclass(frozen=True, order=True)
class Representation:
    n: int
    m: int
    c: int = field(compare=False)


@dataclass(frozen=True)
class SolutionTable:
    """``c -> sorted representations`` for one search box."""

    entries: Mapping[int, tuple[Representation, ...]]
    config: SearchConfig

    def __getitem__(self, c: int) -> tuple[Representation, ...]:
        return self.entries.get(c, ())

    def __contains__(self, c: int) -> bool:
        return c in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def pairs(self, c: int) -> list[tuple[int, int]]:
        return [(r.n, r.m) for r in self[c]]


def _enumerate_rows(config: SearchConfig) -> dict[int, list[tuple[int, int]]]:
    found: dict[int, list[tuple[int, int]]] = {}
    if config.n_max < config.n_min or config.m_max < config.m_min:
        return found
    values = terms(config.spec, config.n_max)
    powers = [config.base ** config.m_min]
    for _ in range(config.m_min + 1, config.m_max + 1):
        powers.append(powers[-1] * config.base)
    for n in config.indices():
        u = values[n]
        for offset, p in enumerate(powers):
            found.setdefault(u - p, []).append((n, config.m_min + offset))
    return found


def _merge(parts: Iterable[dict[int, list[tuple[int, int]]]], config: SearchConfig) -> SolutionTable:
    merged: dict[int, list[tuple[int, int]]] = {}
    for part in parts:
        for c, pairs in part.items():
            merged.setdefault(c, []).extend(pairs)
    entries = {c: tuple(Representation(n, m, c) for n, m in sorted(set(merged[c])))
               for c in sorted(merged)}
    return SolutionTable(entries, config)


def _shards(config: SearchConfig, count: int) -> list[SearchConfig]:
    span = config.n_max - config.n_min + 1
    count = max(1, min(count, span))
    edges = [config.n_min + span * i // count for i in range(count + 1)]
    return [config.with_n_range(lo, hi - 1) for lo, hi in zip(edges, edges[1:])]


def enumerate_table(config: SearchConfig, workers: int = 1) -> SolutionTable:
    """Every ``(n, m)`` in the box, keyed by ``c``.  Empty boxes are allowed."""
    if workers <= 1 or config.n_max < config.n_min:
        return _merge([_enumerate_rows(config)], config)
    shards = _shards(config, workers)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_enumerate_rows, shards))
    return _merge(parts, config)


def merge_tables(tables: Sequence[SolutionTable], config: SearchConfig) -> SolutionTable:
    parts = [{c: [(r.n, r.m) for r in reps] for c, reps in t.entries.items()} for t in tables]
    return _merge(parts, config)


def multi_represented(table: SolutionTable, threshold: int = 2) -> list[tuple[int, tuple[Representation, ...]]]:
    if threshold < 2:
        raise ValueError("threshold must be at least 2")
    return [(c, reps) for c, reps in table.entries.items() if len(reps) >= threshold]


def verify_representation(n: int, m: int, c: int, base: int = 3,
                          spec: RecurrenceSpec = PADOVAN) -> bool:
    if n < 0 or m < 0:
        return False
    return term(spec, n) - base ** m == c


# claims as printed, and with the indices that verify
CLAIMED_REPRESENTATIONS: tuple[tuple[int, tuple[tuple[int, int], ...]], ...] = (
    (-6, ((13, 3), (6, 2))),
    (0, ((10, 2), (6, 1), (3, 0))),
    (1, ((14, 3), (7, 1), (5, 0))),
    (22, ((20, 5), (16, 3))),
    (87, ((24, 6), (17, 3))),
)

CORRECTED_REPRESENTATIONS: tuple[tuple[int, tuple[tuple[int, int], ...]], ...] = (
    (-6, ((13, 3), (6, 2))),
    (0, ((10, 2), (6, 1), (3, 0))),
    (1, ((14, 3), (7, 1), (5, 0))),
    (22, ((22, 5), (16, 3))),
    (87, ((26, 6), (19, 3))),
)


@dataclass(frozen=True)
class DiffReport:
    """Differences between a search table and a claimed list.

    ``index_mismatches`` are claimed pairs that do not satisfy the equation.
    ``claimed_absent`` verify but fall outside the table (range or
    convention).  ``unclaimed_values`` are multiply represented ``c`` missing
    from the claim, and ``unclaimed_representations`` are extra pairs for
    claimed ``c``.
    """

    index_mismatches: tuple[tuple[int, int, int], ...] = ()
    claimed_absent: tuple[tuple[int, int, int], ...] = ()
    unclaimed_values: tuple[int, ...] = ()
    unclaimed_representations: tuple[tuple[int, int, int], ...] = ()

    @property
    def empty(self) -> bool:
        return not (self.index_mismatches or self.claimed_absent
                    or self.unclaimed_values or self.unclaimed_representations)

    def as_dict(self) -> dict:
        return {
            "index_mismatches": [list(t) for t in self.index_mismatches],
            "claimed_absent": [list(t) for t in self.claimed_absent],
            "unclaimed_values": list(self.unclaimed_values),
            "unclaimed_representations": [list(t) for t in self.unclaimed_representations],
        }


def _normalize_claim(claimed) -> dict[int, list[tuple[int, int]]]:
    out: dict[int, list[tuple[int, int]]] = {}
    for c, reps in claimed:
        pairs = [(r.n, r.m) if isinstance(r, Representation) else (int(r[0]), int(r[1])) for r in reps]
        out.setdefault(int(c), []).extend(pairs)
    return out


def diff_against_claim(table: SolutionTable, claimed, threshold: int = 2) -> DiffReport:
    claim = _normalize_claim(claimed)
    cfg = table.config
    mismatches, absent, extra = [], [], []
    for c, pairs in sorted(claim.items()):
        present = set(table.pairs(c))
        for n, m in pairs:
            if not verify_representation(n, m, c, cfg.base, cfg.spec):
                mismatches.append((c, n, m))
            elif (n, m) not in present:
                absent.append((c, n, m))
        claimed_pairs = set(pairs)
        if len(present) >= threshold:
            extra.extend((c, n, m) for n, m in sorted(present - claimed_pairs))
    unclaimed = tuple(c for c, _ in multi_represented(table, threshold) if c not in claim)
    return DiffReport(tuple(mismatches), tuple(absent), unclaimed, tuple(extra))


# serialization ---------------------------------------------------------------


def table_to_json(table: SolutionTable, threshold: Optional[int] = None) -> str:
    rows = table.entries.items() if threshold is None else multi_represented(table, threshold)
    payload = {str(c): [[r.n, r.m] for r in reps] for c, reps in rows}
    return json.dumps(payload, indent=2)


def table_from_json(text: str, config: SearchConfig) -> SolutionTable:
    data = json.loads(text)
    parts = [{int(c): [(int(n), int(m)) for n, m in pairs] for c, pairs in data.items()}]
    return _merge(parts, config)


def table_to_csv(table: SolutionTable, threshold: Optional[int] = None) -> str:
    rows = table.entries.items() if threshold is None else multi_represented(table, threshold)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["c", "n", "m"])
    for c, reps in rows:
        for r in reps:
            writer.writerow([c, r.n, r.m])
    return buf.getvalue()
