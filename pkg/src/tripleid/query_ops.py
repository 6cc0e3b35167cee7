"""Query evaluation over search results: union, join, filter, distinct.

The pipeline materializes one vector of matched triples per pattern,
turns each into a table of variable bindings, applies filters to the
pattern that binds the filtered variable (before any join), then chains
sort-merge joins left to right in the order the patterns were written.
Join order optimization is deliberately absent.

Every operation is deterministic: output row order is a function of the
input data alone, never of worker count or chunk size.  Unbound cells
(introduced only by UNION branches with differing variables) are stored
as ID 0 and decoded to empty fields.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from time import perf_counter
from typing import Iterable, Sequence

import numpy as np

from .dictionary import Dictionary
from .kernel import search_multi
from .sparql import (
    CompiledGroup,
    CompiledQuery,
    Group,
    SLOT_LETTERS,
    TriplePattern,
    compile_group,
)
from .store import ID_DTYPE, TripleChunk, read_chunks

UNBOUND = 0
DEFAULT_ROW_CAP = 10_000_000


class DisconnectedPatterns(ValueError):
    """A pattern shares no variable with any earlier pattern."""


class ResourceLimit(RuntimeError):
    """A join intermediate exceeded the configured row cap."""


@dataclass(frozen=True)
class Relationship:
    """How pattern j links to the earlier pattern i.

    ``rel_type`` is two slot letters: the shared variable's slot in
    pattern i, then its slot in pattern j (one of OO, PP, SS, OP, OS,
    PS, PO, SP, SO).
    """

    i: int
    j: int
    rel_type: str
    variable: str


def analyze_relationships(patterns: Sequence[TriplePattern]) -> list[Relationship]:
    """One relationship per pattern after the first, left to right.

    Each pattern links to the closest earlier pattern sharing a
    variable; the first shared variable in SPO slot order is the join
    key.  Raises DisconnectedPatterns on a Cartesian product.
    """
    if len(patterns) < 2:
        return []
    slot_maps = [pat.var_slots() for pat in patterns]
    out = []
    for j in range(1, len(patterns)):
        vj = slot_maps[j]
        rel = None
        for i in range(j - 1, -1, -1):
            vi = slot_maps[i]
            shared = sorted((v for v in vi if v in vj), key=lambda v: vi[v][0])
            if shared:
                var = shared[0]
                rel = Relationship(
                    i, j, SLOT_LETTERS[vi[var][0]] + SLOT_LETTERS[vj[var][0]], var
                )
                break
        if rel is None:
            raise DisconnectedPatterns(
                f"pattern {j} shares no variable with any earlier pattern"
            )
        out.append(rel)
    return out


@dataclass
class BindingRelation:
    """Per-pattern result vector split into a join key and the rest.

    ``values`` keeps the two non-key slots of each matched triple,
    tagged by slot letter.  After prepare_for_join the key is sorted
    nondecreasing with values permuted consistently.
    """

    key: np.ndarray
    values: dict[str, np.ndarray]
    sorted: bool = False

    def __len__(self) -> int:
        return len(self.key)

    def prepare_for_join(self) -> "BindingRelation":
        if self.sorted:
            return self
        order = np.argsort(self.key, kind="stable")
        return BindingRelation(
            self.key[order],
            {slot: col[order] for slot, col in self.values.items()},
            sorted=True,
        )


def build_relation(
    rows: np.ndarray, pattern: TriplePattern, join_slot: str
) -> BindingRelation:
    """Key a pattern's matched triples by one slot, keeping the rest.

    ``rows`` are the matched triples as an (n, 3) array; ``join_slot``
    is 'S', 'P' or 'O' and must be a variable slot of the pattern.
    """
    idx = SLOT_LETTERS.index(join_slot)
    if not pattern.var_slots().get(_slot_var(pattern, idx)):
        raise ValueError(f"join slot {join_slot} is not a variable of the pattern")
    rows = rows.reshape(-1, 3)
    values = {
        SLOT_LETTERS[k]: rows[:, k].copy() for k in range(3) if k != idx
    }
    return BindingRelation(rows[:, idx].copy(), values)


def _slot_var(pattern: TriplePattern, idx: int) -> str | None:
    slot = pattern.slots[idx]
    return slot.name if hasattr(slot, "name") else None


def merge_join(
    left: BindingRelation | np.ndarray, right: BindingRelation | np.ndarray
) -> np.ndarray:
    """All (l, r) index pairs with equal keys, as an (m, 2) array.

    Equal-key runs produce their full cross product.  Output is ordered
    by ascending key, then l, then r; indices refer to the arrays as
    passed (unsorted inputs are sorted internally, stably).
    """
    lkeys = left.key if isinstance(left, BindingRelation) else np.asarray(left)
    rkeys = right.key if isinstance(right, BindingRelation) else np.asarray(right)
    if len(lkeys) == 0 or len(rkeys) == 0:
        return np.empty((0, 2), dtype=np.int64)
    lo = np.argsort(lkeys, kind="stable").astype(np.int64)
    ro = np.argsort(rkeys, kind="stable").astype(np.int64)
    ls = lkeys[lo]
    rs = rkeys[ro]
    common = np.intersect1d(ls, rs)
    if len(common) == 0:
        return np.empty((0, 2), dtype=np.int64)
    l_start = np.searchsorted(ls, common, "left")
    l_end = np.searchsorted(ls, common, "right")
    r_start = np.searchsorted(rs, common, "left")
    r_end = np.searchsorted(rs, common, "right")
    l_parts = []
    r_parts = []
    for k in range(len(common)):
        li = lo[l_start[k] : l_end[k]]
        ri = ro[r_start[k] : r_end[k]]
        l_parts.append(np.repeat(li, len(ri)))
        r_parts.append(np.tile(ri, len(li)))
    return np.stack(
        [np.concatenate(l_parts), np.concatenate(r_parts)], axis=1
    )


@dataclass
class BindingTable:
    """Materialized solution rows: one ID column per variable."""

    columns: list[str]
    data: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def empty(cls, columns: Iterable[str]) -> "BindingTable":
        cols = list(columns)
        return cls(cols, {c: np.empty(0, dtype=ID_DTYPE) for c in cols})

    @property
    def n_rows(self) -> int:
        if not self.columns:
            return 0
        return len(self.data[self.columns[0]])

    def take(self, indices: np.ndarray) -> "BindingTable":
        return BindingTable(
            list(self.columns), {c: self.data[c][indices] for c in self.columns}
        )

    def row_tuples(self) -> list[tuple[int, ...]]:
        if not self.columns:
            return []
        stacked = np.stack([self.data[c] for c in self.columns], axis=1)
        return [tuple(int(x) for x in row) for row in stacked]


def pattern_table(
    pattern: TriplePattern, var_slots: dict[str, list[int]], rows: np.ndarray
) -> BindingTable:
    """Bindings of one pattern's variables from its matched triples.

    A variable used in two slots of the same pattern keeps only rows
    where both slots agree (the search key cannot express that).
    """
    rows = rows.reshape(-1, 3)
    mask = None
    for slots in var_slots.values():
        for extra in slots[1:]:
            eq = rows[:, slots[0]] == rows[:, extra]
            mask = eq if mask is None else (mask & eq)
    if mask is not None:
        rows = rows[mask]
    columns = pattern.variables()
    return BindingTable(
        columns, {v: rows[:, var_slots[v][0]].copy() for v in columns}
    )


def str_form(lexical: str) -> str:
    """SPARQL str() view of a term token for regex filtering."""
    if lexical.startswith("<"):
        return lexical[1:-1]
    if lexical.startswith('"'):
        return lexical[1 : lexical.rfind('"')]
    return lexical


def apply_filter(
    table: BindingTable, variable: str, pattern: str, dictionary: Dictionary
) -> BindingTable:
    """Keep rows whose term for ``variable`` matches the regex."""
    rx = re.compile(pattern)
    col = table.data[variable]
    uniq = np.unique(col)
    kept = [
        u for u in uniq.tolist() if rx.search(str_form(dictionary.decode_lexical(u)))
    ]
    mask = np.isin(col, np.array(kept, dtype=ID_DTYPE))
    return table.take(np.nonzero(mask)[0])


def _chunks(store, chunk_triples: int | None) -> Iterable[TripleChunk]:
    if isinstance(store, TripleChunk):
        return [store]
    if isinstance(store, (list, tuple)):
        return store
    return read_chunks(store, chunk_triples)


def scan_patterns(
    groups: Sequence[CompiledGroup],
    store,
    workers: int = 1,
    chunk_triples: int | None = None,
) -> list[list[np.ndarray]]:
    """Matched triple rows per group and pattern, one pass over chunks.

    Each chunk stays resident while every group's keys run against it.
    """
    acc: list[list[list[np.ndarray]]] = [[[] for _ in g.keys] for g in groups]
    for chunk in _chunks(store, chunk_triples):
        for gi, g in enumerate(groups):
            if not g.satisfiable:
                continue
            res = search_multi(chunk, g.keys, workers)
            if not len(res):
                continue
            local = res.indices - chunk.base_index
            rows = chunk.rows[local]
            for q in range(len(g.keys)):
                hit = ((res.values >> np.uint32(q)) & np.uint32(1)).astype(bool)
                if hit.any():
                    acc[gi][q].append(rows[hit])
    out = []
    for g in acc:
        out.append(
            [
                np.concatenate(parts) if parts else np.empty((0, 3), dtype=ID_DTYPE)
                for parts in g
            ]
        )
    return out


def join_group(
    cg: CompiledGroup,
    pattern_rows: Sequence[np.ndarray],
    dictionary: Dictionary,
    row_cap: int | None = DEFAULT_ROW_CAP,
) -> BindingTable:
    """Filter and join one group's pattern results into a table."""
    tables = [
        pattern_table(pat, slots, rows)
        for pat, slots, rows in zip(cg.patterns, cg.var_slots, pattern_rows)
    ]
    for flt in cg.filters:
        tables = [
            apply_filter(t, flt.variable, flt.regex, dictionary)
            if flt.variable in t.data
            else t
            for t in tables
        ]
    rels = analyze_relationships(cg.patterns)
    table = tables[0]
    for rel in rels:
        right = tables[rel.j]
        pairs = merge_join(table.data[rel.variable], right.data[rel.variable])
        if row_cap is not None and len(pairs) > row_cap:
            raise ResourceLimit(
                f"join produced {len(pairs)} rows, cap is {row_cap}"
            )
        l_idx, r_idx = pairs[:, 0], pairs[:, 1]
        columns = list(table.columns)
        data = {c: table.data[c][l_idx] for c in table.columns}
        eq_mask = None
        for c in right.columns:
            if c == rel.variable:
                continue
            rcol = right.data[c][r_idx]
            if c in data:
                eq = data[c] == rcol
                eq_mask = eq if eq_mask is None else (eq_mask & eq)
            else:
                columns.append(c)
                data[c] = rcol
        table = BindingTable(columns, data)
        if eq_mask is not None:
            table = table.take(np.nonzero(eq_mask)[0])
    return table


def evaluate_group(
    group: Group | CompiledGroup,
    store,
    dictionary: Dictionary,
    workers: int = 1,
    chunk_triples: int | None = None,
    row_cap: int | None = DEFAULT_ROW_CAP,
) -> BindingTable:
    """Search, filter and join one group against a store."""
    cg = group if isinstance(group, CompiledGroup) else compile_group(group, dictionary)
    rows = scan_patterns([cg], store, workers, chunk_triples)[0]
    return join_group(cg, rows, dictionary, row_cap)


def evaluate_union(tables: Sequence[BindingTable]) -> BindingTable:
    """Concatenate branch tables over the union of their columns.

    Columns absent in a branch are unbound (ID 0) for its rows.
    """
    columns: list[str] = []
    for t in tables:
        for c in t.columns:
            if c not in columns:
                columns.append(c)
    data = {}
    for c in columns:
        parts = [
            t.data[c] if c in t.data else np.zeros(t.n_rows, dtype=ID_DTYPE)
            for t in tables
        ]
        data[c] = np.concatenate(parts) if parts else np.empty(0, dtype=ID_DTYPE)
    return BindingTable(columns, data)


def project_distinct(
    table: BindingTable, projection: Sequence[str] | None, distinct: bool
) -> BindingTable:
    """Keep the projected columns; optionally drop duplicate rows.

    Deduplication hashes row tuples and preserves first occurrence.
    """
    columns = list(projection) if projection is not None else list(table.columns)
    missing = [c for c in columns if c not in table.data]
    if missing:
        raise KeyError(f"projection names unbound variables: {missing}")
    out = BindingTable(columns, {c: table.data[c] for c in columns})
    if not distinct or out.n_rows == 0:
        return out
    seen: set[tuple[int, ...]] = set()
    keep: list[int] = []
    for i, row in enumerate(out.row_tuples()):
        if row not in seen:
            seen.add(row)
            keep.append(i)
    return out.take(np.array(keep, dtype=np.int64))


def decode_table(table: BindingTable, dictionary: Dictionary) -> str:
    """TSV rendering: header of variable names, verbatim term tokens.

    Unbound cells are empty; every line ends with LF.
    """
    lines = ["\t".join("?" + c for c in table.columns)]
    if table.n_rows:
        decoded = []
        for c in table.columns:
            col = table.data[c]
            uniq, inverse = np.unique(col, return_inverse=True)
            texts = np.array(
                [
                    "" if u == UNBOUND else dictionary.decode_lexical(int(u))
                    for u in uniq.tolist()
                ],
                dtype=object,
            )
            decoded.append(texts[inverse])
        for row in zip(*decoded):
            lines.append("\t".join(row))
    return "\n".join(lines) + "\n"


@dataclass
class QueryTimings:
    search: float = 0.0
    join: float = 0.0


def evaluate_query(
    compiled: CompiledQuery,
    store,
    dictionary: Dictionary,
    workers: int = 1,
    chunk_triples: int | None = None,
    row_cap: int | None = DEFAULT_ROW_CAP,
    timings: QueryTimings | None = None,
) -> BindingTable:
    """Full pipeline for a compiled query: scan, join, union, project."""
    t0 = perf_counter()
    per_group = scan_patterns(compiled.groups, store, workers, chunk_triples)
    t1 = perf_counter()
    branch_tables = [
        join_group(cg, rows, dictionary, row_cap)
        for cg, rows in zip(compiled.groups, per_group)
    ]
    union = evaluate_union(branch_tables)
    result = project_distinct(union, compiled.projection, compiled.distinct)
    t2 = perf_counter()
    if timings is not None:
        timings.search = t1 - t0
        timings.join = t2 - t1
    return result
