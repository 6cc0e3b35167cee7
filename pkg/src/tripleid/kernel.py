"""Data-parallel brute-force search over triple-ID chunks.

A search key is three IDs with 0 marking a free position.  Every triple
is scored with a 3-bit answer code — bit 4 for a subject hit, bit 2 for
predicate, bit 1 for object — and accepted when all of the key's bound
fields hit:

    7 SPO   6 SP?   5 S?O   4 S??
    3 ?PO   2 ?P?   1 ??O   0 no bound-field match

Since 0 is never stored, comparing a free key field is plain equality
that can never succeed; acceptance is decided by the key's bound mask.

Execution contract: the triple-index range is partitioned into W
disjoint stride sets (round-robin over fixed-size tiles, a grid-stride
loop at tile granularity, which keeps each worker's reads contiguous).
Each worker writes only its own slots of the shared position array; a
final sequential compaction yields indices in ascending order.  Results
are identical for every worker count.
"""

from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .store import ID_DTYPE, TripleChunk, read_chunks

MAX_SUBQUERIES = 32
TILE_TRIPLES = 1 << 16

ANSWER_LABELS = {
    7: "SPO",
    6: "SP?",
    5: "S?O",
    4: "S??",
    3: "?PO",
    2: "?P?",
    1: "??O",
    0: "none",
}


class TooManySubqueries(ValueError):
    """More keys than the fixed mark-set width supports."""


@dataclass(frozen=True, slots=True)
class PatternKey:
    subj: int = 0
    pred: int = 0
    obj: int = 0

    @property
    def bound_mask(self) -> int:
        return (
            (4 if self.subj else 0)
            | (2 if self.pred else 0)
            | (1 if self.obj else 0)
        )


def match_bits(triple: Sequence[int], key: PatternKey) -> int:
    """Answer code for one triple against one key; pure."""
    s, p, o = triple
    return (
        (4 if s == key.subj else 0)
        | (2 if p == key.pred else 0)
        | (1 if o == key.obj else 0)
    )


def accepts(bits: int, key: PatternKey) -> bool:
    """True iff every bound field of the key matched."""
    mask = key.bound_mask
    return (bits & mask) == mask


@dataclass(frozen=True)
class MatchResult:
    """Accepted triples of one search, indices strictly increasing.

    ``values`` holds the answer code per triple for a single-key search,
    or the subquery mark bitset (bit q = accepted by key q) for a
    multi-key search.
    """

    indices: np.ndarray
    values: np.ndarray

    def __len__(self) -> int:
        return len(self.indices)


def tile_spans(n_triples: int, workers: int, tile: int = TILE_TRIPLES) -> list[list[tuple[int, int]]]:
    """Round-robin assignment of contiguous tiles to workers.

    The per-worker span lists are disjoint and cover [0, n_triples).
    """
    spans: list[list[tuple[int, int]]] = [[] for _ in range(workers)]
    for t, lo in enumerate(range(0, n_triples, tile)):
        spans[t % workers].append((lo, min(lo + tile, n_triples)))
    return spans


_pool_lock = threading.Lock()
_pool: ThreadPoolExecutor | None = None
_pool_size = 0


def _executor(workers: int) -> ThreadPoolExecutor:
    global _pool, _pool_size
    with _pool_lock:
        if _pool is None or _pool_size < workers:
            if _pool is not None:
                _pool.shutdown(wait=False)
            _pool = ThreadPoolExecutor(max_workers=workers, thread_name_prefix="tid-search")
            _pool_size = workers
        return _pool


def _run_workers(work, workers: int) -> None:
    if workers == 1:
        work(0)
        return
    ex = _executor(workers)
    # list() propagates the first worker exception, if any.
    list(ex.map(work, range(workers)))


def _key_rows(keys: Sequence[PatternKey]) -> np.ndarray:
    return np.array([(k.subj, k.pred, k.obj) for k in keys], dtype=ID_DTYPE)


def _bits_tile(rows: np.ndarray, key_row: np.ndarray) -> np.ndarray:
    eq = rows == key_row
    return (
        (eq[:, 0].astype(np.uint8) << 2)
        | (eq[:, 1].astype(np.uint8) << 1)
        | eq[:, 2].astype(np.uint8)
    )


def search_chunk(
    chunk: TripleChunk,
    key: PatternKey,
    workers: int = 1,
    *,
    write_counts: np.ndarray | None = None,
) -> MatchResult:
    """Score every triple of the chunk against one key.

    Returns the accepted triples' global indices with their answer
    codes.  ``write_counts`` is instrumentation: when given, each worker
    increments the slots it writes, letting tests assert disjointness.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    n = chunk.triple_count
    pos = np.zeros(n, dtype=np.uint8)
    rows = chunk.rows
    key_row = _key_rows([key])[0]
    spans = tile_spans(n, workers)

    def work(w: int) -> None:
        for lo, hi in spans[w]:
            pos[lo:hi] = _bits_tile(rows[lo:hi], key_row)
            if write_counts is not None:
                write_counts[lo:hi] += 1

    _run_workers(work, workers)

    mask = key.bound_mask
    idx = np.nonzero((pos & mask) == mask)[0]
    return MatchResult(idx.astype(np.int64) + chunk.base_index, pos[idx])


def search_multi(
    chunk: TripleChunk,
    keys: Sequence[PatternKey],
    workers: int = 1,
    *,
    write_counts: np.ndarray | None = None,
) -> MatchResult:
    """Score the chunk against up to 32 keys at once.

    The result value for a triple is its mark set: bit q is set iff key
    q accepts the triple.  Triples accepted by no key are omitted.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if not 1 <= len(keys) <= MAX_SUBQUERIES:
        raise TooManySubqueries(f"{len(keys)} keys; supported range is 1..{MAX_SUBQUERIES}")
    n = chunk.triple_count
    pos = np.zeros(n, dtype=np.uint32)
    rows = chunk.rows
    key_rows = _key_rows(keys)
    masks = [k.bound_mask for k in keys]
    spans = tile_spans(n, workers)

    def work(w: int) -> None:
        for lo, hi in spans[w]:
            tile = rows[lo:hi]
            marks = np.zeros(hi - lo, dtype=np.uint32)
            for q, key_row in enumerate(key_rows):
                if masks[q] == 0:
                    marks |= np.uint32(1 << q)
                    continue
                ok = None
                for slot in range(3):
                    if key_row[slot] == 0:
                        continue
                    eq = tile[:, slot] == key_row[slot]
                    ok = eq if ok is None else (ok & eq)
                marks |= ok.astype(np.uint32) << np.uint32(q)
            pos[lo:hi] = marks
            if write_counts is not None:
                write_counts[lo:hi] += 1

    _run_workers(work, workers)

    idx = np.nonzero(pos)[0]
    return MatchResult(idx.astype(np.int64) + chunk.base_index, pos[idx])


def search_file(
    path,
    keys: PatternKey | Sequence[PatternKey],
    workers: int = 1,
    chunk_triples: int | None = None,
) -> MatchResult:
    """Chunked search over a whole .tid file.

    Equals a search over one whole-file chunk for any chunk size.  A
    single key yields answer codes, a key sequence yields mark sets.
    """
    single = isinstance(keys, PatternKey)
    parts: list[MatchResult] = []
    for chunk in read_chunks(path, chunk_triples):
        if single:
            parts.append(search_chunk(chunk, keys, workers))
        else:
            parts.append(search_multi(chunk, keys, workers))
    if not parts:
        width = np.uint8 if single else np.uint32
        return MatchResult(np.empty(0, dtype=np.int64), np.empty(0, dtype=width))
    return MatchResult(
        np.concatenate([p.indices for p in parts]),
        np.concatenate([p.values for p in parts]),
    )


def gather_rows(chunks: Iterable[TripleChunk], result: MatchResult) -> np.ndarray:
    """Triple rows for a result's global indices, in result order."""
    out = np.empty((len(result.indices), 3), dtype=ID_DTYPE)
    for chunk in chunks:
        lo = chunk.base_index
        hi = lo + chunk.triple_count
        sel = (result.indices >= lo) & (result.indices < hi)
        if sel.any():
            out[sel] = chunk.rows[result.indices[sel] - lo]
    return out
