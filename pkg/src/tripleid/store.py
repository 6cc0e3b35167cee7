"""The binary triple-ID file: sequential write, chunked read, memory math.

Layout: 4-byte magic ``TID1``, 4-byte little-endian version (=1), 8-byte
little-endian triple count, then ``count`` records of three 4-byte
little-endian unsigned IDs in input order.  The header exists for
truncation detection; everything after it is the flat ID array.

Files are immutable once written.  A loaded chunk is immutable and may
be shared across search workers; chunk iteration itself is sequential.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple

import numpy as np

MAGIC = b"TID1"
VERSION = 1
_HEADER = struct.Struct("<4sIQ")
HEADER_BYTES = _HEADER.size  # 16
ID_BYTES = 4
TRIPLE_BYTES = 3 * ID_BYTES

ID_DTYPE = np.dtype("<u4")

# Chunks are sized in multiples of 2**20 triples against a memory budget.
CHUNK_GRANULE = 1 << 20
DEFAULT_MEMORY_BUDGET = 256 * 1024 * 1024


class Triple(NamedTuple):
    subj: int
    pred: int
    obj: int


class StoreError(Exception):
    pass


class BadMagic(StoreError):
    pass


class BadVersion(StoreError):
    pass


class TruncatedFile(StoreError):
    """Declared triple count exceeds the bytes actually present."""


class InvariantViolation(ValueError):
    """A zero ID was passed where only stored (nonzero) IDs are legal."""


@dataclass(frozen=True)
class TripleChunk:
    """A contiguous run of triples as one flat ID array.

    ``data`` is laid out [s0, p0, o0, s1, p1, o1, ...]; ``base_index`` is
    the global index of the first triple.
    """

    data: np.ndarray
    base_index: int

    @property
    def triple_count(self) -> int:
        return len(self.data) // 3

    @property
    def rows(self) -> np.ndarray:
        """(n, 3) view of the same buffer."""
        return self.data.reshape(-1, 3)


def as_id_array(triples: Iterable[Triple] | np.ndarray) -> np.ndarray:
    """Normalize triple input to an (n, 3) uint32 array, validating IDs."""
    if isinstance(triples, np.ndarray):
        arr = np.ascontiguousarray(triples, dtype=ID_DTYPE).reshape(-1, 3)
    else:
        flat = [c for t in triples for c in t]
        arr = np.array(flat, dtype=np.uint64).reshape(-1, 3)
        if arr.size and arr.max() > 0xFFFFFFFF:
            raise InvariantViolation("ID exceeds 32 bits")
        arr = arr.astype(ID_DTYPE)
    if arr.size and not arr.all():
        raise InvariantViolation("stored triples must not contain ID 0")
    return arr


def write_tid(triples: Iterable[Triple] | np.ndarray, path: str | os.PathLike) -> int:
    """Write triples to ``path``; returns the triple count."""
    arr = as_id_array(triples)
    count = len(arr)
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, VERSION, count))
        f.write(arr.astype(ID_DTYPE, copy=False).tobytes())
    return count


def read_header(path: str | os.PathLike) -> int:
    """Validate the header and return the declared triple count."""
    with open(path, "rb") as f:
        header = f.read(HEADER_BYTES)
    if len(header) < HEADER_BYTES:
        raise TruncatedFile(f"{path}: header shorter than {HEADER_BYTES} bytes")
    magic, version, count = _HEADER.unpack(header)
    if magic != MAGIC:
        raise BadMagic(f"{path}: magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise BadVersion(f"{path}: version {version}, expected {VERSION}")
    return count


def read_chunks(
    path: str | os.PathLike, chunk_triples: int | None = None
) -> Iterator[TripleChunk]:
    """Yield the file's triples as chunks of ``chunk_triples`` each.

    All chunks but possibly the last are full; base indices advance by
    ``chunk_triples``.  ``None`` asks for the budget-default chunk size.
    """
    if chunk_triples is None:
        chunk_triples = chunk_triples_for_budget(DEFAULT_MEMORY_BUDGET)
    if chunk_triples < 1:
        raise ValueError("chunk_triples must be >= 1")
    count = read_header(path)
    with open(path, "rb") as f:
        f.seek(HEADER_BYTES)
        base = 0
        while base < count:
            want = min(chunk_triples, count - base)
            buf = f.read(want * TRIPLE_BYTES)
            if len(buf) < want * TRIPLE_BYTES:
                raise TruncatedFile(
                    f"{path}: header declares {count} triples, data ends at "
                    f"triple {base + len(buf) // TRIPLE_BYTES}"
                )
            yield TripleChunk(np.frombuffer(buf, dtype=ID_DTYPE), base)
            base += want


def read_all(path: str | os.PathLike) -> TripleChunk:
    """Whole file as a single chunk (empty chunk for an empty file)."""
    for chunk in read_chunks(path, chunk_triples=max(1, read_header(path))):
        return chunk
    return TripleChunk(np.empty(0, dtype=ID_DTYPE), 0)


def device_memory_bytes(n_ids: int) -> int:
    """Working-set bytes for a data array of ``n_ids`` IDs.

    Accounts for the data array, the per-triple position array, and the
    3-ID key: (N + N/3 + 3) * 4.
    """
    if n_ids % 3 != 0:
        raise ValueError("data array length must be a multiple of 3")
    return (n_ids + n_ids // 3 + 3) * ID_BYTES


def chunk_triples_for_budget(budget_bytes: int) -> int:
    """Largest granule-multiple chunk whose working set fits the budget."""
    k = 1
    while device_memory_bytes(3 * CHUNK_GRANULE * (k + 1)) <= budget_bytes:
        k += 1
    return k * CHUNK_GRANULE
