"""Bidirectional term/ID dictionary and the three role-scoped ID files.

All roles share one ID space: a term keeps its ID no matter where it
occurs, which is what makes cross-role joins (object-subject chains and
the like) correct at the ID level.  ID 0 is reserved for the query
wildcard and is never assigned.  IDs are dense, assigned 1, 2, 3, ... in
first-occurrence order over the conversion stream.

On disk the dictionary is three UTF-8 text files, ``<base>.sid``,
``<base>.pid`` and ``<base>.oid``: one ``<decimal id>\\t<verbatim term>``
record per line, LF-terminated, ascending by ID, each holding exactly
the IDs seen in that role.  Term tokens cannot contain raw tabs or
newlines, so the format needs no quoting.
"""

from __future__ import annotations

import os
from enum import IntEnum
from pathlib import Path

from .nt import TermKind, TermToken, token_kind

MAX_ID = 2**32 - 1
WILDCARD = 0

ROLE_SUFFIXES = (".sid", ".pid", ".oid")


class Role(IntEnum):
    SUBJECT = 0
    PREDICATE = 1
    OBJECT = 2


class CapacityExceeded(RuntimeError):
    """The 32-bit ID space is exhausted."""


class UnknownId(KeyError):
    """Looked up an ID that was never assigned (or the 0 wildcard)."""


class DictionaryFormatError(ValueError):
    """Malformed record in an ID file."""


class ConsistencyError(ValueError):
    """The three ID files disagree (one term with two IDs, or vice versa)."""


class Dictionary:
    """In-memory term/ID mapping with per-role occurrence sets.

    Mutable while converting (single writer); treat as immutable once
    conversion is done — reads are then safe from any number of threads.
    """

    def __init__(self) -> None:
        self.term_to_id: dict[str, int] = {}
        self._terms: list[str | None] = [None]  # index 0 = wildcard, unassigned
        self.role_sets: tuple[set[int], set[int], set[int]] = (set(), set(), set())

    def __len__(self) -> int:
        return len(self._terms) - 1

    @property
    def max_id(self) -> int:
        return len(self._terms) - 1

    def encode_lexical(self, lexical: str, role: Role) -> int:
        ident = self.term_to_id.get(lexical)
        if ident is None:
            ident = len(self._terms)
            if ident > MAX_ID:
                raise CapacityExceeded(f"cannot assign ID beyond {MAX_ID}")
            self.term_to_id[lexical] = ident
            self._terms.append(lexical)
        self.role_sets[role].add(ident)
        return ident

    def encode(self, token: TermToken, role: Role) -> int:
        return self.encode_lexical(token.lexical, role)

    def decode_lexical(self, ident: int) -> str:
        if ident <= 0 or ident >= len(self._terms):
            raise UnknownId(ident)
        lex = self._terms[ident]
        assert lex is not None
        return lex

    def decode(self, ident: int) -> TermToken:
        lex = self.decode_lexical(ident)
        return TermToken(token_kind(lex), lex)

    def lookup(self, lexical: str) -> int | None:
        return self.term_to_id.get(lexical)

    def role_counts(self) -> tuple[int, int, int]:
        """Distinct subject, predicate, and object counts."""
        return tuple(len(s) for s in self.role_sets)  # type: ignore[return-value]

    def write_id_files(self, basename: str | os.PathLike) -> list[Path]:
        base = Path(basename)
        paths = []
        for role, suffix in zip(Role, ROLE_SUFFIXES):
            path = base.with_name(base.name + suffix)
            with open(path, "w", encoding="utf-8", newline="\n") as f:
                for ident in sorted(self.role_sets[role]):
                    f.write(f"{ident}\t{self._terms[ident]}\n")
            paths.append(path)
        return paths

    @classmethod
    def read_id_files(cls, basename: str | os.PathLike) -> "Dictionary":
        base = Path(basename)
        d = cls()
        by_id: dict[int, str] = {}
        for role, suffix in zip(Role, ROLE_SUFFIXES):
            path = base.with_name(base.name + suffix)
            with open(path, "r", encoding="utf-8", newline="") as f:
                for line_number, line in enumerate(f, start=1):
                    line = line.rstrip("\n")
                    if not line:
                        raise DictionaryFormatError(f"{path}:{line_number}: empty record")
                    ident_str, sep, term = line.partition("\t")
                    if not sep or not term:
                        raise DictionaryFormatError(
                            f"{path}:{line_number}: expected '<id>\\t<term>'"
                        )
                    try:
                        ident = int(ident_str)
                    except ValueError:
                        raise DictionaryFormatError(
                            f"{path}:{line_number}: bad ID {ident_str!r}"
                        ) from None
                    if ident <= 0 or ident > MAX_ID:
                        raise DictionaryFormatError(
                            f"{path}:{line_number}: ID {ident} out of range"
                        )
                    prior = by_id.get(ident)
                    if prior is not None and prior != term:
                        raise ConsistencyError(
                            f"ID {ident} maps to both {prior!r} and {term!r}"
                        )
                    existing = d.term_to_id.get(term)
                    if existing is not None and existing != ident:
                        raise ConsistencyError(
                            f"term {term!r} has IDs {existing} and {ident}"
                        )
                    by_id[ident] = term
                    d.term_to_id[term] = ident
                    d.role_sets[role].add(ident)
        if by_id:
            size = max(by_id) + 1
            d._terms = [None] * size
            for ident, term in by_id.items():
                d._terms[ident] = term
        return d
