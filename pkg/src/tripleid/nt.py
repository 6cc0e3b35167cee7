"""Streaming N-Triples parser.

Statements are kept as verbatim term tokens (IRIs with their angle
brackets, literals with quotes and any ``^^<datatype>`` / ``@lang``
suffix, blank nodes with the ``_:`` prefix) so that re-serialization is
byte-exact.  A fourth term, when present (N-Quads context), is validated
and discarded; the engine is triple-based.

Out of scope: Turtle abbreviations (prefixed names, ``;``/``,`` lists),
RDF-star, and IRI validation beyond bracket balancing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import IO, Iterable, Iterator


class TermKind(Enum):
    IRI = "iri"
    LITERAL = "literal"
    BLANK = "blank"


class ParseError(ValueError):
    """Malformed statement; carries the line number and byte offset."""

    def __init__(self, message: str, line_number: int, offset: int):
        super().__init__(f"line {line_number}, byte {offset}: {message}")
        self.message = message
        self.line_number = line_number
        self.offset = offset


@dataclass(frozen=True, slots=True)
class TermToken:
    """One RDF term in its verbatim N-Triples surface form."""

    kind: TermKind
    lexical: str


@dataclass(frozen=True, slots=True)
class RawStatement:
    subject: TermToken
    predicate: TermToken
    object: TermToken
    line_number: int

    def to_line(self) -> str:
        """Canonical single-space serialization of the statement."""
        return f"{self.subject.lexical} {self.predicate.lexical} {self.object.lexical} ."


@dataclass
class ParseReport:
    """Tally of one parsing pass; errors are kept only in lenient mode."""

    statements: int = 0
    skipped: int = 0
    errors: list[ParseError] = field(default_factory=list)

    @property
    def error_count(self) -> int:
        return len(self.errors)


def token_kind(lexical: str) -> TermKind:
    """Term kind implied by the token's first character."""
    c = lexical[0]
    if c == "<":
        return TermKind.IRI
    if c == '"':
        return TermKind.LITERAL
    if c == "_":
        return TermKind.BLANK
    raise ValueError(f"not a term token: {lexical!r}")


_WS = " \t"
# Runs to the next whitespace; the statement terminator '.' also ends a
# blank-node label (labels with embedded dots are out of scope).
_BLANK_END = " \t."


def _byte_offset(line: str, index: int) -> int:
    return len(line[:index].encode("utf-8"))


def _parse_term(line: str, i: int, line_number: int) -> tuple[TermToken, int]:
    """Parse one term starting at ``i``; returns (token, next index)."""
    c = line[i]
    if c == "<":
        end = line.find(">", i + 1)
        if end < 0:
            raise ParseError("unterminated IRI", line_number, _byte_offset(line, i))
        return TermToken(TermKind.IRI, line[i : end + 1]), end + 1
    if c == '"':
        j = i + 1
        n = len(line)
        while j < n:
            ch = line[j]
            if ch == "\\":
                j += 2
                continue
            if ch == '"':
                break
            j += 1
        if j >= n:
            raise ParseError("unterminated literal", line_number, _byte_offset(line, i))
        end = j + 1
        if line.startswith("^^<", end):
            close = line.find(">", end + 3)
            if close < 0:
                raise ParseError(
                    "unterminated datatype IRI", line_number, _byte_offset(line, end)
                )
            end = close + 1
        elif line.startswith("@", end):
            k = end + 1
            while k < n and (line[k].isalnum() or line[k] == "-"):
                k += 1
            if k == end + 1:
                raise ParseError("empty language tag", line_number, _byte_offset(line, end))
            end = k
        return TermToken(TermKind.LITERAL, line[i:end]), end
    if c == "_":
        if not line.startswith("_:", i):
            raise ParseError("malformed blank node", line_number, _byte_offset(line, i))
        j = i + 2
        n = len(line)
        while j < n and line[j] not in _BLANK_END:
            j += 1
        if j == i + 2:
            raise ParseError("empty blank node label", line_number, _byte_offset(line, i))
        return TermToken(TermKind.BLANK, line[i:j]), j
    raise ParseError(f"unexpected character {c!r}", line_number, _byte_offset(line, i))


def parse_line(line: str, line_number: int = 1) -> RawStatement | None:
    """Parse one physical line (no trailing newline).

    Returns None for blank and comment lines, a RawStatement otherwise.
    Raises ParseError on malformed input.  An N-Quads context term is
    accepted and dropped.
    """
    n = len(line)
    i = 0
    while i < n and line[i] in _WS:
        i += 1
    if i == n or line[i] == "#":
        return None

    terms: list[TermToken] = []
    while True:
        if i == n:
            raise ParseError("missing terminal '.'", line_number, _byte_offset(line, i))
        if line[i] == ".":
            i += 1
            break
        if len(terms) == 4:
            raise ParseError("too many terms", line_number, _byte_offset(line, i))
        token, i = _parse_term(line, i, line_number)
        terms.append(token)
        while i < n and line[i] in _WS:
            i += 1

    # Only whitespace or a comment may follow the terminator.
    while i < n and line[i] in _WS:
        i += 1
    if i < n and line[i] != "#":
        raise ParseError("trailing content after '.'", line_number, _byte_offset(line, i))

    if len(terms) < 3:
        raise ParseError(
            f"expected 3 terms, found {len(terms)}", line_number, _byte_offset(line, 0)
        )
    subj, pred, obj = terms[0], terms[1], terms[2]
    if pred.kind is not TermKind.IRI:
        raise ParseError("predicate must be an IRI", line_number, _byte_offset(line, 0))
    if subj.kind is TermKind.LITERAL:
        raise ParseError("subject must not be a literal", line_number, _byte_offset(line, 0))
    if len(terms) == 4 and terms[3].kind is TermKind.LITERAL:
        raise ParseError("context term must not be a literal", line_number, _byte_offset(line, 0))
    return RawStatement(subj, pred, obj, line_number)


def parse_stream(
    source: IO[bytes] | Iterable[bytes],
    *,
    strict: bool = False,
    report: ParseReport | None = None,
) -> Iterator[RawStatement]:
    """Yield statements from a byte stream in input order.

    In lenient mode (default) malformed lines are recorded in ``report``
    and skipped; in strict mode the first error aborts the iteration.
    """
    if report is None:
        report = ParseReport()
    for line_number, raw in enumerate(source, start=1):
        if raw.endswith(b"\n"):
            raw = raw[:-1]
        if raw.endswith(b"\r"):
            raw = raw[:-1]
        try:
            try:
                line = raw.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise ParseError(
                    f"invalid UTF-8: {exc.reason}", line_number, exc.start
                ) from exc
            stmt = parse_line(line, line_number)
        except ParseError as err:
            if strict:
                raise
            report.errors.append(err)
            continue
        if stmt is None:
            report.skipped += 1
        else:
            report.statements += 1
            yield stmt
