"""Deterministic synthetic N-Triples generation for tests and benches."""

from __future__ import annotations

import random
from typing import Iterator

_NAMESPACES = {
    "s": "http://example.org/subject/",
    "p": "http://example.org/predicate/",
    "o": "http://example.org/object/",
}


def make_iri(role: str, index: int, iri_len: int) -> str:
    """IRI token of exactly ``iri_len`` characters (padded, brackets included)."""
    body = f"{_NAMESPACES[role]}{index:d}"
    pad = iri_len - len(body) - 2
    if pad > 0:
        body += "x" * pad
    return f"<{body}>"


def generate_lines(
    n_triples: int,
    n_subjects: int,
    n_predicates: int,
    n_objects: int,
    seed: int = 0,
    iri_len: int = 40,
) -> Iterator[str]:
    """Yield N-Triples lines with the requested term cardinalities.

    The same seed always produces byte-identical output.  Every pool
    element is forced to appear once early on, so for n_triples at or
    above the pool sizes the distinct counts are exact.
    """
    if min(n_subjects, n_predicates, n_objects) < 1 and n_triples > 0:
        raise ValueError("term pools must be non-empty")
    rng = random.Random(seed)
    subjects = [make_iri("s", i, iri_len) for i in range(n_subjects)]
    predicates = [make_iri("p", i, iri_len) for i in range(n_predicates)]
    objects = [make_iri("o", i, iri_len) for i in range(n_objects)]
    for i in range(n_triples):
        s = subjects[i] if i < n_subjects else rng.choice(subjects)
        p = predicates[i] if i < n_predicates else rng.choice(predicates)
        o = objects[i] if i < n_objects else rng.choice(objects)
        yield f"{s} {p} {o} ."
