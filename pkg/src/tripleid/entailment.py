"""Two-stage search pipelines for the six two-pattern RDFS rules.

Each rule searches its first pattern, gathers the matches into a hash
table keyed on the variable linking the two patterns, then issues one
search key per distinct link value (batched 32 at a time) and joins the
two tables on the link to instantiate conclusions:

    R2   s p o,  p rdfs:domain D          =>  s rdf:type D
    R3   s p o,  p rdfs:range R           =>  o rdf:type R
    R7   s p o,  p rdfs:subPropertyOf q   =>  s q o
    R5   p rdfs:subPropertyOf q,  q rdfs:subPropertyOf r
                                          =>  p rdfs:subPropertyOf r
    R9   s rdf:type x,  x rdfs:subClassOf y    =>  s rdf:type y
    R11  x rdfs:subClassOf y,  y rdfs:subClassOf z
                                          =>  x rdfs:subClassOf z

For R2/R3/R7 the unconstrained ``s p o`` pattern runs second: stage 1
searches the schema pattern and its bindings key stage 2.  Rules are
applied once; no fixpoint iteration.

The remaining single-pattern RDFS rules reduce to a plain pattern
search and are not handled here.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .dictionary import Dictionary, Role
from .kernel import MAX_SUBQUERIES, PatternKey, search_multi
from .store import TripleChunk, read_chunks

RDF_TYPE = "<http://www.w3.org/1999/02/22-rdf-syntax-ns#type>"
RDFS_DOMAIN = "<http://www.w3.org/2000/01/rdf-schema#domain>"
RDFS_RANGE = "<http://www.w3.org/2000/01/rdf-schema#range>"
RDFS_SUBPROPERTY = "<http://www.w3.org/2000/01/rdf-schema#subPropertyOf>"
RDFS_SUBCLASS = "<http://www.w3.org/2000/01/rdf-schema#subClassOf>"

SUBJ, PRED, OBJ = 0, 1, 2


@dataclass(frozen=True)
class EntailmentRule:
    """One two-pattern rule in pipeline form.

    ``link_slot``/``partner_slot`` say which stage-1 match columns carry
    the linking value and the retained partner value.  ``stage2_pred``
    is None when the link value itself is the stage-2 predicate (the
    ``s p o`` rules); otherwise stage-2 keys are (link, pred, 0).
    ``value_slots`` are the stage-2 columns kept for the conclusion,
    which ``conclude(partner1, value2, ids)`` assembles.
    """

    rule_id: int
    stage1_pred: str
    link_slot: int
    partner_slot: int
    stage2_pred: str | None
    value_slots: tuple[int, ...]
    conclusion_pred: str
    conclude: Callable[[int, tuple[int, ...], int], tuple[int, int, int]]


RULES: dict[int, EntailmentRule] = {
    2: EntailmentRule(
        2, RDFS_DOMAIN, SUBJ, OBJ, None, (SUBJ,), RDF_TYPE,
        lambda d, v, pred: (v[0], pred, d),
    ),
    3: EntailmentRule(
        3, RDFS_RANGE, SUBJ, OBJ, None, (OBJ,), RDF_TYPE,
        lambda r, v, pred: (v[0], pred, r),
    ),
    7: EntailmentRule(
        7, RDFS_SUBPROPERTY, SUBJ, OBJ, None, (SUBJ, OBJ), "",
        lambda q, v, pred: (v[0], q, v[1]),
    ),
    5: EntailmentRule(
        5, RDFS_SUBPROPERTY, OBJ, SUBJ, RDFS_SUBPROPERTY, (OBJ,), RDFS_SUBPROPERTY,
        lambda p, v, pred: (p, pred, v[0]),
    ),
    9: EntailmentRule(
        9, RDF_TYPE, OBJ, SUBJ, RDFS_SUBCLASS, (OBJ,), RDF_TYPE,
        lambda s, v, pred: (s, pred, v[0]),
    ),
    11: EntailmentRule(
        11, RDFS_SUBCLASS, OBJ, SUBJ, RDFS_SUBCLASS, (OBJ,), RDFS_SUBCLASS,
        lambda x, v, pred: (x, pred, v[0]),
    ),
}


@dataclass
class RuleRun:
    """Everything one rule application produced, for reporting."""

    rule_id: int
    stage1_indices: np.ndarray
    stage1_table: dict[int, set[int]]
    stage2_indices: np.ndarray
    stage2_table: dict[int, set]
    conclusions: set[tuple[int, int, int]]
    res1: int = 0
    res2: int = 0

    @property
    def dist1(self) -> int:
        return len(self.stage1_table)

    @property
    def dist2(self) -> int:
        return sum(len(v) for v in self.stage2_table.values())


def report_counts(run: RuleRun) -> tuple[int, int, int, int, int]:
    """(res1, dist1, res2, dist2, all) as reported per rule execution."""
    return (run.res1, run.dist1, run.res2, run.dist2, len(run.conclusions))


def _chunks(store, chunk_triples):
    if isinstance(store, TripleChunk):
        return [store]
    if isinstance(store, (list, tuple)):
        return store
    return list(read_chunks(store, chunk_triples))


def _search_rows(
    chunks: Iterable[TripleChunk], keys: list[PatternKey], workers: int
) -> tuple[np.ndarray, np.ndarray, int]:
    """Matched (indices, rows, accepted-pair count) over all chunks/keys.

    Keys are batched below the mark-set width; batching cannot change
    the match set, only how it is gathered.
    """
    idx_parts: list[np.ndarray] = []
    row_parts: list[np.ndarray] = []
    pairs = 0
    batches = [
        keys[start : start + MAX_SUBQUERIES]
        for start in range(0, len(keys), MAX_SUBQUERIES)
    ]
    for chunk in chunks:
        for batch in batches:
            res = search_multi(chunk, batch, workers)
            if not len(res):
                continue
            marks = res.values
            pairs += sum(
                int(((marks >> np.uint32(q)) & np.uint32(1)).sum())
                for q in range(len(batch))
            )
            idx_parts.append(res.indices)
            row_parts.append(chunk.rows[res.indices - chunk.base_index])
    if not idx_parts:
        return (
            np.empty(0, dtype=np.int64),
            np.empty((0, 3), dtype=np.uint32),
            0,
        )
    indices = np.concatenate(idx_parts)
    rows = np.concatenate(row_parts)
    # Batches can report the same triple more than once; keep one copy
    # per index, in ascending order.
    order = np.argsort(indices, kind="stable")
    indices = indices[order]
    rows = rows[order]
    keep = np.ones(len(indices), dtype=bool)
    keep[1:] = indices[1:] != indices[:-1]
    return indices[keep], rows[keep], pairs


def run_rule(
    rule: int | EntailmentRule,
    store,
    dictionary: Dictionary,
    workers: int = 1,
    chunk_triples: int | None = None,
    deduplicate: bool = True,
) -> RuleRun:
    """Apply one rule over a store; single application, no fixpoint.

    ``deduplicate=False`` sends every stage-1 link value (with repeats)
    to stage 2 instead of the distinct set; the conclusions are the
    same either way, it only inflates the key array.
    """
    if isinstance(rule, int):
        rule = RULES[rule]
    empty = RuleRun(
        rule.rule_id,
        np.empty(0, dtype=np.int64), {},
        np.empty(0, dtype=np.int64), {},
        set(),
    )
    pred1 = dictionary.lookup(rule.stage1_pred)
    if pred1 is None:
        return empty
    pred2 = None
    if rule.stage2_pred is not None:
        pred2 = dictionary.lookup(rule.stage2_pred)
        if pred2 is None:
            return empty

    chunks = _chunks(store, chunk_triples)

    idx1, rows1, res1 = _search_rows(chunks, [PatternKey(0, pred1, 0)], workers)
    table1: dict[int, set[int]] = {}
    for link, partner in zip(
        rows1[:, rule.link_slot].tolist(), rows1[:, rule.partner_slot].tolist()
    ):
        table1.setdefault(link, set()).add(partner)
    if not table1:
        empty.res1 = res1
        return empty

    if deduplicate:
        links = sorted(table1)
    else:
        links = rows1[:, rule.link_slot].tolist()
    if rule.stage2_pred is None:
        keys2 = [PatternKey(0, link, 0) for link in links]
    else:
        keys2 = [PatternKey(link, pred2, 0) for link in links]

    idx2, rows2, res2 = _search_rows(chunks, keys2, workers)
    table2: dict[int, set] = {}
    link_col2 = PRED if rule.stage2_pred is None else SUBJ
    for k in range(len(rows2)):
        link = int(rows2[k, link_col2])
        value = tuple(int(rows2[k, slot]) for slot in rule.value_slots)
        if len(rule.value_slots) == 1:
            table2.setdefault(link, set()).add(value[0])
        else:
            table2.setdefault(link, set()).add(value)

    conclusion_pred = 0
    conclusions: set[tuple[int, int, int]] = set()
    for link, values2 in table2.items():
        partners = table1.get(link)
        if not partners:
            continue
        if conclusion_pred == 0 and rule.conclusion_pred:
            conclusion_pred = dictionary.encode_lexical(
                rule.conclusion_pred, Role.PREDICATE
            )
        for partner in partners:
            for value in values2:
                v = value if isinstance(value, tuple) else (value,)
                conclusions.add(rule.conclude(partner, v, conclusion_pred))

    return RuleRun(
        rule.rule_id, idx1, table1, idx2, table2, conclusions, res1, res2
    )
