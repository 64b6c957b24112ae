"""Strict and lenient micro-averaged P/R/F1 in the style of the n2c2 2018 scripts.

Entity matching is one-to-one. Strict requires equal category and identical
span; lenient requires equal category and overlapping half-open spans
(``[0,5)`` and ``[5,9)`` do not overlap). Among matchings of maximum size the
one with the largest total character overlap is chosen, then the one that
favours earlier gold entities.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .documents import AnnotatedDoc, EntityAnnotation, RelationAnnotation
from .errors import DanglingRelation, DocIdMismatch

STRICT = "strict"
LENIENT = "lenient"
MODES = (STRICT, LENIENT)


@dataclass(frozen=True)
class Counts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0

    def __add__(self, other: "Counts") -> "Counts":
        return Counts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)

    def to_dict(self) -> dict:
        return {
            "tp": self.tp, "fp": self.fp, "fn": self.fn,
            "precision": self.precision, "recall": self.recall, "f1": self.f1,
        }


@dataclass
class EvalReport:
    mode: str
    task: str
    per_class: dict[str, Counts] = field(default_factory=dict)

    @property
    def micro(self) -> Counts:
        return sum(self.per_class.values(), Counts())

    @property
    def precision(self) -> float:
        return self.micro.precision

    @property
    def recall(self) -> float:
        return self.micro.recall

    @property
    def f1(self) -> float:
        return self.micro.f1

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "task": self.task,
            "micro": self.micro.to_dict(),
            "per_class": {k: v.to_dict() for k, v in sorted(self.per_class.items())},
        }


class _Tally:
    def __init__(self):
        self.tp: Counter = Counter()
        self.fp: Counter = Counter()
        self.fn: Counter = Counter()

    def report(self, mode: str, task: str) -> EvalReport:
        keys = set(self.tp) | set(self.fp) | set(self.fn)
        return EvalReport(mode, task, {k: Counts(self.tp[k], self.fp[k], self.fn[k]) for k in sorted(keys)})


def _check_mode(mode: str) -> None:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")


def _compatible(g: EntityAnnotation, p: EntityAnnotation, mode: str) -> bool:
    if g.category != p.category:
        return False
    if mode == STRICT:
        return g.start == p.start and g.end == p.end
    return g.start < p.end and p.start < g.end


def _overlap(g: EntityAnnotation, p: EntityAnnotation) -> int:
    return max(0, min(g.end, p.end) - max(g.start, p.start))


def match_entities(
    gold: Sequence[EntityAnnotation], pred: Sequence[EntityAnnotation], mode: str = STRICT
) -> list[tuple[int, int]]:
    """Maximum one-to-one matching as sorted ``(gold_idx, pred_idx)`` pairs."""
    _check_mode(mode)
    edges: dict[int, list[int]] = defaultdict(list)
    by_cat: dict[str, list[int]] = defaultdict(list)
    for pi, p in enumerate(pred):
        by_cat[p.category].append(pi)
    for gi, g in enumerate(gold):
        for pi in by_cat.get(g.category, ()):
            if _compatible(g, pred[pi], mode):
                edges[gi].append(pi)

    # connected components of the bipartite graph keep each assignment small
    parent: dict = {}

    def find(x):
        while parent.setdefault(x, x) != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for gi, pis in edges.items():
        for pi in pis:
            parent[find(("g", gi))] = find(("p", pi))
    components: dict = defaultdict(lambda: ([], []))
    for gi in sorted(edges):
        components[find(("g", gi))][0].append(gi)
    for pi in sorted({pi for pis in edges.values() for pi in pis}):
        components[find(("p", pi))][1].append(pi)

    matching: list[tuple[int, int]] = []
    for gis, pis in components.values():
        if len(gis) == 1 and len(pis) == 1:
            matching.append((gis[0], pis[0]))
            continue
        matching.extend(_solve_component(gis, pis, edges, gold, pred))
    return sorted(matching)


def _solve_component(gis, pis, edges, gold, pred):
    g = len(gis)
    pcol = {pi: c for c, pi in enumerate(pis)}
    overlaps = {(gi, pi): _overlap(gold[gi], pred[pi]) for gi in gis for pi in edges[gi]}
    # lexicographic objective packed into one integer weight:
    # pair count >> total overlap >> preference for earlier gold entities
    rank_scale = g * g + 1
    pair_bonus = (rank_scale * max(overlaps.values()) + g) * min(g, len(pis)) + 1
    w = np.zeros((g, len(pis)))
    for r, gi in enumerate(gis):
        for pi in edges[gi]:
            w[r, pcol[pi]] = pair_bonus + rank_scale * overlaps[gi, pi] + (g - r)
    rows, cols = linear_sum_assignment(w, maximize=True)
    return [(gis[r], pis[c]) for r, c in zip(rows, cols) if w[r, c] > 0]


# ---------------------------------------------------------------------------
# corpus-level scoring


def _entity_map(docs) -> dict[str, Sequence[EntityAnnotation]]:
    if isinstance(docs, Mapping):
        return {k: (v.entities if isinstance(v, AnnotatedDoc) else v) for k, v in docs.items()}
    return {d.doc_id: d.entities for d in docs}


def _relation_map(docs) -> dict[str, tuple[Sequence[EntityAnnotation], Sequence[RelationAnnotation]]]:
    if isinstance(docs, Mapping):
        return {k: ((v.entities, v.relations) if isinstance(v, AnnotatedDoc) else v) for k, v in docs.items()}
    return {d.doc_id: (d.entities, d.relations) for d in docs}


def _same_keys(gold: Mapping, pred: Mapping) -> None:
    if set(gold) != set(pred):
        missing = sorted(set(gold) - set(pred))[:5]
        extra = sorted(set(pred) - set(gold))[:5]
        raise DocIdMismatch(f"gold/pred doc ids differ (missing in pred: {missing}, extra in pred: {extra})")


def score_concepts(gold_docs, pred_docs, mode: str = STRICT) -> EvalReport:
    """Entity-level scores. Documents may be given as AnnotatedDoc iterables or
    as mappings ``doc_id -> entities``."""
    _check_mode(mode)
    gold, pred = _entity_map(gold_docs), _entity_map(pred_docs)
    _same_keys(gold, pred)
    tally = _Tally()
    for doc_id in sorted(gold):
        g, p = gold[doc_id], pred[doc_id]
        matched = match_entities(g, p, mode)
        mg = {gi for gi, _ in matched}
        mp = {pi for _, pi in matched}
        for gi, _ in matched:
            tally.tp[g[gi].category] += 1
        for gi, ent in enumerate(g):
            if gi not in mg:
                tally.fn[ent.category] += 1
        for pi, ent in enumerate(p):
            if pi not in mp:
                tally.fp[ent.category] += 1
    return tally.report(mode, "concept")


def align_entities(gold: Sequence[EntityAnnotation], pred: Sequence[EntityAnnotation], mode: str) -> dict[str, str]:
    """pred entity_id -> gold entity_id through the one-to-one entity matching."""
    return {pred[pi].entity_id: gold[gi].entity_id for gi, pi in match_entities(gold, pred, mode)}


def score_relations(
    gold_docs,
    pred_docs,
    mode: str = STRICT,
    entity_alignment: Mapping[str, Mapping[str, str]] | None = None,
    task: str = "relation",
) -> EvalReport:
    """A predicted relation is a true positive when its type matches a gold
    relation whose endpoints are the gold entities its own endpoints align to."""
    _check_mode(mode)
    gold, pred = _relation_map(gold_docs), _relation_map(pred_docs)
    _same_keys(gold, pred)
    tally = _Tally()
    for doc_id in sorted(gold):
        g_ents, g_rels = gold[doc_id]
        p_ents, p_rels = pred[doc_id]
        g_ids = {e.entity_id for e in g_ents}
        p_ids = {e.entity_id for e in p_ents}
        for rel in g_rels:
            if rel.head not in g_ids or rel.tail not in g_ids:
                raise DanglingRelation(f"{doc_id}: gold {rel.relation_id} references a missing entity")
        for rel in p_rels:
            if rel.head not in p_ids or rel.tail not in p_ids:
                raise DanglingRelation(f"{doc_id}: predicted {rel.relation_id} references a missing entity")

        if entity_alignment is not None and doc_id in entity_alignment:
            align = entity_alignment[doc_id]
        else:
            align = align_entities(g_ents, p_ents, mode)
        pool = Counter((r.rel_type, r.head, r.tail) for r in g_rels)
        for rel in p_rels:
            key = (rel.rel_type, align.get(rel.head), align.get(rel.tail))
            if pool[key] > 0:
                pool[key] -= 1
                tally.tp[rel.rel_type] += 1
            else:
                tally.fp[rel.rel_type] += 1
        for (rel_type, _, _), left in pool.items():
            if left:
                tally.fn[rel_type] += left
    return tally.report(mode, task)


def score_end_to_end(gold_docs, pred_docs, mode: str = STRICT) -> tuple[EvalReport, EvalReport]:
    """Concept report plus relation report over predicted entities."""
    gold = {d.doc_id: d for d in gold_docs} if not isinstance(gold_docs, Mapping) else dict(gold_docs)
    pred = {d.doc_id: d for d in pred_docs} if not isinstance(pred_docs, Mapping) else dict(pred_docs)
    concepts = score_concepts(gold, pred, mode)
    concepts.task = "end_to_end"
    relations = score_relations(gold, pred, mode, task="end_to_end")
    return concepts, relations


# ---------------------------------------------------------------------------
# rendering


def format_table(rows: Iterable[tuple[str, EvalReport | None, EvalReport | None]]) -> str:
    """Aligned text table: label, strict P/R/F, lenient P/R/F."""
    header1 = f"{'Task':<28}{'Strict':<27}{'Lenient':<27}"
    header2 = f"{'':<28}" + f"{'Prec.':<9}{'Rec.':<9}{'F(b=1)':<9}" * 2
    lines = [header1.rstrip(), header2.rstrip()]
    for label, strict, lenient in rows:
        cells = ""
        for rep in (strict, lenient):
            if rep is None:
                cells += f"{'-':<9}" * 3
            else:
                m = rep.micro
                cells += f"{m.precision:<9.4f}{m.recall:<9.4f}{m.f1:<9.4f}"
        lines.append(f"{label:<28}{cells}".rstrip())
    return "\n".join(lines) + "\n"


def format_per_class(report: EvalReport) -> str:
    lines = [f"{'Category':<30}{'TP':>6}{'FP':>6}{'FN':>6}{'Prec.':>9}{'Rec.':>9}{'F(b=1)':>9}"]
    for cat, c in sorted(report.per_class.items()):
        lines.append(f"{cat:<30}{c.tp:>6}{c.fp:>6}{c.fn:>6}{c.precision:>9.4f}{c.recall:>9.4f}{c.f1:>9.4f}")
    m = report.micro
    lines.append(f"{'(micro)':<30}{m.tp:>6}{m.fp:>6}{m.fn:>6}{m.precision:>9.4f}{m.recall:>9.4f}{m.f1:>9.4f}")
    return "\n".join(lines) + "\n"
