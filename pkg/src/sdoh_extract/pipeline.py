"""End-to-end extraction, cross-domain adaptation and patient-level aggregation."""

from __future__ import annotations

import csv
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

from . import corpus, linker, tagger, textproc
from .documents import AnnotatedDoc, Document, EntityAnnotation, RelationAnnotation
from .errors import EmptyRoster, MissingTargetData, SchemaVersionMismatch, UnknownPatient
from .schema import ATTRIBUTE, CONCEPT, SDoHSchema, default_schema
from .tagger import TrainConfig

log = logging.getLogger(__name__)

DIRECT = "direct"
MERGE_RETRAIN = "merge_retrain"
FINE_TUNE = "fine_tune"
STRATEGIES = (DIRECT, MERGE_RETRAIN, FINE_TUNE)


@dataclass(frozen=True)
class SDoHRecord:
    doc_id: str
    patient_id: str
    concept: EntityAnnotation
    attributes: tuple[tuple[str, EntityAnnotation], ...] = ()
    model_versions: tuple[str, str] = ("", "")

    @property
    def category(self) -> str:
        return self.concept.category

    def sort_key(self):
        return (self.doc_id, self.concept.start, self.concept.end, self.concept.category)


@dataclass
class DocumentExtraction:
    document: Document
    entities: list[EntityAnnotation]
    relations: list[RelationAnnotation]
    records: list[SDoHRecord]
    orphans: list[EntityAnnotation]

    def as_annotated(self) -> AnnotatedDoc:
        return AnnotatedDoc(self.document, tuple(self.entities), tuple(self.relations))


def _check_versions(ner_model, re_model, schema: SDoHSchema) -> None:
    ner_model.require_trained()
    re_model.require_trained()
    versions = {ner_model.schema_version, re_model.schema_version, schema.version}
    if len(versions) != 1:
        raise SchemaVersionMismatch(
            f"schema versions differ: ner={ner_model.schema_version} re={re_model.schema_version} "
            f"schema={schema.version}"
        )


def extract_document(ner_model, re_model, document: Document, schema: SDoHSchema | None = None) -> DocumentExtraction:
    schema = schema or default_schema()
    _check_versions(ner_model, re_model, schema)
    tokens = textproc.tokenize(document.text)
    labels, _ = tagger.predict_tags(ner_model, tokens)
    entities = textproc.decode_bio(tokens, labels, document.text)
    relations = linker.link(re_model, document, entities, schema, tokens)

    by_id = {e.entity_id: e for e in entities}
    linked: dict[str, list[tuple[str, EntityAnnotation]]] = {}
    for rel in relations:
        linked.setdefault(rel.tail, []).append((rel.rel_type, by_id[rel.head]))
    versions = (ner_model.fingerprint, re_model.fingerprint)
    records = [
        SDoHRecord(document.doc_id, document.patient_id, e, tuple(linked.get(e.entity_id, ())), versions)
        for e in entities
        if schema.role(e.category) == CONCEPT
    ]
    heads = {rel.head for rel in relations}
    orphans = [e for e in entities if schema.role(e.category) == ATTRIBUTE and e.entity_id not in heads]
    return DocumentExtraction(document, entities, relations, records, orphans)


def extract(ner_model, re_model, document: Document, schema: SDoHSchema | None = None) -> list[SDoHRecord]:
    """tokenize -> tag -> decode -> candidate pairs -> link -> records."""
    return extract_document(ner_model, re_model, document, schema).records


# ---------------------------------------------------------------------------
# batch


@dataclass
class BatchResult:
    records: list[SDoHRecord] = field(default_factory=list)
    extractions: list[DocumentExtraction] = field(default_factory=list)
    diagnostics: list[dict] = field(default_factory=list)
    timing: dict = field(default_factory=dict)


_WORKER: dict = {}


def _init_worker(ner_model, re_model, schema):
    _WORKER.update(ner=ner_model, re=re_model, schema=schema)


def _process(item) -> tuple[str, DocumentExtraction | None, dict | None]:
    name = item.doc_id if isinstance(item, Document) else Path(item[0]).stem
    try:
        doc = item if isinstance(item, Document) else corpus.load_document(item[0], item[1])
        return name, extract_document(_WORKER["ner"], _WORKER["re"], doc, _WORKER["schema"]), None
    except Exception as exc:  # isolate per-document failures
        return name, None, {"doc_id": name, "kind": "error", "error": type(exc).__name__, "message": str(exc)}


def run_batch(
    ner_model,
    re_model,
    documents: Iterable,
    schema: SDoHSchema | None = None,
    parallelism: int = 1,
) -> BatchResult:
    """Extract over many documents; the output does not depend on ``parallelism``.

    Items are :class:`Document` objects or ``(txt_path, manifest_entry)``
    pairs loaded inside the worker, so unreadable files become diagnostics.
    """
    schema = schema or default_schema()
    _check_versions(ner_model, re_model, schema)
    items = list(documents)
    t0 = time.perf_counter()
    if parallelism <= 1 or len(items) <= 1:
        _init_worker(ner_model, re_model, schema)
        results = [_process(it) for it in items]
    else:
        chunk = max(1, len(items) // (parallelism * 4))
        with ProcessPoolExecutor(parallelism, initializer=_init_worker,
                                 initargs=(ner_model, re_model, schema)) as pool:
            results = list(pool.map(_process, items, chunksize=chunk))
    elapsed = time.perf_counter() - t0

    out = BatchResult()
    for name, extraction, diag in sorted(results, key=lambda r: r[0]):
        if diag is not None:
            out.diagnostics.append(diag)
            continue
        out.extractions.append(extraction)
        out.records.extend(sorted(extraction.records, key=SDoHRecord.sort_key))
        for orphan in extraction.orphans:
            out.diagnostics.append({
                "doc_id": name, "kind": "orphan_attribute", "entity_id": orphan.entity_id,
                "category": orphan.category, "start": orphan.start, "end": orphan.end,
            })
    out.timing = {
        "documents": len(items),
        "seconds": elapsed,
        "parallelism": parallelism,
        "docs_per_second": len(items) / elapsed if elapsed > 0 else None,
    }
    return out


# ---------------------------------------------------------------------------
# adaptation


def adapt(
    source_ner,
    source_re,
    strategy: str,
    source_corpus: Sequence[AnnotatedDoc] = (),
    target_train: Sequence[AnnotatedDoc] = (),
    target_val: Sequence[AnnotatedDoc] = (),
    config: TrainConfig = TrainConfig(),
    schema: SDoHSchema | None = None,
):
    """Return (ner, re) models for the target domain.

    direct: the source models as they are; merge_retrain: fresh models on
    source + target training data; fine_tune: continue from source weights on
    target training data. Both trained strategies validate on ``target_val``.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"strategy must be one of {STRATEGIES}")
    if strategy == DIRECT:
        return source_ner, source_re
    if not target_train or not target_val:
        raise MissingTargetData(f"strategy {strategy!r} needs target training and validation data")
    schema = schema or default_schema()
    if strategy == MERGE_RETRAIN:
        if not source_corpus:
            raise MissingTargetData("merge_retrain needs the source training corpus")
        merged = list(source_corpus) + list(target_train)
        return (
            tagger.train_tagger(merged, target_val, config, schema),
            linker.train_linker(merged, target_val, config, schema),
        )
    return (
        tagger.fine_tune_tagger(source_ner, target_train, target_val, config, schema),
        linker.fine_tune_linker(source_re, target_train, target_val, config, schema),
    )


# ---------------------------------------------------------------------------
# aggregation


@dataclass(frozen=True)
class RateRow:
    category: str
    concept_count: int
    patients_with_category: int
    total_patients: int

    @property
    def rate_fraction(self) -> Fraction:
        return Fraction(self.patients_with_category, self.total_patients)

    @property
    def rate(self) -> float:
        return self.patients_with_category / self.total_patients


@dataclass(frozen=True)
class ExtractionRateTable:
    rows: tuple[RateRow, ...]
    total_patients: int

    def __getitem__(self, category: str) -> RateRow:
        for row in self.rows:
            if row.category == category:
                return row
        raise KeyError(category)

    def format(self, title: str = "") -> str:
        width = max([len("SDoH")] + [len(r.category) for r in self.rows]) + 2
        lines = []
        if title:
            lines.append(title)
        lines.append(f"{'SDoH':<{width}}{'# Concepts':>12}{'Rate':>9}")
        for r in sorted(self.rows, key=lambda r: r.category):
            lines.append(f"{r.category:<{width}}{r.concept_count:>12,}{r.rate:>9.4f}")
        lines.append(f"{'Total patients':<{width}}{self.total_patients:>12,}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "total_patients": self.total_patients,
            "rows": [
                {"category": r.category, "concept_count": r.concept_count,
                 "patients_with_category": r.patients_with_category, "rate": r.rate}
                for r in self.rows
            ],
        }


def aggregate_rates(records: Iterable[SDoHRecord], patient_roster, schema: SDoHSchema | None = None) -> ExtractionRateTable:
    """Per concept category: number of concept records, number of distinct
    patients with at least one, and that number over the roster size."""
    schema = schema or default_schema()
    roster = set(patient_roster)
    if not roster:
        raise EmptyRoster("patient roster is empty")
    counts = {c: 0 for c in schema.concept_names}
    patients: dict[str, set] = {c: set() for c in schema.concept_names}
    for rec in records:
        if rec.patient_id not in roster:
            raise UnknownPatient(f"record from {rec.doc_id} has patient {rec.patient_id!r} not in roster")
        cat = rec.concept.category
        if cat not in counts:  # concept category outside the schema
            counts[cat] = 0
            patients[cat] = set()
        counts[cat] += 1
        patients[cat].add(rec.patient_id)
    rows = tuple(RateRow(c, counts[c], len(patients[c]), len(roster)) for c in counts)
    return ExtractionRateTable(rows, len(roster))


# ---------------------------------------------------------------------------
# record files

RECORD_FIELDS = ["doc_id", "patient_id", "category", "start", "end", "surface", "attributes"]


def write_records(path: str | Path, records: Iterable[SDoHRecord]) -> None:
    """Tab-separated, one concept per line; attributes are a JSON list of
    ``[rel_type, category, start, end, surface]``."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(RECORD_FIELDS + ["ner_model", "re_model"])
        for r in records:
            attrs = [[rel, a.category, a.start, a.end, a.surface] for rel, a in r.attributes]
            writer.writerow([
                r.doc_id, r.patient_id, r.concept.category, r.concept.start, r.concept.end,
                r.concept.surface, json.dumps(attrs, ensure_ascii=False), *r.model_versions,
            ])


def read_records(path: str | Path) -> list[SDoHRecord]:
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh, delimiter="\t"):
            concept = EntityAnnotation("T0", row["category"], int(row["start"]), int(row["end"]), row["surface"])
            attrs = tuple(
                (rel, EntityAnnotation(f"A{i}", cat, int(s), int(e), surf))
                for i, (rel, cat, s, e, surf) in enumerate(json.loads(row["attributes"]), start=1)
            )
            out.append(SDoHRecord(row["doc_id"], row["patient_id"], concept, attrs,
                                  (row.get("ner_model", ""), row.get("re_model", ""))))
    return out
