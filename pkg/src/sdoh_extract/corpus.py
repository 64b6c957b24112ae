"""brat standoff I/O, corpus splitting, validation and annotator agreement."""

from __future__ import annotations

import csv
import logging
import math
import random
import re
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

from . import textproc
from .documents import AnnotatedDoc, Document, EntityAnnotation, RelationAnnotation
from .errors import (
    DanglingRelation,
    DataError,
    DiscontinuousSpanUnsupported,
    EmptyCorpus,
    EmptyInput,
    InvariantViolation,
    LengthMismatch,
    MalformedLine,
    SpanOutOfBounds,
    SurfaceMismatch,
    UnknownCategory,
)
from .schema import ATTRIBUTE, CONCEPT, SDoHSchema, to_display_name, to_file_name

log = logging.getLogger(__name__)

_ENTITY_RE = re.compile(r"^(T\d+)\t(\S+) (\d+ \d+(?:;\d+ \d+)*)\t(.*)$")
_RELATION_RE = re.compile(r"^(R\d+)\t(\S+) Arg1:(\S+) Arg2:(\S+)\s*$")
# lines of these kinds are outside the supported subset and skipped
_IGNORED_PREFIXES = ("#", "E", "A", "M", "N", "*")

MANIFEST_NAME = "manifest.tsv"


# ---------------------------------------------------------------------------
# standoff


def parse_standoff(
    text_content: str,
    ann_content: str,
    schema: SDoHSchema,
    doc_id: str = "doc",
    patient_id: str = "",
    domain: str = "cancer",
    check_relations: bool = True,
) -> tuple[Document, list[EntityAnnotation], list[RelationAnnotation]]:
    """Parse one ``.txt``/``.ann`` pair.

    With ``check_relations`` (the default) relation role and compatibility
    rules are enforced as well; turn it off to load a corpus for
    :func:`validate_corpus` to report on.
    """
    doc = Document(doc_id=doc_id, text=text_content, patient_id=patient_id, domain=domain)
    entities: list[EntityAnnotation] = []
    relations: list[RelationAnnotation] = []
    by_id: dict[str, EntityAnnotation] = {}
    n = len(text_content)

    for line_no, line in enumerate(ann_content.split("\n"), start=1):
        if not line.strip():
            continue
        if line.startswith("T"):
            m = _ENTITY_RE.match(line)
            if not m:
                raise MalformedLine(line_no, line)
            eid, type_name, spans, surface = m.groups()
            if ";" in spans:
                raise DiscontinuousSpanUnsupported(f"line {line_no}: discontinuous span {spans!r} in {eid}")
            start, end = (int(x) for x in spans.split(" "))
            if not 0 <= start < end <= n:
                raise SpanOutOfBounds(f"line {line_no}: span [{start},{end}) outside text of length {n}")
            if text_content[start:end] != surface:
                raise SurfaceMismatch(
                    f"line {line_no}: surface {surface!r} != text {text_content[start:end]!r}"
                )
            category = to_display_name(type_name)
            if category not in schema:
                raise UnknownCategory(f"line {line_no}: category {type_name!r} not in schema {schema.version}")
            if eid in by_id:
                raise MalformedLine(line_no, line, "duplicate entity id")
            ent = EntityAnnotation(eid, category, start, end, surface)
            by_id[eid] = ent
            entities.append(ent)
        elif line.startswith("R"):
            m = _RELATION_RE.match(line)
            if not m:
                raise MalformedLine(line_no, line)
            relations.append(RelationAnnotation(*m.groups()))
        elif line.startswith(_IGNORED_PREFIXES):
            log.debug("skipping unsupported annotation line %d: %r", line_no, line)
        else:
            raise MalformedLine(line_no, line)

    for rel in relations:
        for arg in (rel.head, rel.tail):
            if arg not in by_id:
                raise DanglingRelation(f"{rel.relation_id} references missing entity {arg}")
        if check_relations:
            problem = _relation_problem(rel, by_id, schema)
            if problem:
                raise InvariantViolation(f"{rel.relation_id}: {problem}")
    return doc, entities, relations


def _relation_problem(rel: RelationAnnotation, by_id: dict, schema: SDoHSchema) -> str | None:
    head, tail = by_id[rel.head], by_id[rel.tail]
    if schema.role(head.category) != ATTRIBUTE:
        return "head must be attribute"
    if schema.role(tail.category) != CONCEPT:
        return "tail must be concept"
    if not schema.permits(head.category, tail.category, rel.rel_type):
        return f"({rel.rel_type}, {head.category}, {tail.category}) not permitted by schema"
    return None


def serialize_standoff(
    doc: Document,
    entities: Sequence[EntityAnnotation],
    relations: Sequence[RelationAnnotation] = (),
) -> str:
    lines: list[str] = []
    ids = set()
    for ent in entities:
        if not 0 <= ent.start < ent.end <= len(doc.text):
            raise InvariantViolation(f"{ent.entity_id}: span [{ent.start},{ent.end}) out of bounds")
        if doc.text[ent.start:ent.end] != ent.surface:
            raise InvariantViolation(f"{ent.entity_id}: surface does not match text")
        if "\n" in ent.surface or "\t" in ent.surface:
            raise InvariantViolation(f"{ent.entity_id}: surface contains a tab or newline")
        ids.add(ent.entity_id)
        lines.append(f"{ent.entity_id}\t{to_file_name(ent.category)} {ent.start} {ent.end}\t{ent.surface}")
    for rel in relations:
        if rel.head not in ids or rel.tail not in ids:
            raise InvariantViolation(f"{rel.relation_id}: references an entity that is not serialized")
        lines.append(f"{rel.relation_id}\t{rel.rel_type} Arg1:{rel.head} Arg2:{rel.tail}")
    return "".join(line + "\n" for line in lines)


# ---------------------------------------------------------------------------
# corpus directories


@dataclass(frozen=True)
class ManifestEntry:
    doc_id: str
    patient_id: str
    domain: str


def read_manifest(path: str | Path) -> dict[str, ManifestEntry]:
    entries: dict[str, ManifestEntry] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh, delimiter="\t"):
            try:
                entry = ManifestEntry(row["doc_id"], row["patient_id"], row["domain"])
            except KeyError as exc:
                raise DataError(f"{path}: manifest needs doc_id, patient_id, domain columns") from exc
            if entry.doc_id in entries:
                raise DataError(f"{path}: duplicate doc_id {entry.doc_id!r}")
            entries[entry.doc_id] = entry
    return entries


def write_manifest(path: str | Path, docs: Iterable[Document]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(["doc_id", "patient_id", "domain"])
        for doc in docs:
            writer.writerow([doc.doc_id, doc.patient_id, doc.domain])


def read_text(path: Path) -> str:
    # newline="" keeps CR characters so offsets match the bytes on disk
    with open(path, encoding="utf-8", newline="") as fh:
        return fh.read()


def load_document(path: str | Path, entry: ManifestEntry | None = None) -> Document:
    path = Path(path)
    doc_id = path.stem
    text = read_text(path)
    if entry is None:
        return Document(doc_id=doc_id, text=text)
    return Document(doc_id=doc_id, text=text, patient_id=entry.patient_id, domain=entry.domain)


def load_corpus(
    directory: str | Path,
    schema: SDoHSchema,
    manifest: str | Path | None = None,
    check_relations: bool = True,
    require_ann: bool = True,
) -> list[AnnotatedDoc]:
    """Load every ``<doc_id>.txt`` (+ ``.ann``) in a directory, sorted by doc_id.

    The manifest defaults to ``manifest.tsv`` inside the directory when present.
    """
    directory = Path(directory)
    if manifest is None and (directory / MANIFEST_NAME).exists():
        manifest = directory / MANIFEST_NAME
    entries = read_manifest(manifest) if manifest else {}
    docs = []
    for txt in sorted(directory.glob("*.txt")):
        ann = txt.with_suffix(".ann")
        if not ann.exists():
            if require_ann:
                raise DataError(f"{txt}: missing annotation file {ann.name}")
            ann_content = ""
        else:
            ann_content = read_text(ann)
        entry = entries.get(txt.stem)
        try:
            doc, ents, rels = parse_standoff(
                read_text(txt),
                ann_content,
                schema,
                doc_id=txt.stem,
                patient_id=entry.patient_id if entry else "",
                domain=entry.domain if entry else "cancer",
                check_relations=check_relations,
            )
        except DataError as exc:
            exc.args = (f"{ann}: {exc}",)
            raise
        docs.append(AnnotatedDoc(doc, tuple(ents), tuple(rels)))
    return docs


def write_corpus(directory: str | Path, docs: Iterable[AnnotatedDoc], manifest: bool = True) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    docs = list(docs)
    for ad in docs:
        with open(directory / f"{ad.doc_id}.txt", "w", encoding="utf-8", newline="") as fh:
            fh.write(ad.text)
        with open(directory / f"{ad.doc_id}.ann", "w", encoding="utf-8", newline="") as fh:
            fh.write(serialize_standoff(ad.document, ad.entities, ad.relations))
    if manifest:
        write_manifest(directory / MANIFEST_NAME, (ad.document for ad in docs))


# ---------------------------------------------------------------------------
# splitting


@dataclass(frozen=True)
class CorpusSplit:
    train: tuple[str, ...]
    validation: tuple[str, ...]
    test: tuple[str, ...]
    seed: int
    ratios: tuple[float, float, float]

    def sizes(self) -> tuple[int, int, int]:
        return len(self.train), len(self.validation), len(self.test)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "ratios": list(self.ratios),
            "train": list(self.train),
            "validation": list(self.validation),
            "test": list(self.test),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CorpusSplit":
        return cls(
            tuple(data["train"]), tuple(data["validation"]), tuple(data["test"]),
            int(data["seed"]), tuple(data["ratios"]),
        )


def _frac(x: float) -> Fraction:
    # decimal reading of the float so 0.1 means exactly 1/10
    return Fraction(str(x))


def split_sizes(n: int, ratios: tuple[float, float, float]) -> tuple[int, int, int]:
    """(train, validation, test) sizes.

    test = N*test_frac rounded half up; validation = ceil(pool*val_frac)
    where pool = N - test; train takes the rest.
    """
    train_frac, test_frac, val_frac = (_frac(r) for r in ratios)
    for r in (train_frac, test_frac, val_frac):
        if not 0 < r < 1:
            raise ValueError(f"split fractions must lie in (0, 1), got {ratios}")
    if train_frac + test_frac != 1:
        raise ValueError(f"train and test fractions must sum to 1, got {ratios}")
    n_test = math.floor(n * test_frac + Fraction(1, 2))
    pool = n - n_test
    n_val = math.ceil(pool * val_frac)
    return pool - n_val, n_val, n_test


def split_corpus(doc_ids: Sequence[str], ratios=(0.8, 0.2, 0.1), seed: int = 0) -> CorpusSplit:
    doc_ids = list(doc_ids)
    if not doc_ids:
        raise EmptyCorpus("cannot split an empty corpus")
    if len(set(doc_ids)) != len(doc_ids):
        raise InvariantViolation("doc_ids must be unique")
    n_train, n_val, n_test = split_sizes(len(doc_ids), tuple(ratios))
    order = list(range(len(doc_ids)))
    random.Random(seed).shuffle(order)
    test = sorted(order[:n_test])
    val = sorted(order[n_test:n_test + n_val])
    train = sorted(order[n_test + n_val:])
    pick = lambda idx: tuple(doc_ids[i] for i in idx)  # noqa: E731
    return CorpusSplit(pick(train), pick(val), pick(test), seed, tuple(float(r) for r in ratios))


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    doc_id: str
    rule: str
    location: str
    severity: str = "error"


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)
    warnings: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return bool(self.violations)

    def __len__(self) -> int:
        return len(self.violations)

    def add(self, doc_id: str, rule: str, location: str, severity: str = "error") -> None:
        v = Violation(doc_id, rule, location, severity)
        (self.violations if severity == "error" else self.warnings).append(v)

    def format(self) -> str:
        rows = [f"{v.severity}\t{v.doc_id}\t{v.location}\t{v.rule}" for v in self.violations + self.warnings]
        return "\n".join(rows)


def validate_corpus(docs: Iterable[AnnotatedDoc], schema: SDoHSchema) -> ValidationReport:
    report = ValidationReport()
    seen_docs: set[str] = set()
    for ad in docs:
        did = ad.doc_id
        if not did:
            report.add(did, "doc_id must be non-empty", "document")
        elif did in seen_docs:
            report.add(did, "duplicate doc_id", "document")
        seen_docs.add(did)

        text = ad.text
        by_id: dict[str, EntityAnnotation] = {}
        valid: list[EntityAnnotation] = []
        for ent in ad.entities:
            loc = ent.entity_id
            if ent.entity_id in by_id:
                report.add(did, "duplicate entity id", loc)
            by_id[ent.entity_id] = ent
            if not 0 <= ent.start < ent.end <= len(text):
                report.add(did, "span out of bounds", loc)
                continue
            if text[ent.start:ent.end] != ent.surface:
                report.add(did, "surface does not match text", loc)
            if ent.category not in schema:
                report.add(did, f"unknown category {ent.category!r}", loc)
                continue
            valid.append(ent)

        tokens = textproc.tokenize(text)
        ordered = sorted(valid, key=lambda e: (e.start, e.end))
        for a, b in zip(ordered, ordered[1:]):
            if a.overlaps(b):
                report.add(did, "overlapping entities", f"{a.entity_id},{b.entity_id}")
        for ent in valid:
            if not textproc.is_token_aligned(tokens, ent):
                if textproc.token_span(tokens, ent.start, ent.end) is None:
                    report.add(did, "entity covers no token", ent.entity_id)
                else:
                    report.add(did, "boundary falls inside a token; will be snapped", ent.entity_id, "warning")

        for rel in ad.relations:
            loc = rel.relation_id
            missing = [a for a in (rel.head, rel.tail) if a not in by_id]
            if missing:
                report.add(did, f"dangling relation argument {','.join(missing)}", loc)
                continue
            head, tail = by_id[rel.head], by_id[rel.tail]
            if head.category not in schema or tail.category not in schema:
                continue
            if schema.role(head.category) != ATTRIBUTE:
                report.add(did, "head must be attribute", loc)
            if schema.role(tail.category) != CONCEPT:
                report.add(did, "tail must be concept", loc)
            if not schema.permits(head.category, tail.category, rel.rel_type):
                report.add(did, f"compat: ({rel.rel_type}, {head.category}, {tail.category}) not permitted", loc)
    return report


# ---------------------------------------------------------------------------
# agreement


@dataclass(frozen=True)
class KappaReport:
    kappa: float
    observed_agreement: float
    expected_agreement: float
    unit_count: int


def compute_kappa(labels_a: Sequence[str], labels_b: Sequence[str]) -> KappaReport:
    """Cohen's kappa over paired unit labels (here: per-token BIO labels)."""
    if len(labels_a) != len(labels_b):
        raise LengthMismatch(f"{len(labels_a)} vs {len(labels_b)} labels")
    n = len(labels_a)
    if n == 0:
        raise EmptyInput("kappa needs at least one unit")
    agree = sum(a == b for a, b in zip(labels_a, labels_b))
    p_o = Fraction(agree, n)
    ca, cb = Counter(labels_a), Counter(labels_b)
    p_e = sum((Fraction(ca[k] * cb[k], n * n) for k in ca.keys() & cb.keys()), Fraction(0))
    if p_e == 1:
        kappa = Fraction(1)  # p_e = 1 forces p_o = 1
    else:
        kappa = (p_o - p_e) / (1 - p_e)
    return KappaReport(float(kappa), float(p_o), float(p_e), n)


def kappa_for_documents(pairs: Iterable[tuple[AnnotatedDoc, AnnotatedDoc]]) -> KappaReport:
    """Token-level kappa between two annotators over the same documents."""
    la: list[str] = []
    lb: list[str] = []
    for a, b in pairs:
        if a.doc_id != b.doc_id or a.text != b.text:
            raise InvariantViolation(f"annotator documents differ: {a.doc_id} vs {b.doc_id}")
        tokens = textproc.tokenize(a.text)
        la.extend(textproc.encode_bio(tokens, a.entities))
        lb.extend(textproc.encode_bio(tokens, b.entities))
    return compute_kappa(la, lb)
