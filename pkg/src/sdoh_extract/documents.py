"""Core annotation data types shared by every stage."""

from __future__ import annotations

from dataclasses import dataclass, field

KNOWN_DOMAINS = ("cancer", "opioid")


@dataclass(frozen=True)
class Document:
    doc_id: str
    text: str
    patient_id: str = ""
    # "cancer", "opioid" or any other free-form domain tag
    domain: str = "cancer"


@dataclass(frozen=True)
class EntityAnnotation:
    entity_id: str
    category: str  # display name, e.g. "Tobacco use"
    start: int
    end: int
    surface: str

    @property
    def span(self) -> tuple[int, int]:
        return (self.start, self.end)

    def key(self) -> tuple[str, int, int]:
        return (self.category, self.start, self.end)

    def overlaps(self, other: "EntityAnnotation") -> bool:
        return self.start < other.end and other.start < self.end


@dataclass(frozen=True)
class RelationAnnotation:
    relation_id: str
    rel_type: str
    head: str  # entity_id of the attribute
    tail: str  # entity_id of the concept


@dataclass(frozen=True)
class AnnotatedDoc:
    document: Document
    entities: tuple[EntityAnnotation, ...] = ()
    relations: tuple[RelationAnnotation, ...] = field(default=())

    @property
    def doc_id(self) -> str:
        return self.document.doc_id

    @property
    def text(self) -> str:
        return self.document.text

    def entity_map(self) -> dict[str, EntityAnnotation]:
        return {e.entity_id: e for e in self.entities}

    def with_annotations(self, entities=None, relations=None) -> "AnnotatedDoc":
        return AnnotatedDoc(
            self.document,
            tuple(self.entities if entities is None else entities),
            tuple(self.relations if relations is None else relations),
        )
