"""SDoH category taxonomy and the attribute/concept compatibility matrix."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

from .errors import SchemaError, UnknownCategory

CONCEPT = "concept"
ATTRIBUTE = "attribute"


def to_file_name(category: str) -> str:
    """Display name -> brat type name ("Tobacco use" -> "Tobacco_use")."""
    return category.replace(" ", "_")


def to_display_name(name: str) -> str:
    return name.replace("_", " ")


@dataclass(frozen=True)
class SchemaCategory:
    name: str
    role: str
    parent: str | None = None

    @property
    def file_name(self) -> str:
        return to_file_name(self.name)


@dataclass(frozen=True)
class SDoHSchema:
    classes: tuple[str, ...]
    subclasses: tuple[SchemaCategory, ...]
    attributes: tuple[SchemaCategory, ...]
    compat: frozenset[tuple[str, str, str]]
    version: str
    provisional_compat: bool = False
    _by_name: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        seen: dict[str, SchemaCategory] = {}
        for cat in self.subclasses + self.attributes:
            if not cat.name or "_" in cat.name:
                raise SchemaError(f"invalid category name {cat.name!r}: must be non-empty, without underscores")
            if cat.name in seen:
                raise SchemaError(f"category declared twice: {cat.name!r}")
            seen[cat.name] = cat
        for sub in self.subclasses:
            if sub.role != CONCEPT:
                raise SchemaError(f"subclass {sub.name!r} must have role concept")
            if sub.parent not in self.classes:
                raise SchemaError(f"subclass {sub.name!r} has undeclared parent {sub.parent!r}")
        for att in self.attributes:
            if att.role != ATTRIBUTE:
                raise SchemaError(f"attribute {att.name!r} must have role attribute")
        for attr, conc, rel in self.compat:
            if seen.get(attr) is None or seen[attr].role != ATTRIBUTE:
                raise SchemaError(f"compat references unknown attribute {attr!r}")
            if seen.get(conc) is None or seen[conc].role != CONCEPT:
                raise SchemaError(f"compat references unknown concept {conc!r}")
            if not rel or any(ch.isspace() for ch in rel):
                raise SchemaError(f"invalid relation type {rel!r}")
        self._by_name.update(seen)

    @property
    def categories(self) -> tuple[SchemaCategory, ...]:
        return self.subclasses + self.attributes

    @property
    def concept_names(self) -> list[str]:
        return [c.name for c in self.subclasses]

    @property
    def attribute_names(self) -> list[str]:
        return [c.name for c in self.attributes]

    @property
    def rel_types(self) -> list[str]:
        return sorted({rel for _, _, rel in self.compat})

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def get(self, name: str) -> SchemaCategory:
        try:
            return self._by_name[name]
        except KeyError:
            raise UnknownCategory(f"category {name!r} is not declared in schema {self.version}") from None

    def role(self, name: str) -> str:
        return self.get(name).role

    def from_file_name(self, name: str) -> SchemaCategory:
        return self.get(to_display_name(name))

    def permitted_rel_types(self, attribute: str, concept: str) -> list[str]:
        return sorted(rel for a, c, rel in self.compat if a == attribute and c == concept)

    def permits(self, attribute: str, concept: str, rel_type: str | None = None) -> bool:
        if rel_type is None:
            return bool(self.permitted_rel_types(attribute, concept))
        return (attribute, concept, rel_type) in self.compat

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "provisional_compat": self.provisional_compat,
            "classes": list(self.classes),
            "concepts": [{"name": c.name, "class": c.parent} for c in self.subclasses],
            "attributes": [{"name": a.name} for a in self.attributes],
            "compat": [
                {"attribute": a, "concept": c, "rel_type": r} for a, c, r in sorted(self.compat)
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SDoHSchema":
        try:
            return cls(
                classes=tuple(data["classes"]),
                subclasses=tuple(
                    SchemaCategory(c["name"], CONCEPT, c["class"]) for c in data["concepts"]
                ),
                attributes=tuple(SchemaCategory(a["name"], ATTRIBUTE) for a in data.get("attributes", [])),
                compat=frozenset(
                    (t["attribute"], t["concept"], t.get("rel_type", "Attr-of"))
                    for t in data.get("compat", [])
                ),
                version=str(data["version"]),
                provisional_compat=bool(data.get("provisional_compat", False)),
            )
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"malformed schema document: {exc}") from exc


def load_schema(path: str | Path | None = None) -> SDoHSchema:
    """Load a schema file; ``None`` gives the packaged default."""
    if path is None:
        return default_schema()
    with open(path, encoding="utf-8") as fh:
        return SDoHSchema.from_dict(json.load(fh))


@lru_cache(maxsize=1)
def default_schema() -> SDoHSchema:
    text = resources.files("sdoh_extract").joinpath("data/default_schema.json").read_text("utf-8")
    return SDoHSchema.from_dict(json.loads(text))
