import json

import pytest

from sdoh_extract.errors import SchemaError
from sdoh_extract.schema import ATTRIBUTE, CONCEPT, SDoHSchema, load_schema, to_display_name, to_file_name

# category inventory per class, 19 concept categories in total
EXPECTED = {
    "Economic Stability": {"Financial constraint", "Employment"},
    "Education": {"Education", "Language"},
    "Health and Health care": {
        "Physical activity", "SDoH ICD", "Sexual activity", "Drug use", "Tobacco use", "Alcohol use",
    },
    "Social and community context": {"Marital status", "Social cohesion"},
    "Neighborhood and physical environment": {
        "Abuse (physical or mental)", "Transportation", "Living supply", "Living condition",
    },
    "Gender, Race, and Ethnicity": {"Gender", "Race", "Ethnicity"},
}


def test_default_inventory(schema):
    assert len(schema.classes) == 6
    assert len(schema.concept_names) == 19
    got = {}
    for sub in schema.subclasses:
        got.setdefault(sub.parent, set()).add(sub.name)
    assert got == EXPECTED
    assert all(schema.role(c) == CONCEPT for c in schema.concept_names)
    assert all(schema.role(a) == ATTRIBUTE for a in schema.attribute_names)
    assert schema.provisional_compat


def test_names():
    assert to_file_name("Tobacco use") == "Tobacco_use"
    assert to_display_name("Abuse_(physical_or_mental)") == "Abuse (physical or mental)"


def test_compat(schema):
    assert schema.permits("Pack per day", "Tobacco use")
    assert not schema.permits("Pack per day", "Education")
    assert schema.permitted_rel_types("Frequency", "Alcohol use") == ["Attr-of"]
    assert schema.permitted_rel_types("Frequency", "Race") == []


def test_dict_round_trip(schema, tmp_path):
    path = tmp_path / "s.json"
    path.write_text(json.dumps(schema.to_dict()))
    assert load_schema(path) == schema


def test_rejects_duplicates_and_bad_compat(schema):
    data = schema.to_dict()
    dup = json.loads(json.dumps(data))
    dup["attributes"].append(dup["attributes"][0])
    with pytest.raises(SchemaError):
        SDoHSchema.from_dict(dup)
    bad = json.loads(json.dumps(data))
    bad["compat"].append(["Duration", "Nonexistent", "Attr-of"])
    with pytest.raises(SchemaError):
        SDoHSchema.from_dict(bad)
