import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdoh_extract import scorer
from sdoh_extract.documents import AnnotatedDoc, Document, EntityAnnotation as E, RelationAnnotation as R
from sdoh_extract.errors import DanglingRelation, DocIdMismatch

import oracles

TEXT = "x" * 40


def doc(ents, rels=(), doc_id="d1"):
    return AnnotatedDoc(Document(doc_id, TEXT), tuple(ents), tuple(rels))


def ent(eid, cat, s, e):
    return E(eid, cat, s, e, TEXT[s:e])


GOLD = [ent("T1", "Tobacco use", 0, 5), ent("T2", "Alcohol use", 10, 15)]
PRED = [ent("T1", "Tobacco use", 0, 5), ent("T2", "Alcohol use", 12, 18), ent("T3", "Drug use", 20, 24)]


def test_worked_example():
    strict = scorer.score_concepts([doc(GOLD)], [doc(PRED)], scorer.STRICT)
    lenient = scorer.score_concepts([doc(GOLD)], [doc(PRED)], scorer.LENIENT)
    assert (round(strict.precision, 4), round(strict.recall, 4), round(strict.f1, 4)) == (0.3333, 0.5, 0.4)
    assert (round(lenient.precision, 4), round(lenient.recall, 4), round(lenient.f1, 4)) == (0.6667, 1.0, 0.8)
    # the frozen numbers agree with the exhaustive matcher
    for rep, mode in ((strict, "strict"), (lenient, "lenient")):
        tp = oracles.max_matching_size(GOLD, PRED, mode)
        p, r, f = oracles.prf(tp, len(PRED), len(GOLD))
        assert (rep.precision, rep.recall, rep.f1) == pytest.approx((float(p), float(r), float(f)), abs=1e-12)


def test_per_class_sums():
    rep = scorer.score_concepts([doc(GOLD)], [doc(PRED)], scorer.LENIENT)
    assert rep.per_class["Drug use"] == scorer.Counts(0, 1, 0)
    total = sum(rep.per_class.values(), scorer.Counts(0, 0, 0))
    assert total == rep.micro


def test_match_examples():
    g = [ent("T1", "Tobacco use", 0, 5)]
    assert scorer.match_entities(g, [ent("P1", "Tobacco use", 3, 8)], "lenient") == [(0, 0)]
    assert scorer.match_entities(g, [ent("P1", "Tobacco use", 3, 8)], "strict") == []
    assert scorer.match_entities(g, [ent("P1", "Alcohol use", 0, 5)], "lenient") == []
    # touching spans do not overlap
    assert scorer.match_entities(g, [ent("P1", "Tobacco use", 5, 9)], "lenient") == []
    assert scorer.match_entities(GOLD, GOLD, "strict") == [(0, 0), (1, 1)]


def test_lenient_prefers_cardinality_then_overlap():
    # greedy first-come would pair g0-p0 and leave g1 unmatched
    g = [ent("G1", "Race", 0, 10), ent("G2", "Race", 8, 12)]
    p = [ent("P1", "Race", 8, 11), ent("P2", "Race", 0, 3)]
    assert scorer.match_entities(g, p, "lenient") == [(0, 1), (1, 0)]
    # equal cardinality: larger overlap wins
    g = [ent("G1", "Race", 0, 10)]
    p = [ent("P1", "Race", 0, 2), ent("P2", "Race", 1, 9)]
    assert scorer.match_entities(g, p, "lenient") == [(0, 1)]


def test_duplicate_predictions_are_false_positives():
    rep = scorer.score_concepts([doc(GOLD[:1])], [doc([GOLD[0], ent("T9", "Tobacco use", 0, 5)])], "strict")
    assert (rep.micro.tp, rep.micro.fp, rep.micro.fn) == (1, 1, 0)


def test_empty_cases():
    rep = scorer.score_concepts([doc(GOLD)], [doc([])], "strict")
    assert (rep.precision, rep.recall, rep.f1) == (0, 0, 0)
    rep = scorer.score_concepts([doc([])], [doc([])], "strict")
    assert rep.f1 == 0


def test_doc_id_mismatch():
    with pytest.raises(DocIdMismatch):
        scorer.score_concepts([doc(GOLD)], [doc(GOLD, doc_id="other")], "strict")


def random_entities(rng, n, prefix):
    return [
        ent(f"{prefix}{i}", rng.choice(["A", "B"]), s, s + rng.randint(1, 6))
        for i, s in enumerate(rng.randint(0, 30) for _ in range(n))
    ]


def test_oracle_equivalence_random():
    rng = random.Random(0)
    for _ in range(300):
        g = random_entities(rng, rng.randint(0, 6), "G")
        p = random_entities(rng, rng.randint(0, 6), "P")
        for mode in ("strict", "lenient"):
            m = scorer.match_entities(g, p, mode)
            assert len(m) == oracles.max_matching_size(g, p, mode)
            assert len({a for a, _ in m}) == len(m) == len({b for _, b in m})
            assert all(oracles.pair_ok(g[a], p[b], mode) for a, b in m)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**6))
def test_symmetry_and_monotonicity(seed):
    rng = random.Random(seed)
    g = random_entities(rng, rng.randint(0, 6), "G")
    p = random_entities(rng, rng.randint(0, 6), "P")
    s = scorer.score_concepts([doc(g)], [doc(p)], "strict")
    l = scorer.score_concepts([doc(g)], [doc(p)], "lenient")
    swapped = scorer.score_concepts([doc(p)], [doc(g)], "lenient")
    assert (swapped.precision, swapped.recall) == (l.recall, l.precision)
    assert s.micro.tp <= l.micro.tp and s.f1 <= l.f1 + 1e-12
    # deleting an unmatched gold entity never lowers recall
    matched = {a for a, _ in scorer.match_entities(g, p, "lenient")}
    for i in range(len(g)):
        if i not in matched:
            fewer = scorer.score_concepts([doc(g[:i] + g[i + 1:])], [doc(p)], "lenient")
            assert fewer.recall >= l.recall - 1e-12
            break


# relations

TOB = ent("T1", "Tobacco use", 0, 5)
PPD = ent("T2", "Pack per day", 6, 9)
REL = R("R1", "Attr-of", "T2", "T1")


def test_relations_identical():
    g = doc([TOB, PPD], [REL])
    for mode in ("strict", "lenient"):
        assert scorer.score_relations([g], [g], mode).f1 == 1.0


def test_relation_wrong_type_is_fp_and_fn():
    g = doc([TOB, PPD], [REL])
    p = doc([TOB, PPD], [R("R1", "Other", "T2", "T1")])
    rep = scorer.score_relations([g], [p], "strict")
    assert (rep.micro.tp, rep.micro.fp, rep.micro.fn) == (0, 1, 1)


def test_relation_lenient_endpoint():
    g = doc([TOB, PPD], [REL])
    p = doc([ent("T1", "Tobacco use", 0, 4), PPD], [REL])
    assert scorer.score_relations([g], [p], "lenient").f1 == 1.0
    strict = scorer.score_relations([g], [p], "strict")
    assert (strict.micro.tp, strict.micro.fp) == (0, 1)


def test_relation_dangling():
    with pytest.raises(DanglingRelation):
        scorer.score_relations([doc([TOB, PPD], [REL])], [doc([TOB], [REL])], "strict")


def test_end_to_end_recall_bounded_by_concepts():
    tob2 = ent("T3", "Tobacco use", 20, 25)
    ppd2 = ent("T4", "Pack per day", 26, 29)
    g = doc([TOB, PPD, tob2, ppd2], [REL, R("R2", "Attr-of", "T4", "T3")])
    p = doc([TOB, PPD], [REL])
    concept, relation = scorer.score_end_to_end([g], [p], "strict")
    assert concept.recall == 0.5
    assert relation.recall <= concept.recall
    assert relation.precision == 1.0
    c, r = scorer.score_end_to_end([g], [g], "lenient")
    assert c.f1 == r.f1 == 1.0
    c, r = scorer.score_end_to_end([g], [doc([])], "strict")
    assert c.f1 == r.f1 == 0.0


def test_format_table_layout():
    rep = scorer.score_concepts([doc(GOLD)], [doc(PRED)], "strict")
    rep_l = scorer.score_concepts([doc(GOLD)], [doc(PRED)], "lenient")
    text = scorer.format_table([("Concept extraction", rep, rep_l), ("Relation classification", None, None)])
    lines = text.splitlines()
    assert "Strict" in lines[0] and "Lenient" in lines[0]
    assert lines[1].split() == ["Prec.", "Rec.", "F(b=1)", "Prec.", "Rec.", "F(b=1)"]
    assert lines[2].split()[-6:] == ["0.3333", "0.5000", "0.4000", "0.6667", "1.0000", "0.8000"]
    assert lines[3].split()[-6:] == ["-"] * 6
