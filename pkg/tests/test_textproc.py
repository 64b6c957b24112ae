import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdoh_extract import synth, textproc
from sdoh_extract.documents import EntityAnnotation
from sdoh_extract.errors import EntityOutsideText, LengthMismatch, OverlappingEntities


def spans(tokens):
    return [(t.text, t.start, t.end) for t in tokens]


def test_tokenize_packs_per_day():
    assert spans(textproc.tokenize("1 packs/day")) == [("1", 0, 1), ("packs", 2, 7), ("/", 7, 8), ("day", 8, 11)]


def test_tokenize_empty_and_phrase():
    assert textproc.tokenize("") == []
    assert [t.text for t in textproc.tokenize("everyday smoker")] == ["everyday", "smoker"]


def test_sentence_boundaries():
    toks = textproc.tokenize("Pt smokes. He drinks.\nlives alone. e.g. no")
    sents = [[t.text for t in s] for s in textproc.sentences(toks)]
    assert sents == [["Pt", "smokes", "."], ["He", "drinks", "."], ["lives", "alone", ".", "e", ".", "g", ".", "no"]]


@given(st.text(alphabet=st.sampled_from("ab1 .,\n/-É!?Z"), max_size=60))
def test_offset_soundness(text):
    toks = textproc.tokenize(text)
    pos = 0
    rebuilt = []
    for t in toks:
        assert t.start < t.end and t.start >= pos
        gap = text[pos:t.start]
        assert gap.strip() == ""
        rebuilt.append(gap)
        rebuilt.append(t.text)
        assert text[t.start:t.end] == t.text
        pos = t.end
    assert text[pos:].strip() == ""
    assert "".join(rebuilt) + text[pos:] == text


def ent(cat, s, e, text, eid="T1"):
    return EntityAnnotation(eid, cat, s, e, text[s:e])


def test_encode_examples():
    text = "everyday smoker"
    toks = textproc.tokenize(text)
    assert textproc.encode_bio(toks, [ent("Tobacco use", 0, 15, text)]) == ["B-Tobacco_use", "I-Tobacco_use"]
    assert textproc.encode_bio(toks, []) == ["O", "O"]
    assert textproc.encode_bio(toks, [ent("Tobacco use", 9, 15, text)]) == ["O", "B-Tobacco_use"]


def test_encode_errors():
    text = "everyday smoker"
    toks = textproc.tokenize(text)
    with pytest.raises(OverlappingEntities):
        textproc.encode_bio(toks, [ent("Tobacco use", 0, 15, text), ent("Drug use", 9, 15, text, "T2")])
    # two entities inside the same token collide after snapping
    with pytest.raises(OverlappingEntities):
        textproc.encode_bio(toks, [ent("Tobacco use", 0, 3, text), ent("Drug use", 4, 8, text, "T2")])
    with pytest.raises(EntityOutsideText):
        textproc.encode_bio(textproc.tokenize("a  b"), [EntityAnnotation("T1", "Race", 1, 2, " ")])


def test_decode_examples():
    text = "everyday smoker"
    toks = textproc.tokenize(text)
    (e,) = textproc.decode_bio(toks, ["B-Tobacco_use", "I-Tobacco_use"], text)
    assert (e.category, e.start, e.end, e.surface) == ("Tobacco use", 0, 15, "everyday smoker")
    assert textproc.decode_bio(toks, ["O", "O"]) == []
    (e,) = textproc.decode_bio(toks, ["I-Tobacco_use", "O"], text)
    assert (e.start, e.end, e.surface) == (0, 8, "everyday")
    with pytest.raises(LengthMismatch):
        textproc.decode_bio(toks, ["O"])


def test_decode_repair_type_switch():
    text = "a b c"
    toks = textproc.tokenize(text)
    ents = textproc.decode_bio(toks, ["B-Race", "I-Gender", "I-Gender"], text)
    assert [(e.category, e.surface) for e in ents] == [("Race", "a"), ("Gender", "b c")]


def test_snap_extends_mid_token():
    text = "nonsmoker today"
    toks = textproc.tokenize(text)
    snapped = textproc.snap(toks, ent("Tobacco use", 3, 9, text), text)
    assert (snapped.start, snapped.end, snapped.surface) == (0, 9, "nonsmoker")
    assert textproc.is_token_aligned(toks, snapped)


def test_labels():
    assert textproc.make_label("B", "Tobacco use") == "B-Tobacco_use"
    assert textproc.split_label("I-Living_supply") == ("I", "Living supply")
    assert textproc.split_label("O") == ("O", None)
    with pytest.raises(ValueError):
        textproc.split_label("X-Race")
    assert not textproc.is_legal_transition("O", "I-Race")
    assert not textproc.is_legal_transition(None, "I-Race")
    assert not textproc.is_legal_transition("B-Gender", "I-Race")
    assert textproc.is_legal_transition("B-Race", "I-Race")


def test_conll_round_trip(schema):
    doc = synth.generate_corpus(schema, n_docs=1, seed=3, max_sentences=5)[0]
    toks = textproc.tokenize(doc.text)
    labels = textproc.encode_bio(toks, doc.entities)
    content = textproc.to_conll(toks, labels)
    back_toks, back_labels = textproc.from_conll(content)
    assert back_labels == labels
    assert [(t.text, t.start, t.end, t.sentence_index) for t in back_toks] == \
        [(t.text, t.start, t.end, t.sentence_index) for t in toks]


def random_entities(text, rng):
    """Random non-overlapping, possibly mid-token spans."""
    toks = textproc.tokenize(text)
    ents = []
    k = 0
    while k < len(toks):
        if rng.random() < 0.3:
            j = min(len(toks), k + rng.randint(1, 3))
            s = toks[k].start + rng.randint(0, len(toks[k].text) - 1)
            e = toks[j - 1].end - rng.randint(0, len(toks[j - 1].text) - 1)
            if e <= s:
                e = s + 1
            ents.append(EntityAnnotation(f"T{len(ents) + 1}", rng.choice(["Race", "Gender", "Drug use"]), s, e, text[s:e]))
            k = j + 1
        else:
            k += 1
    return ents


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10_000))
def test_bio_round_trip_property(seed):
    rng = random.Random(seed)
    words = ["Pt", "smokes", "1", "packs", "/", "day", ".", "lives", "alone", "\n", "etoh", "daily"]
    text = " ".join(rng.choice(words) for _ in range(rng.randint(0, 25)))
    toks = textproc.tokenize(text)
    ents = random_entities(text, rng)
    labels = textproc.encode_bio(toks, ents)
    decoded = textproc.decode_bio(toks, labels, text)
    assert [e.key() for e in decoded] == [textproc.snap(toks, e, text).key() for e in ents]
    assert textproc.encode_bio(toks, decoded) == labels
    for a, b in zip(decoded, decoded[1:]):
        assert a.end <= b.start
