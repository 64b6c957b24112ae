"""Relation classification: link attributes to the concepts they modify."""

from __future__ import annotations

import logging
import random
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import scorer, textproc
from .documents import AnnotatedDoc, Document, EntityAnnotation, RelationAnnotation
from .errors import AlignmentFailure, EmptyTrainingSet, ModelFormatError, NoPositiveExamples, SchemaMismatch
from .linear import LinearModel, OnlineTrainer, softmax
from .schema import ATTRIBUTE, CONCEPT, SDoHSchema, default_schema
from .tagger import SENT_END, SENT_START, TrainConfig
from .textproc import Token

log = logging.getLogger(__name__)

NONE = "NONE"
MAX_BETWEEN_WORDS = 20


@dataclass(frozen=True)
class CandidatePair:
    attribute: EntityAnnotation
    concept: EntityAnnotation
    sentence_distance: int
    token_distance: int
    doc_id: str = ""
    # other concept mentions lying between the two entities
    intervening_concepts: int = 0


class PairClassifierModel(LinearModel):
    @property
    def max_sentence_distance(self) -> int:
        return int(self.meta.get("max_sentence_distance", 1))

    @property
    def training_meta(self) -> dict:
        return {k: self.meta.get(k) for k in ("epochs_run", "best_epoch", "best_val_f1", "seed")}

    @classmethod
    def untrained(cls, schema: SDoHSchema, max_sentence_distance: int = 1) -> "PairClassifierModel":
        return cls("re", (NONE, *schema.rel_types), schema.version,
                   meta={"max_sentence_distance": max_sentence_distance})

    @classmethod
    def load(cls, path: str | Path) -> "PairClassifierModel":
        model = super().load(path)
        if model.component != "re":
            raise ModelFormatError(f"{path}: expected an re model, found component {model.component!r}")
        return model


def _align(tokens: Sequence[Token], ent: EntityAnnotation) -> tuple[int, int]:
    span = textproc.token_span(tokens, ent.start, ent.end)
    if span is None:
        raise AlignmentFailure(f"entity {ent.entity_id} [{ent.start},{ent.end}) does not align to any token")
    return span


def _gap(a: tuple[int, int], b: tuple[int, int]) -> int:
    if a[1] <= b[0]:
        return b[0] - a[1]
    if b[1] <= a[0]:
        return a[0] - b[1]
    return 0


def generate_candidates(
    entities: Sequence[EntityAnnotation],
    tokens: Sequence[Token],
    schema: SDoHSchema,
    max_sentence_distance: int = 1,
    doc_id: str = "",
) -> list[CandidatePair]:
    """Every schema-compatible (attribute, concept) pair at most
    ``max_sentence_distance`` sentences apart, ordered by attribute then
    concept offset."""
    spans = {e.entity_id: _align(tokens, e) for e in entities}
    known = [e for e in entities if e.category in schema]
    attrs = sorted((e for e in known if schema.role(e.category) == ATTRIBUTE), key=lambda e: (e.start, e.end))
    concepts = sorted((e for e in known if schema.role(e.category) == CONCEPT), key=lambda e: (e.start, e.end))
    out = []
    for a in attrs:
        sa = spans[a.entity_id]
        for c in concepts:
            if not schema.permits(a.category, c.category):
                continue
            sc = spans[c.entity_id]
            sd = abs(tokens[sa[0]].sentence_index - tokens[sc[0]].sentence_index)
            if sd > max_sentence_distance:
                continue
            lo, hi = min(a.end, c.end), max(a.start, c.start)
            between = sum(1 for o in concepts if o is not c and o.start >= lo and o.end <= hi)
            out.append(CandidatePair(a, c, sd, _gap(sa, sc), doc_id, between))
    return out


def _bucket(n: int) -> str:
    if n <= 3:
        return "0-3"
    if n <= 7:
        return "4-7"
    if n <= 15:
        return "8-15"
    return "16+"


def featurize_pair(pair: CandidatePair, tokens: Sequence[Token]) -> list[str]:
    a, c = pair.attribute, pair.concept
    sa, sc = _align(tokens, a), _align(tokens, c)
    order = "attr-first" if a.start < c.start else "concept-first"

    def word(i: int) -> str:
        if i < 0:
            return SENT_START
        if i >= len(tokens):
            return SENT_END
        return tokens[i].text.lower()

    lo, hi = (sa[1], sc[0]) if sa[1] <= sc[0] else (sc[1], sa[0])
    between = [tokens[i].text.lower() for i in range(lo, hi)][:MAX_BETWEEN_WORDS]
    feats = [
        "bias",
        f"attr_cat={a.category}",
        f"conc_cat={c.category}",
        f"pair={a.category}|{c.category}",
        f"tok_dist={_bucket(pair.token_distance)}",
        f"sent_dist={pair.sentence_distance}",
        f"order={order}",
        f"sent_dist|order={pair.sentence_distance}|{order}",
        f"concepts_between={min(pair.intervening_concepts, 2)}",
        f"attr_before={word(sa[0] - 1)}",
        f"attr_after={word(sa[1])}",
        f"conc_before={word(sc[0] - 1)}",
        f"conc_after={word(sc[1])}",
    ]
    feats += [f"attr_w={w}" for w in sorted({tokens[i].text.lower() for i in range(*sa)})]
    feats += [f"conc_w={w}" for w in sorted({tokens[i].text.lower() for i in range(*sc)})]
    feats += [f"btw_w={w}" for w in sorted(set(between))]
    return feats


# ---------------------------------------------------------------------------
# inference


def _permitted_mask(model: LinearModel, schema: SDoHSchema, pair: CandidatePair) -> np.ndarray:
    allowed = set(schema.permitted_rel_types(pair.attribute.category, pair.concept.category))
    return np.array([lab == NONE or lab in allowed for lab in model.labels])


def classify_pairs(model: PairClassifierModel, pairs: Sequence[CandidatePair], tokens: Sequence[Token], schema: SDoHSchema):
    """(label, probability) per candidate; labels outside the compat matrix are masked."""
    model.require_trained()
    out = []
    for pair in pairs:
        probs = softmax(model.scores(featurize_pair(pair, tokens)))
        masked = np.where(_permitted_mask(model, schema, pair), probs, -1.0)
        y = int(np.argmax(masked))
        out.append((model.labels[y], float(probs[y])))
    return out


def link(
    model: PairClassifierModel,
    document: Document,
    entities: Sequence[EntityAnnotation],
    schema: SDoHSchema | None = None,
    tokens: Sequence[Token] | None = None,
) -> list[RelationAnnotation]:
    """Relations for one document; each attribute keeps at most its best link.

    Ties go to the smaller token distance, then the earlier concept.
    """
    model.require_trained()
    schema = schema or default_schema()
    if model.schema_version != schema.version:
        raise SchemaMismatch(f"model schema {model.schema_version} != {schema.version}")
    if tokens is None:
        tokens = textproc.tokenize(document.text)
    pairs = generate_candidates(entities, tokens, schema, model.max_sentence_distance, document.doc_id)
    best: dict[str, tuple] = {}
    for pair, (label, prob) in zip(pairs, classify_pairs(model, pairs, tokens, schema)):
        if label == NONE:
            continue
        key = (prob, -pair.token_distance, -pair.concept.start)
        cur = best.get(pair.attribute.entity_id)
        if cur is None or key > cur[0]:
            best[pair.attribute.entity_id] = (key, pair, label)
    chosen = sorted(best.values(), key=lambda v: (v[1].attribute.start, v[1].attribute.end))
    return [
        RelationAnnotation(f"R{i}", label, pair.attribute.entity_id, pair.concept.entity_id)
        for i, (_, pair, label) in enumerate(chosen, start=1)
    ]


def link_documents(model, docs: Sequence[AnnotatedDoc], schema: SDoHSchema | None = None) -> list[AnnotatedDoc]:
    """Link over each document's own entities (gold entities give the relation subtask)."""
    return [d.with_annotations(relations=link(model, d.document, d.entities, schema)) for d in docs]


# ---------------------------------------------------------------------------
# training


def _examples(docs: Sequence[AnnotatedDoc], schema: SDoHSchema, labels: Sequence[str], max_sd: int):
    lab_idx = {lab: i for i, lab in enumerate(labels)}
    out = []
    for ad in docs:
        tokens = textproc.tokenize(ad.text)
        gold = {(r.head, r.tail): r.rel_type for r in ad.relations}
        for pair in generate_candidates(ad.entities, tokens, schema, max_sd, ad.doc_id):
            rel = gold.get((pair.attribute.entity_id, pair.concept.entity_id), NONE)
            if rel not in lab_idx:
                raise SchemaMismatch(f"{ad.doc_id}: relation type {rel!r} not in schema {schema.version}")
            out.append((featurize_pair(pair, tokens), lab_idx[rel]))
    return out


def _val_f1(model: PairClassifierModel, val_docs: Sequence[AnnotatedDoc], schema: SDoHSchema) -> float:
    pred = link_documents(model, val_docs, schema)
    return scorer.score_relations(val_docs, pred, scorer.STRICT).f1


def _fit(trainer, examples, val_docs, config, schema, meta, baseline=None) -> PairClassifierModel:
    encoded = [(trainer.lookup(f), y) for f, y in examples]
    rng = random.Random(config.seed)
    order = list(range(len(encoded)))
    best_model, best_f1 = baseline if baseline else (None, -1.0)
    best_epoch = 0
    stale = epochs_run = 0
    for epoch in range(1, config.max_epochs + 1):
        rng.shuffle(order)
        for i in order:
            trainer.update(*encoded[i])
        epochs_run = epoch
        model = trainer.snapshot(PairClassifierModel, "re", schema.version, meta)
        f1 = _val_f1(model, val_docs, schema)
        log.info("re epoch %d: validation strict F1 %.4f", epoch, f1)
        if f1 > best_f1:
            best_model, best_f1, best_epoch, stale = model, f1, epoch, 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    final_meta = dict(meta, epochs_run=epochs_run, best_val_f1=best_f1, best_epoch=best_epoch)
    return PairClassifierModel("re", best_model.labels, best_model.schema_version,
                               best_model.features, best_model.weights, final_meta)


def train_linker(
    train_docs: Sequence[AnnotatedDoc],
    val_docs: Sequence[AnnotatedDoc],
    config: TrainConfig = TrainConfig(),
    schema: SDoHSchema | None = None,
) -> PairClassifierModel:
    schema = schema or default_schema()
    if not train_docs:
        raise EmptyTrainingSet("no training documents")
    if not val_docs:
        raise EmptyTrainingSet("no validation documents")
    if config.max_epochs < 1:
        raise ValueError("train_linker needs max_epochs >= 1")
    labels = (NONE, *schema.rel_types)
    examples = _examples(train_docs, schema, labels, config.max_sentence_distance)
    if not examples:
        raise EmptyTrainingSet("training documents yield no candidate pairs")
    if all(y == 0 for _, y in examples):
        warnings.warn("no positive relation examples; the linker will predict NONE", NoPositiveExamples, stacklevel=2)
    trainer = OnlineTrainer(labels, config.learning_rate)
    for feats, _ in examples:
        trainer.add_features(feats)
    meta = {"max_sentence_distance": config.max_sentence_distance, "seed": config.seed,
            "learning_rate": config.learning_rate}
    return _fit(trainer, examples, val_docs, config, schema, meta)


def fine_tune_linker(
    model: PairClassifierModel,
    new_train_docs: Sequence[AnnotatedDoc],
    new_val_docs: Sequence[AnnotatedDoc],
    config: TrainConfig = TrainConfig(),
    schema: SDoHSchema | None = None,
) -> PairClassifierModel:
    model.require_trained()
    if config.max_epochs == 0:
        return model
    schema = schema or default_schema()
    if model.schema_version != schema.version:
        raise SchemaMismatch(f"model schema {model.schema_version} != {schema.version}")
    if not new_train_docs or not new_val_docs:
        raise EmptyTrainingSet("fine-tuning needs training and validation documents")
    examples = _examples(new_train_docs, schema, model.labels, model.max_sentence_distance)
    if not examples:
        raise EmptyTrainingSet("fine-tuning documents yield no candidate pairs")
    trainer = OnlineTrainer(model.labels, config.learning_rate, init=model)
    for feats, _ in examples:
        trainer.add_features(feats)
    meta = dict(model.meta, seed=config.seed, learning_rate=config.learning_rate, fine_tuned=True)
    start = PairClassifierModel(model.component, model.labels, model.schema_version,
                                model.features, model.weights, meta)
    return _fit(trainer, examples, new_val_docs, config, schema, meta,
                baseline=(start, _val_f1(start, new_val_docs, schema)))
