"""Concept extraction: a linear BIO token classifier.

Each token is scored by a softmax over label weights summed across its
features. The previous label is itself a feature, so decoding runs left to
right; ``I-X`` is only allowed after ``B-X`` or ``I-X`` and never at the
start of a sentence.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np

from . import scorer, textproc
from .documents import AnnotatedDoc, Document
from .errors import EmptyTrainingSet, ModelFormatError, SchemaMismatch
from .linear import LinearModel, OnlineTrainer, softmax
from .schema import SDoHSchema, default_schema
from .textproc import OUTSIDE, Token, make_label

log = logging.getLogger(__name__)

SENT_START = "<S>"
SENT_END = "</S>"
GREEDY = "greedy"
VITERBI = "viterbi"


@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int = 30
    patience: int = 5
    seed: int = 0
    learning_rate: float = 0.1
    feature_window: int = 2
    # linker only
    max_sentence_distance: int = 1

    def __post_init__(self):
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be >= 0")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.feature_window < 0:
            raise ValueError("feature_window must be >= 0")
        if self.max_sentence_distance < 0:
            raise ValueError("max_sentence_distance must be >= 0")


class TokenClassifierModel(LinearModel):
    @property
    def label_set(self) -> tuple[str, ...]:
        return self.labels

    @property
    def window(self) -> int:
        return int(self.meta.get("window", 2))

    @property
    def training_meta(self) -> dict:
        return {k: self.meta.get(k) for k in ("epochs_run", "best_epoch", "best_val_f1", "seed")}

    @classmethod
    def untrained(cls, schema: SDoHSchema, window: int = 2) -> "TokenClassifierModel":
        return cls("ner", label_set(schema), schema.version, meta={"window": window})

    @classmethod
    def load(cls, path: str | Path) -> "TokenClassifierModel":
        model = super().load(path)
        if model.component != "ner":
            raise ModelFormatError(f"{path}: expected an ner model, found component {model.component!r}")
        return model


def label_set(schema: SDoHSchema) -> tuple[str, ...]:
    labels = [OUTSIDE]
    for cat in schema.categories:
        labels += [make_label("B", cat.name), make_label("I", cat.name)]
    return tuple(labels)


# ---------------------------------------------------------------------------
# features


def word_shape(word: str) -> str:
    """Collapsed character-class shape: "smoker" -> "x+", "Pt" -> "Xx", "46" -> "9+"."""
    out: list[str] = []
    prev, run = None, 0
    for ch in word:
        c = "X" if ch.isupper() else "x" if ch.islower() else "9" if ch.isdigit() else ch
        if c == prev:
            run += 1
            continue
        if prev is not None:
            out.append(prev + ("+" if run > 1 else ""))
        prev, run = c, 1
    if prev is not None:
        out.append(prev + ("+" if run > 1 else ""))
    return "".join(out)


def featurize_token(
    tokens: Sequence[Token], index: int, window: int = 2, prev_label: str | None = None
) -> list[str]:
    """Feature names for ``tokens[index]``.

    Neighbour features stop at the sentence boundary. ``prev_label`` adds the
    decode-time previous-label feature.
    """
    if not 0 <= index < len(tokens):
        raise IndexError(f"token index {index} out of range for {len(tokens)} tokens")
    tok = tokens[index]
    word = tok.text
    lower = word.lower()
    sent = tok.sentence_index
    feats = [
        "bias",
        f"w0={word}",
        f"lw0={lower}",
        f"shape0={word_shape(word)}",
        f"pre3={lower[:3]}",
        f"suf3={lower[-3:]}",
    ]
    left = []
    for d in range(1, window + 1):
        j = index - d
        left_word = tokens[j].text.lower() if j >= 0 and tokens[j].sentence_index == sent else SENT_START
        k = index + d
        right_word = tokens[k].text.lower() if k < len(tokens) and tokens[k].sentence_index == sent else SENT_END
        feats.append(f"w-{d}={left_word}")
        feats.append(f"w+{d}={right_word}")
        left.append(left_word)
    if window:
        feats.append(f"w-1|w0={left[0]}|{lower}")
    if index == 0 or tokens[index - 1].sentence_index != sent:
        feats.append("first_in_sentence")
    if index == len(tokens) - 1 or tokens[index + 1].sentence_index != sent:
        feats.append("last_in_sentence")
    if prev_label is not None:
        feats.append(prev_feature(prev_label))
    return feats


def prev_feature(label: str | None) -> str:
    return f"prev={SENT_START if label is None else label}"


def _sentence_starts(tokens: Sequence[Token]) -> list[bool]:
    return [i == 0 or tokens[i - 1].sentence_index != t.sentence_index for i, t in enumerate(tokens)]


# ---------------------------------------------------------------------------
# decoding


@lru_cache(maxsize=8)
def _transition_mask(labels: tuple[str, ...]) -> np.ndarray:
    """allowed[p, y]: label y may follow previous state p (last row = sentence start)."""
    n = len(labels)
    allowed = np.ones((n + 1, n), dtype=bool)
    for y, lab in enumerate(labels):
        if lab.startswith("I-"):
            for p, prev in enumerate(labels):
                allowed[p, y] = textproc.is_legal_transition(prev, lab)
            allowed[n, y] = False
    return allowed


def _static_scores(model: LinearModel, tokens: Sequence[Token]) -> np.ndarray:
    window = int(model.meta.get("window", 2))
    out = np.zeros((len(tokens), len(model.labels)))
    for i in range(len(tokens)):
        out[i] = model.scores(featurize_token(tokens, i, window))
    return out


def _prev_scores(model: LinearModel) -> np.ndarray:
    # row p: contribution of "prev=<label p>", last row for sentence start
    states = list(model.labels) + [None]
    return np.stack([model.scores([prev_feature(s)]) for s in states])


def predict_tags(
    model: TokenClassifierModel, tokens: Sequence[Token], decoder: str = GREEDY
) -> tuple[list[str], np.ndarray]:
    """BIO labels plus an array of per-token label probabilities (rows sum to 1)."""
    model.require_trained()
    n_lab = len(model.labels)
    if not tokens:
        return [], np.zeros((0, n_lab))
    static = _static_scores(model, tokens)
    prev = _prev_scores(model)
    allowed = _transition_mask(model.labels)
    starts = _sentence_starts(tokens)
    start_state = n_lab

    if decoder == VITERBI:
        path = _viterbi(static, prev, allowed, starts, start_state)
    elif decoder == GREEDY:
        path = []
        state = start_state
        for t in range(len(tokens)):
            if starts[t]:
                state = start_state
            s = np.where(allowed[state], static[t] + prev[state], -np.inf)
            state = int(np.argmax(s))  # first maximum wins: O on ties
            path.append(state)
    else:
        raise ValueError(f"unknown decoder {decoder!r}")

    probs = np.empty_like(static)
    state = start_state
    for t, y in enumerate(path):
        if starts[t]:
            state = start_state
        probs[t] = softmax(static[t] + prev[state])
        state = y
    return [model.labels[y] for y in path], probs


def _viterbi(static, prev, allowed, starts, start_state) -> list[int]:
    n_lab = static.shape[1]
    path: list[int] = []
    bounds = [i for i, s in enumerate(starts) if s] + [len(starts)]
    for a, b in zip(bounds, bounds[1:]):
        # log-probabilities conditioned on each previous state
        first = static[a] + prev[start_state]
        best = np.where(allowed[start_state], first - np.logaddexp.reduce(first), -np.inf)
        back = []
        for t in range(a + 1, b):
            local = static[t][None, :] + prev[:n_lab]
            logp = local - np.logaddexp.reduce(local, axis=1, keepdims=True)
            logp = np.where(allowed[:n_lab], logp, -np.inf)
            cand = best[:, None] + logp
            ptr = np.argmax(cand, axis=0)
            best = cand[ptr, np.arange(n_lab)]
            back.append(ptr)
        y = int(np.argmax(best))
        seq = [y]
        for ptr in reversed(back):
            y = int(ptr[y])
            seq.append(y)
        path.extend(reversed(seq))
    return path


def tag_document(model: TokenClassifierModel, doc: Document, decoder: str = GREEDY):
    tokens = textproc.tokenize(doc.text)
    labels, _ = predict_tags(model, tokens, decoder)
    return textproc.decode_bio(tokens, labels, doc.text)


def tag_documents(model: TokenClassifierModel, docs: Sequence[AnnotatedDoc], decoder: str = GREEDY) -> list[AnnotatedDoc]:
    return [AnnotatedDoc(d.document, tuple(tag_document(model, d.document, decoder))) for d in docs]


# ---------------------------------------------------------------------------
# training


@dataclass
class _Sentence:
    static: list[list[str]]
    gold: list[int]


def _prepare(docs: Sequence[AnnotatedDoc], labels: Sequence[str], window: int) -> list[_Sentence]:
    lab_idx = {lab: i for i, lab in enumerate(labels)}
    out = []
    for ad in docs:
        tokens = textproc.tokenize(ad.text)
        gold = textproc.encode_bio(tokens, ad.entities)
        # neighbour features are computed over the whole document token list
        start = 0
        while start < len(tokens):
            end = start
            while end < len(tokens) and tokens[end].sentence_index == tokens[start].sentence_index:
                end += 1
            out.append(
                _Sentence(
                    [featurize_token(tokens, i, window) for i in range(start, end)],
                    [lab_idx[gold[i]] for i in range(start, end)],
                )
            )
            start = end
    return out


def _check_schema(docs: Sequence[AnnotatedDoc], labels: Sequence[str], schema: SDoHSchema) -> None:
    known = set(labels)
    for ad in docs:
        for ent in ad.entities:
            if make_label("B", ent.category) not in known:
                raise SchemaMismatch(
                    f"{ad.doc_id}: category {ent.category!r} is not in the label set of schema {schema.version}"
                )


def _val_f1(model: TokenClassifierModel, val_docs: Sequence[AnnotatedDoc]) -> float:
    pred = tag_documents(model, val_docs)
    return scorer.score_concepts(val_docs, pred, scorer.STRICT).f1


def _run_epochs(
    trainer: OnlineTrainer,
    sentences: list[_Sentence],
    val_docs: Sequence[AnnotatedDoc],
    config: TrainConfig,
    schema_version: str,
    meta: dict,
    baseline: tuple[TokenClassifierModel, float] | None = None,
) -> TokenClassifierModel:
    labels = trainer.labels
    encoded = [([trainer.lookup(f) for f in s.static], s.gold) for s in sentences]
    prev_rows = [int(trainer.lookup([prev_feature(lab)])[0]) for lab in labels]
    start_row = int(trainer.lookup([prev_feature(None)])[0])

    rng = random.Random(config.seed)
    best_model, best_f1 = baseline if baseline else (None, -1.0)
    best_epoch = 0
    stale = 0
    epochs_run = 0
    order = list(range(len(encoded)))
    for epoch in range(1, config.max_epochs + 1):
        rng.shuffle(order)
        for si in order:
            static, gold = encoded[si]
            prev_row = start_row
            for idx, y in zip(static, gold):
                trainer.update(np.append(idx, prev_row), y)
                prev_row = prev_rows[y]
        epochs_run = epoch
        model = trainer.snapshot(TokenClassifierModel, "ner", schema_version, meta)
        f1 = _val_f1(model, val_docs)
        log.info("ner epoch %d: validation strict F1 %.4f", epoch, f1)
        if f1 > best_f1:
            best_model, best_f1, best_epoch, stale = model, f1, epoch, 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    final_meta = dict(meta, epochs_run=epochs_run, best_val_f1=best_f1, best_epoch=best_epoch)
    return TokenClassifierModel(best_model.component, best_model.labels, best_model.schema_version,
                                best_model.features, best_model.weights, final_meta)


def train_tagger(
    train_docs: Sequence[AnnotatedDoc],
    val_docs: Sequence[AnnotatedDoc],
    config: TrainConfig = TrainConfig(),
    schema: SDoHSchema | None = None,
) -> TokenClassifierModel:
    schema = schema or default_schema()
    if not train_docs:
        raise EmptyTrainingSet("no training documents")
    if not val_docs:
        raise EmptyTrainingSet("no validation documents")
    if config.max_epochs < 1:
        raise ValueError("train_tagger needs max_epochs >= 1")
    labels = label_set(schema)
    _check_schema(list(train_docs) + list(val_docs), labels, schema)

    sentences = _prepare(train_docs, labels, config.feature_window)
    trainer = OnlineTrainer(labels, config.learning_rate)
    for s in sentences:
        for feats in s.static:
            trainer.add_features(feats)
    trainer.add_features([prev_feature(lab) for lab in labels] + [prev_feature(None)])
    meta = {"window": config.feature_window, "seed": config.seed, "learning_rate": config.learning_rate}
    return _run_epochs(trainer, sentences, val_docs, config, schema.version, meta)


def fine_tune_tagger(
    model: TokenClassifierModel,
    new_train_docs: Sequence[AnnotatedDoc],
    new_val_docs: Sequence[AnnotatedDoc],
    config: TrainConfig = TrainConfig(),
    schema: SDoHSchema | None = None,
) -> TokenClassifierModel:
    """Continue training from ``model``'s weights on new data.

    The starting model competes in model selection, so the result never
    scores below it on ``new_val_docs``.
    """
    model.require_trained()
    if config.max_epochs == 0:
        return model
    schema = schema or default_schema()
    if model.schema_version != schema.version:
        raise SchemaMismatch(f"model schema {model.schema_version} != {schema.version}")
    if not new_train_docs:
        raise EmptyTrainingSet("no fine-tuning documents")
    if not new_val_docs:
        raise EmptyTrainingSet("no validation documents")
    _check_schema(list(new_train_docs) + list(new_val_docs), model.labels, schema)

    window = model.window
    sentences = _prepare(new_train_docs, model.labels, window)
    trainer = OnlineTrainer(model.labels, config.learning_rate, init=model)
    for s in sentences:
        for feats in s.static:
            trainer.add_features(feats)
    trainer.add_features([prev_feature(lab) for lab in model.labels] + [prev_feature(None)])
    meta = dict(model.meta)
    meta.update(seed=config.seed, learning_rate=config.learning_rate, fine_tuned=True)
    start = TokenClassifierModel(model.component, model.labels, model.schema_version,
                                 model.features, model.weights, meta)
    return _run_epochs(trainer, sentences, new_val_docs, config, schema.version, meta,
                       baseline=(start, _val_f1(start, new_val_docs)))
