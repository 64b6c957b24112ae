"""Sparse softmax-linear classifier shared by the tagger and the linker.

Training is online cross-entropy SGD with parameter averaging. Model files are
plain text::

    #sdoh-extract-model<TAB>1
    component<TAB>ner|re
    schema_version<TAB><version>
    labels<TAB><label 1><TAB><label 2>...
    meta<TAB><json object>
    weights<TAB><row count>
    <feature><TAB><label><TAB><weight>

Weights are written with ``repr`` so loading reproduces them bit for bit.
Features whose weights are all zero are omitted.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ModelFormatError, UntrainedModel

MAGIC = "#sdoh-extract-model"
FORMAT_VERSION = "1"


def softmax(scores: np.ndarray) -> np.ndarray:
    z = np.exp(scores - scores.max(axis=-1, keepdims=True))
    return z / z.sum(axis=-1, keepdims=True)


@dataclass(frozen=True, eq=False)
class LinearModel:
    component: str
    labels: tuple[str, ...]
    schema_version: str
    features: tuple[str, ...] = ()
    weights: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.weights is not None:
            if self.weights.shape != (len(self.features), len(self.labels)):
                raise ModelFormatError(
                    f"weight matrix {self.weights.shape} does not fit "
                    f"{len(self.features)} features x {len(self.labels)} labels"
                )
            if not np.all(np.isfinite(self.weights)):
                raise ModelFormatError("weights must be finite")
            self.weights.setflags(write=False)
        object.__setattr__(self, "_index", {f: i for i, f in enumerate(self.features)})

    @property
    def trained(self) -> bool:
        return self.weights is not None

    def require_trained(self) -> None:
        if self.weights is None:
            raise UntrainedModel(f"{self.component} model has not been trained")

    @property
    def feature_weights(self) -> dict[str, np.ndarray]:
        self.require_trained()
        return {f: self.weights[i] for i, f in enumerate(self.features)}

    def index_of(self, feats: Sequence[str]) -> np.ndarray:
        idx = self._index
        return np.fromiter((idx[f] for f in feats if f in idx), dtype=np.intp)

    def score_index(self, idx: np.ndarray) -> np.ndarray:
        self.require_trained()
        return self.weights[idx].sum(axis=0)

    def scores(self, feats: Sequence[str]) -> np.ndarray:
        return self.score_index(self.index_of(feats))

    @cached_property
    def fingerprint(self) -> str:
        h = hashlib.sha256(self.to_text().encode("utf-8"))
        return h.hexdigest()[:12]

    # -- serialization ------------------------------------------------------

    def to_text(self) -> str:
        self.require_trained()
        lines = [
            f"{MAGIC}\t{FORMAT_VERSION}",
            f"component\t{self.component}",
            f"schema_version\t{self.schema_version}",
            "labels\t" + "\t".join(self.labels),
            "meta\t" + json.dumps(self.meta, sort_keys=True),
        ]
        rows = []
        for i, feat in enumerate(self.features):
            for j, label in enumerate(self.labels):
                w = self.weights[i, j]
                if w != 0.0:
                    rows.append(f"{feat}\t{label}\t{float(w)!r}")
        lines.append(f"weights\t{len(rows)}")
        lines.extend(rows)
        return "\n".join(lines) + "\n"

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_text())

    @classmethod
    def from_text(cls, content: str) -> "LinearModel":
        lines = content.split("\n")
        try:
            magic, version = lines[0].split("\t")
            if magic != MAGIC:
                raise ModelFormatError("not a model file (bad magic header)")
            if version != FORMAT_VERSION:
                raise ModelFormatError(f"unsupported model format version {version}")
            header = {}
            for line in lines[1:6]:
                key, _, value = line.partition("\t")
                header[key] = value
            labels = tuple(header["labels"].split("\t"))
            n_rows = int(header["weights"])
            meta = json.loads(header["meta"])
            features: dict[str, int] = {}
            entries = []
            label_idx = {lab: j for j, lab in enumerate(labels)}
            for line in lines[6:6 + n_rows]:
                feat, label, w = line.split("\t")
                i = features.setdefault(feat, len(features))
                entries.append((i, label_idx[label], float(w)))
        except (ValueError, KeyError, IndexError) as exc:
            raise ModelFormatError(f"malformed model file: {exc}") from exc
        weights = np.zeros((len(features), len(labels)))
        for i, j, w in entries:
            weights[i, j] = w
        return cls(
            component=header["component"],
            labels=labels,
            schema_version=header["schema_version"],
            features=tuple(features),
            weights=weights,
            meta=meta,
        )

    @classmethod
    def load(cls, path: str | Path) -> "LinearModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_text(fh.read())


class OnlineTrainer:
    """Averaged SGD on the softmax cross-entropy loss.

    ``W`` holds the current weights, ``U`` the step-weighted update sum; the
    averaged weights are ``W - U / steps``.
    """

    def __init__(self, labels: Sequence[str], learning_rate: float, init: LinearModel | None = None):
        self.labels = tuple(labels)
        self.lr = float(learning_rate)
        self.index: dict[str, int] = {}
        n = len(self.labels)
        self.W = np.zeros((0, n))
        if init is not None and init.trained:
            if tuple(init.labels) != self.labels:
                raise ValueError("initial model label set differs")
            self.index = {f: i for i, f in enumerate(init.features)}
            self.W = np.array(init.weights, dtype=float)
        self.U = np.zeros_like(self.W)
        self.steps = 1

    def add_features(self, feats) -> None:
        new = [f for f in dict.fromkeys(feats) if f not in self.index]
        if not new:
            return
        for f in new:
            self.index[f] = len(self.index)
        pad = np.zeros((len(new), len(self.labels)))
        self.W = np.vstack([self.W, pad])
        self.U = np.vstack([self.U, pad])

    def lookup(self, feats: Sequence[str]) -> np.ndarray:
        idx = self.index
        return np.fromiter((idx[f] for f in feats if f in idx), dtype=np.intp)

    def update(self, idx: np.ndarray, gold: int) -> None:
        p = softmax(self.W[idx].sum(axis=0))
        p[gold] -= 1.0
        delta = -self.lr * p
        self.W[idx] += delta
        self.U[idx] += self.steps * delta
        self.steps += 1

    def averaged(self) -> np.ndarray:
        return self.W - self.U / self.steps

    def snapshot(self, cls: type, component: str, schema_version: str, meta: dict) -> LinearModel:
        return cls(
            component=component,
            labels=self.labels,
            schema_version=schema_version,
            features=tuple(self.index),
            weights=self.averaged(),
            meta=dict(meta),
        )
