"""Keyword-based note selection, snowball lexicon expansion and stratified sampling."""

from __future__ import annotations

import random
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Hashable, Iterable, Sequence

from . import textproc
from .documents import AnnotatedDoc, Document
from .errors import SampleTooLarge
from .schema import CONCEPT, SDoHSchema

SEED = "seed"
SNOWBALL = "snowball"
MANUAL = "manual"


def normalize_phrase(phrase: str) -> str:
    return " ".join(phrase.lower().split())


@dataclass(frozen=True)
class KeywordLexicon:
    keywords: frozenset[str]
    provenance: dict[str, str] = field(default_factory=dict, compare=False)
    version: str = "unversioned"

    @classmethod
    def from_phrases(cls, phrases: Iterable[str], provenance: str = SEED, version: str = "unversioned"):
        norm = [normalize_phrase(p) for p in phrases]
        norm = [p for p in norm if p]
        return cls(frozenset(norm), {p: provenance for p in norm}, version)

    def extend(self, phrases: Iterable[str], provenance: str = SNOWBALL) -> "KeywordLexicon":
        prov = dict(self.provenance)
        for p in phrases:
            p = normalize_phrase(p)
            if p and p not in self.keywords:
                prov[p] = provenance
        return KeywordLexicon(frozenset(prov) | self.keywords, prov, self.version)

    def __len__(self) -> int:
        return len(self.keywords)


def load_lexicon(path: str | Path) -> KeywordLexicon:
    """One phrase per line; ``#`` starts a comment. A ``# version: X`` line sets
    the version and ``phrase<TAB>provenance`` overrides the default ``seed``."""
    version = Path(path).stem
    prov: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            stripped = line.strip()
            if stripped.startswith("#"):
                body = stripped.lstrip("#").strip()
                if body.lower().startswith("version:"):
                    version = body.split(":", 1)[1].strip()
                continue
            phrase, _, origin = line.partition("#")[0].partition("\t")
            phrase = normalize_phrase(phrase)
            if phrase:
                prov[phrase] = origin.strip() or SEED
    return KeywordLexicon(frozenset(prov), prov, version)


def save_lexicon(path: str | Path, lexicon: KeywordLexicon) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# version: {lexicon.version}\n")
        for phrase in sorted(lexicon.keywords):
            fh.write(f"{phrase}\t{lexicon.provenance.get(phrase, SEED)}\n")


def _phrase_tokens(lexicon: KeywordLexicon) -> dict[tuple[str, ...], list[str]]:
    by_first: dict[tuple[str, ...], list[str]] = {}
    for phrase in sorted(lexicon.keywords):
        toks = tuple(t.text.lower() for t in textproc.tokenize(phrase))
        if toks:
            by_first.setdefault(toks, []).append(phrase)
    return by_first


def match_keywords(text: str, lexicon: KeywordLexicon, substring: bool = False) -> list[tuple[str, int, int]]:
    """All ``(phrase, start, end)`` occurrences, ordered by offset.

    Matching is case-insensitive over whole tokens, so "smoker" does not hit
    "nonsmoker"; ``substring=True`` switches to raw substring search.
    """
    hits: list[tuple[str, int, int]] = []
    if substring:
        low = text.lower()
        for phrase in lexicon.keywords:
            i = low.find(phrase)
            while i != -1:
                hits.append((phrase, i, i + len(phrase)))
                i = low.find(phrase, i + 1)
        return sorted(hits, key=lambda h: (h[1], h[2], h[0]))

    tokens = textproc.tokenize(text)
    words = [t.text.lower() for t in tokens]
    patterns = _phrase_tokens(lexicon)
    starts: dict[str, list[tuple[tuple[str, ...], list[str]]]] = defaultdict(list)
    for toks, phrases in patterns.items():
        starts[toks[0]].append((toks, phrases))
    for i, w in enumerate(words):
        for toks, phrases in starts.get(w, ()):
            n = len(toks)
            if tuple(words[i:i + n]) == toks:
                for phrase in phrases:
                    hits.append((phrase, tokens[i].start, tokens[i + n - 1].end))
    return sorted(hits, key=lambda h: (h[1], h[2], h[0]))


def count_matches(text: str, lexicon: KeywordLexicon, substring: bool = False) -> tuple[int, int]:
    """(distinct phrases matched, total matches)."""
    hits = match_keywords(text, lexicon, substring)
    return len({h[0] for h in hits}), len(hits)


def _notes(notes) -> Iterable[tuple[str, str]]:
    for n in notes:
        if isinstance(n, AnnotatedDoc):
            yield n.doc_id, n.text
        elif isinstance(n, Document):
            yield n.doc_id, n.text
        else:
            yield n


def select_notes(
    notes,
    lexicon: KeywordLexicon,
    min_unique: int = 3,
    unique_by: str = "phrase",
    substring: bool = False,
) -> list[str]:
    """doc_ids of notes with at least ``min_unique`` unique keyword mentions.

    ``unique_by="phrase"`` counts distinct lexicon phrases; ``"offset"``
    counts distinct match positions.
    """
    if min_unique < 1:
        raise ValueError("min_unique must be >= 1")
    if unique_by not in ("phrase", "offset"):
        raise ValueError("unique_by must be 'phrase' or 'offset'")
    selected = []
    for doc_id, text in _notes(notes):
        hits = match_keywords(text, lexicon, substring)
        n = len({h[0] for h in hits}) if unique_by == "phrase" else len({(h[1], h[2]) for h in hits})
        if n >= min_unique:
            selected.append(doc_id)
    return selected


def snowball_expand(
    lexicon: KeywordLexicon,
    annotated_docs: Iterable[AnnotatedDoc],
    schema: SDoHSchema | None = None,
    roles: Sequence[str] | None = (CONCEPT,),
) -> list[str]:
    """Candidate keywords: normalized gold surfaces not already covered by
    the lexicon, most frequent first.

    With a schema, only entities whose category has one of ``roles`` are
    harvested; ``roles=None`` takes every entity.
    """
    freq: Counter = Counter()
    for ad in annotated_docs:
        for ent in ad.entities:
            if schema is not None and roles is not None:
                if ent.category not in schema or schema.role(ent.category) not in roles:
                    continue
            phrase = normalize_phrase(ent.surface)
            if phrase and not match_keywords(phrase, lexicon):
                freq[phrase] += 1
    return [p for p, _ in sorted(freq.items(), key=lambda kv: (-kv[1], kv[0]))]


def stratum_quotas(sizes: dict[Hashable, int], n: int) -> dict[Hashable, int]:
    """Proportional quotas with largest-remainder rounding; remainder ties go
    to strata in first-seen order."""
    total = sum(sizes.values())
    if n > total:
        raise SampleTooLarge(f"cannot sample {n} of {total} items")
    if total == 0:
        return {k: 0 for k in sizes}
    quotas = {k: (n * s) // total for k, s in sizes.items()}
    left = n - sum(quotas.values())
    order = sorted(sizes, key=lambda k: -((n * sizes[k]) % total))  # stable sort keeps first-seen order
    for k in order[:left]:
        quotas[k] += 1
    return quotas


def stratified_sample(items: Sequence[tuple[object, Hashable]], n: int, seed: int = 0) -> list:
    """Sample ``n`` items from ``(item, stratum)`` pairs, proportionally per stratum.

    Returned items keep their input order.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    by_stratum: dict[Hashable, list[int]] = {}
    for i, (_, stratum) in enumerate(items):
        by_stratum.setdefault(stratum, []).append(i)
    quotas = stratum_quotas({k: len(v) for k, v in by_stratum.items()}, n)
    rng = random.Random(seed)
    chosen: list[int] = []
    for stratum, idx in by_stratum.items():
        chosen.extend(rng.sample(idx, quotas[stratum]))
    return [items[i][0] for i in sorted(chosen)]
