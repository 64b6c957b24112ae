"""Tokenization, sentence segmentation and BIO encoding with exact offsets.

Tokens are maximal runs of letters/digits; every other non-space character is
a token by itself. A new sentence starts after ``.``, ``!`` or ``?`` when the
next token follows whitespace and begins with an uppercase letter, and after
any gap containing a newline. Abbreviations ("Dr. Smith") therefore split;
that is a known limitation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .documents import EntityAnnotation
from .errors import EntityOutsideText, LengthMismatch, OverlappingEntities
from .schema import to_display_name, to_file_name

OUTSIDE = "O"
SENTENCE_FINAL = frozenset(".!?")


@dataclass(frozen=True)
class Token:
    text: str
    start: int
    end: int
    sentence_index: int = 0


def tokenize(text: str) -> list[Token]:
    raw: list[tuple[int, int]] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch.isalnum():
            j = i + 1
            while j < n and text[j].isalnum():
                j += 1
            raw.append((i, j))
            i = j
        else:
            raw.append((i, i + 1))
            i += 1

    tokens: list[Token] = []
    sent = 0
    for k, (s, e) in enumerate(raw):
        if k:
            ps, pe = raw[k - 1]
            gap = text[pe:s]
            if "\n" in gap:
                sent += 1
            elif gap and text[ps:pe] in SENTENCE_FINAL and text[s].isupper():
                sent += 1
        tokens.append(Token(text[s:e], s, e, sent))
    return tokens


def sentences(tokens: Sequence[Token]) -> list[list[Token]]:
    out: list[list[Token]] = []
    for tok in tokens:
        if not out or out[-1][0].sentence_index != tok.sentence_index:
            out.append([])
        out[-1].append(tok)
    return out


def make_label(tag: str, category: str | None = None) -> str:
    if tag == OUTSIDE:
        return OUTSIDE
    return f"{tag}-{to_file_name(category)}"


def split_label(label: str) -> tuple[str, str | None]:
    """``"B-Tobacco_use"`` -> ``("B", "Tobacco use")``; ``"O"`` -> ``("O", None)``."""
    if label == OUTSIDE:
        return OUTSIDE, None
    tag, sep, cat = label.partition("-")
    if not sep or tag not in ("B", "I") or not cat:
        raise ValueError(f"not a BIO label: {label!r}")
    return tag, to_display_name(cat)


def is_legal_transition(prev: str | None, label: str) -> bool:
    """I-X may only follow B-X or I-X."""
    if not label.startswith("I-"):
        return True
    return prev is not None and prev != OUTSIDE and prev[2:] == label[2:]


def token_span(tokens: Sequence[Token], start: int, end: int) -> tuple[int, int] | None:
    """Indices [i, j) of the tokens overlapping the character span [start, end)."""
    first = last = None
    for idx, tok in enumerate(tokens):
        if tok.end <= start:
            continue
        if tok.start >= end:
            break
        if first is None:
            first = idx
        last = idx
    if first is None:
        return None
    return first, last + 1


def snap(tokens: Sequence[Token], entity: EntityAnnotation, text: str | None = None) -> EntityAnnotation:
    """Extend an entity's boundaries outward to the enclosing token boundaries."""
    span = token_span(tokens, entity.start, entity.end)
    if span is None:
        raise EntityOutsideText(f"entity {entity.entity_id} [{entity.start},{entity.end}) covers no token")
    start, end = tokens[span[0]].start, tokens[span[1] - 1].end
    if (start, end) == (entity.start, entity.end):
        return entity
    surface = text[start:end] if text is not None else _join(tokens[span[0]:span[1]], start)
    return EntityAnnotation(entity.entity_id, entity.category, start, end, surface)


def is_token_aligned(tokens: Sequence[Token], entity: EntityAnnotation) -> bool:
    span = token_span(tokens, entity.start, entity.end)
    return span is not None and tokens[span[0]].start == entity.start and tokens[span[1] - 1].end == entity.end


def _join(toks: Sequence[Token], offset: int) -> str:
    # rebuild a surface from tokens alone; gaps are filled with spaces
    chars: list[str] = []
    pos = offset
    for t in toks:
        chars.append(" " * (t.start - pos))
        chars.append(t.text)
        pos = t.end
    return "".join(chars)


def encode_bio(tokens: Sequence[Token], entities: Iterable[EntityAnnotation]) -> list[str]:
    labels = [OUTSIDE] * len(tokens)
    owner: list[str | None] = [None] * len(tokens)
    for ent in sorted(entities, key=lambda e: (e.start, e.end)):
        span = token_span(tokens, ent.start, ent.end)
        if span is None:
            raise EntityOutsideText(f"entity {ent.entity_id} [{ent.start},{ent.end}) covers no token")
        for k in range(*span):
            if owner[k] is not None:
                raise OverlappingEntities(
                    f"entities {owner[k]} and {ent.entity_id} share token {tokens[k].text!r} at {tokens[k].start}"
                )
            owner[k] = ent.entity_id
            labels[k] = make_label("B" if k == span[0] else "I", ent.category)
    return labels


def decode_bio(tokens: Sequence[Token], labels: Sequence[str], text: str | None = None) -> list[EntityAnnotation]:
    """Turn a label sequence back into entities.

    An I-X that does not continue a B-X/I-X run is read as B-X.
    """
    if len(tokens) != len(labels):
        raise LengthMismatch(f"{len(tokens)} tokens but {len(labels)} labels")
    runs: list[tuple[str, int, int]] = []
    current: list | None = None
    for k, label in enumerate(labels):
        tag, cat = split_label(label)
        if tag == OUTSIDE:
            current = None
            continue
        if tag == "I" and current is not None and current[0] == cat:
            current[2] = k + 1
            continue
        current = [cat, k, k + 1]
        runs.append(current)

    entities = []
    for n, (cat, i, j) in enumerate(runs, start=1):
        start, end = tokens[i].start, tokens[j - 1].end
        surface = text[start:end] if text is not None else _join(tokens[i:j], start)
        entities.append(EntityAnnotation(f"T{n}", cat, start, end, surface))
    return entities


def to_conll(tokens: Sequence[Token], labels: Sequence[str]) -> str:
    """One ``surface<TAB>start<TAB>end<TAB>label`` row per token, blank line between sentences."""
    if len(tokens) != len(labels):
        raise LengthMismatch(f"{len(tokens)} tokens but {len(labels)} labels")
    lines: list[str] = []
    prev_sent = None
    for tok, label in zip(tokens, labels):
        if prev_sent is not None and tok.sentence_index != prev_sent:
            lines.append("")
        lines.append(f"{tok.text}\t{tok.start}\t{tok.end}\t{label}")
        prev_sent = tok.sentence_index
    return "\n".join(lines) + ("\n" if lines else "")


def from_conll(content: str) -> tuple[list[Token], list[str]]:
    tokens: list[Token] = []
    labels: list[str] = []
    sent = 0
    for line in content.splitlines():
        if not line.strip():
            if tokens and tokens[-1].sentence_index == sent:
                sent += 1
            continue
        surface, start, end, label = line.split("\t")
        tokens.append(Token(surface, int(start), int(end), sent))
        labels.append(label)
    return tokens, labels
