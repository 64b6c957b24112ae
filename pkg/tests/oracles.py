"""Independent reference implementations used only by the tests.

They are deliberately naive (exhaustive search, plain counting) so that
agreement with the package is meaningful.
"""

from collections import Counter
from fractions import Fraction
from itertools import permutations


def pair_ok(g, p, mode):
    if g.category != p.category:
        return False
    if mode == "strict":
        return (g.start, g.end) == (p.start, p.end)
    return max(g.start, p.start) < min(g.end, p.end)


def max_matching_size(gold, pred, mode):
    """Largest one-to-one matching by trying every injection."""
    best = 0
    small, large, flip = (gold, pred, False) if len(gold) <= len(pred) else (pred, gold, True)
    for perm in permutations(range(len(large)), len(small)):
        count = 0
        for i, j in enumerate(perm):
            g, p = (large[j], small[i]) if flip else (small[i], large[j])
            count += pair_ok(g, p, mode)
        best = max(best, count)
    # permutations also tries "leaving out" via mismatched slots, so this is exact
    return best


def prf(tp, n_pred, n_gold):
    p = Fraction(tp, n_pred) if n_pred else Fraction(0)
    r = Fraction(tp, n_gold) if n_gold else Fraction(0)
    f = 2 * p * r / (p + r) if p + r else Fraction(0)
    return p, r, f


def kappa(a, b):
    n = len(a)
    p_o = Fraction(sum(x == y for x, y in zip(a, b)), n)
    ca, cb = Counter(a), Counter(b)
    p_e = sum(Fraction(ca[k], n) * Fraction(cb[k], n) for k in set(a) | set(b))
    if p_e == 1:
        return Fraction(1)
    return (p_o - p_e) / (1 - p_e)


def tally_rates(records, roster, categories):
    """{category: (concept_count, distinct patients, rate as Fraction)}"""
    out = {}
    for cat in categories:
        hits = [r for r in records if r.concept.category == cat]
        pats = set()
        for r in hits:
            pats.add(r.patient_id)
        out[cat] = (len(hits), len(pats), Fraction(len(pats), len(roster)))
    return out


def rescan_offsets(text, entities):
    """True when every entity surface sits at its recorded offsets."""
    return all(text[e.start:e.end] == e.surface and text.find(e.surface, e.start) == e.start for e in entities)
