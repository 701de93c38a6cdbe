"""N-gram accuracy metrics (BLEU, ROUGE-L, CIDEr-D) and count-based diversity
metrics (Div-n, mBLEU-N, unique sentence ratio).

Score scales follow the usual captioning conventions: BLEU, ROUGE-L and
mBLEU are reported in [0, 100], CIDEr-D in [0, 10], Div-n and uniqueness
as plain ratios.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

from .corpus import Caption, CaptionSet, ReferenceSet

__all__ = [
    "NGramProfile",
    "DfStats",
    "ngram_profile",
    "compute_df",
    "cider",
    "bleu",
    "sentence_bleu",
    "rouge_l",
    "div_n",
    "mbleu",
    "uniqueness",
]

MAX_ORDER = 4
CIDER_SIGMA = 6.0
ROUGE_BETA = 1.2


@dataclass(frozen=True)
class NGramProfile:
    n: int
    counts: Counter = field(default_factory=Counter)

    @property
    def total(self) -> int:
        return sum(self.counts.values())


def _check_order(n: int) -> None:
    if not 1 <= n <= MAX_ORDER:
        raise ValueError(f"n-gram order must be in 1..{MAX_ORDER}, got {n}")


def _counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def ngram_profile(tokens: Sequence[str], n: int) -> NGramProfile:
    _check_order(n)
    return NGramProfile(n, _counts(tuple(tokens), n))


@dataclass(frozen=True)
class DfStats:
    """Reference document frequencies for CIDEr.

    ``doc_freq`` maps an n-gram tuple (of any order 1..4, the tuple length
    is the order) to the number of images whose references contain it.
    """

    doc_freq: dict
    num_images: int

    def lookup(self, gram: tuple) -> int:
        # unseen n-grams count as df=1 so their idf is log(num_images)
        return max(1, self.doc_freq.get(gram, 0))

    @property
    def log_num_images(self) -> float:
        return math.log(float(self.num_images))


def compute_df(references: Sequence[ReferenceSet]) -> DfStats:
    if not references:
        raise ValueError("cannot compute document frequencies of an empty corpus")
    df: Counter = Counter()
    for refset in references:
        grams = set()
        for ref in refset.references:
            for n in range(1, MAX_ORDER + 1):
                grams.update(_counts(ref.tokens, n))
        df.update(grams)
    return DfStats(dict(df), len(references))


# --- CIDEr-D -----------------------------------------------------------------

def _tfidf(tokens: Sequence[str], df: DfStats) -> list[tuple[dict, float]]:
    """Per-order TF-IDF vectors and their squared norms."""
    out = []
    log_n = df.log_num_images
    for n in range(1, MAX_ORDER + 1):
        vec = {}
        sq = 0.0
        for gram, tf in _counts(tokens, n).items():
            w = float(tf) * (log_n - math.log(float(df.lookup(gram))))
            vec[gram] = w
            sq += w * w
        out.append((vec, sq))
    return out


def _cider_d_pair(cand_vecs, ref_vecs, delta: float, sigma: float) -> float:
    penalty = math.exp(-(delta ** 2) / (2.0 * sigma ** 2))
    total = 0.0
    for (vc, sq_c), (vr, sq_r) in zip(cand_vecs, ref_vecs):
        if sq_c == 0.0 or sq_r == 0.0:
            continue
        dot = 0.0
        for gram, wc in vc.items():
            wr = vr.get(gram)
            if wr is not None:
                dot += min(wc, wr) * wr
        # sqrt(a*b) rather than sqrt(a)*sqrt(b): identical vectors give exactly 1
        total += dot / math.sqrt(sq_c * sq_r) * penalty
    return total / len(cand_vecs)


def cider(candidate: Caption, refs: ReferenceSet, df: DfStats, sigma: float = CIDER_SIGMA) -> float:
    """CIDEr-D of one candidate against its references, on the 0-10 scale.

    Clipped TF-IDF cosine per n-gram order (1..4) with a Gaussian length
    penalty, averaged over orders and references and multiplied by 10.
    """
    if not candidate.tokens:
        return 0.0
    cand_vecs = _tfidf(candidate.tokens, df)
    lc = len(candidate.tokens)
    per_ref = [_cider_d_pair(cand_vecs, _tfidf(r.tokens, df), float(lc - len(r.tokens)), sigma)
               for r in refs.references]
    return 10.0 * math.fsum(per_ref) / len(per_ref)


# --- BLEU --------------------------------------------------------------------

def _clipped_stats(cand: Sequence[str], refs: Sequence[Sequence[str]], max_n: int):
    matches, totals = [], []
    for n in range(1, max_n + 1):
        cc = _counts(cand, n)
        max_ref: Counter = Counter()
        for r in refs:
            for g, c in _counts(r, n).items():
                if c > max_ref[g]:
                    max_ref[g] = c
        matches.append(sum(min(c, max_ref[g]) for g, c in cc.items()))
        totals.append(max(0, len(cand) - n + 1))
    return matches, totals


def _closest_ref_len(cand_len: int, refs: Sequence[Sequence[str]]) -> int:
    return min((abs(len(r) - cand_len), len(r)) for r in refs)[1]


def _brevity_penalty(c: int, r: int) -> float:
    if c == 0:
        return 0.0
    return 1.0 if c > r else math.exp(1.0 - r / c)


def bleu(candidates: Sequence[Caption], refs: Sequence[ReferenceSet], max_n: int = 4) -> float:
    """Corpus BLEU-``max_n`` (0-100), closest-reference-length brevity penalty, no smoothing."""
    _check_order(max_n)
    if len(candidates) != len(refs):
        raise ValueError(f"{len(candidates)} candidates but {len(refs)} reference sets")
    matches = [0] * max_n
    totals = [0] * max_n
    c_len = r_len = 0
    for cand, refset in zip(candidates, refs):
        ref_toks = [r.tokens for r in refset.references]
        m, t = _clipped_stats(cand.tokens, ref_toks, max_n)
        matches = [a + b for a, b in zip(matches, m)]
        totals = [a + b for a, b in zip(totals, t)]
        c_len += len(cand.tokens)
        r_len += _closest_ref_len(len(cand.tokens), ref_toks)
    if any(m == 0 for m in matches):
        return 0.0
    log_p = sum(math.log(m / t) for m, t in zip(matches, totals)) / max_n
    return 100.0 * _brevity_penalty(c_len, r_len) * math.exp(log_p)


def sentence_bleu(candidate: Sequence[str], refs: Sequence[Sequence[str]],
                  max_n: int = 4, smooth: bool = True) -> float:
    """Sentence BLEU (0-100).

    With ``smooth`` a zero match count at order n >= 2 becomes
    1 / (total + 1); unigram precision is never smoothed, so captions
    with no shared word score exactly 0.
    """
    _check_order(max_n)
    if not candidate:
        return 0.0
    matches, totals = _clipped_stats(candidate, refs, max_n)
    log_p = 0.0
    for n, (m, t) in enumerate(zip(matches, totals), start=1):
        if m == 0:
            if n == 1 or not smooth:
                return 0.0
            p = 1.0 / (t + 1)
        else:
            p = m / t
        log_p += math.log(p)
    bp = _brevity_penalty(len(candidate), _closest_ref_len(len(candidate), refs))
    return 100.0 * bp * math.exp(log_p / max_n)


# --- ROUGE-L -----------------------------------------------------------------

def _lcs(a: Sequence[str], b: Sequence[str]) -> int:
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: Caption, refs: ReferenceSet, beta: float = ROUGE_BETA) -> float:
    """Best LCS F-measure over references (0-100), recall weighted by ``beta**2``."""
    if not candidate.tokens:
        return 0.0
    b2 = beta ** 2
    best = 0.0
    for ref in refs.references:
        if not ref.tokens:
            continue
        lcs = _lcs(candidate.tokens, ref.tokens)
        if lcs == 0:
            continue
        prec = lcs / len(candidate.tokens)
        rec = lcs / len(ref.tokens)
        best = max(best, ((1 + b2) * prec * rec) / (rec + b2 * prec))
    return 100.0 * best


# --- diversity ---------------------------------------------------------------

def div_n(caption_set: CaptionSet, n: int) -> float:
    """Distinct n-grams across the set divided by the total number of *words*.

    The denominator is the word count even for n >= 2, so Div-2 of a set
    of two-word captions is at most 0.5.
    """
    _check_order(n)
    words = sum(len(c.tokens) for c in caption_set.captions)
    if words == 0:
        raise ValueError(f"caption set {caption_set.image_id!r} has no words")
    distinct = set()
    for c in caption_set.captions:
        distinct.update(_counts(c.tokens, n))
    return len(distinct) / words


def mbleu(caption_set: CaptionSet, n: int = 4) -> float:
    """Mean smoothed sentence BLEU-n of each caption against the other K-1."""
    caps = caption_set.captions
    if len(caps) < 2:
        raise ValueError("mBLEU needs at least two captions")
    scores = []
    for i, c in enumerate(caps):
        rest = [o.tokens for j, o in enumerate(caps) if j != i]
        scores.append(sentence_bleu(c.tokens, rest, n))
    return math.fsum(scores) / len(scores)


def uniqueness(sets: Sequence[CaptionSet]) -> float:
    """Average over images of (distinct raw captions) / K."""
    if not sets:
        raise ValueError("uniqueness of an empty list of caption sets")
    return math.fsum(len({c.raw for c in s.captions}) / s.k for s in sets) / len(sets)
