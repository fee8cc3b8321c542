"""Tokenization and n-gram overlap metrics.

The tokenizer is the single canonical one for the whole package; every
lexical score is defined over its output so results do not drift with
upstream text normalization choices.
"""

from __future__ import annotations

import math
import string
from collections import Counter
from typing import Iterable, NamedTuple, Sequence

from radeval import _kernels

EPSILON = 1e-9

_STRIP = string.punctuation


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, strip edge punctuation, drop empties.

    Internal characters survive, so measurements like "3.5" and hyphenated
    terms keep their shape; only leading/trailing ASCII punctuation goes.
    """
    out = []
    for raw in text.lower().split():
        token = raw.strip(_STRIP)
        if token:
            out.append(token)
    return out


def _ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _corpus_ngram_stats(
    candidates: Sequence[Sequence[str]],
    references: Sequence[Sequence[str]],
    max_n: int,
) -> tuple[list[int], list[int], int, int]:
    """Clipped and total candidate n-gram counts per order, plus length totals."""
    clipped = [0] * (max_n + 1)
    total = [0] * (max_n + 1)
    cand_len = 0
    ref_len = 0
    for cand, ref in zip(candidates, references):
        cand_len += len(cand)
        ref_len += len(ref)
        for n in range(1, max_n + 1):
            cand_counts = _ngram_counts(cand, n)
            if not cand_counts:
                continue
            ref_counts = _ngram_counts(ref, n)
            total[n] += sum(cand_counts.values())
            clipped[n] += sum(min(count, ref_counts[gram])
                              for gram, count in cand_counts.items())
    return clipped, total, cand_len, ref_len


def _bleu_from_stats(clipped: list[int], total: list[int],
                     cand_len: int, ref_len: int,
                     max_n: int, smoothing: str) -> float:
    if cand_len == 0:
        return 0.0
    log_sum = 0.0
    orders = 0
    for n in range(1, max_n + 1):
        if total[n] == 0:
            # No candidate n-grams of this order exist; the precision is
            # vacuous (0/0) and the order drops out of the geometric mean.
            continue
        if smoothing == "none":
            if clipped[n] == 0:
                return 0.0
            p = clipped[n] / total[n]
        else:
            p = (clipped[n] + EPSILON) / (total[n] + EPSILON)
        log_sum += math.log(p)
        orders += 1
    if orders == 0:
        return 0.0
    geo_mean = math.exp(log_sum / orders)
    brevity = 1.0 if cand_len >= ref_len else math.exp(1.0 - ref_len / cand_len)
    return brevity * geo_mean


def bleu(
    candidates: Sequence[Sequence[str]],
    references: Sequence[Sequence[str]],
    max_n: int = 4,
    smoothing: str = "none",
    sentence_level: bool = False,
) -> float:
    """Corpus-level BLEU over pre-tokenized pairs, in [0, 1].

    Clipped n-gram counts are summed over the whole corpus before the
    precision ratios are taken; the brevity penalty uses total lengths.
    With ``sentence_level=True`` each pair is scored alone and the mean is
    returned instead.

    Args:
        candidates: candidate token sequences.
        references: reference token sequences, index-aligned.
        max_n: highest n-gram order.
        smoothing: "none" (any zero precision gives 0) or "add_epsilon".

    Raises:
        ValueError: on an empty corpus, mismatched lengths, or an unknown
            smoothing name.
    """
    if len(candidates) != len(references):
        raise ValueError("candidates and references must have equal length")
    if not candidates:
        raise ValueError("empty corpus")
    if smoothing not in ("none", "add_epsilon"):
        raise ValueError(f"unknown smoothing {smoothing!r}")
    if max_n < 1:
        raise ValueError("max_n must be >= 1")
    if sentence_level:
        scores = [
            _bleu_from_stats(*_corpus_ngram_stats([cand], [ref], max_n),
                             max_n=max_n, smoothing=smoothing)
            for cand, ref in zip(candidates, references)
        ]
        return sum(scores) / len(scores)
    stats = _corpus_ngram_stats(candidates, references, max_n)
    return _bleu_from_stats(*stats, max_n=max_n, smoothing=smoothing)


class RougeScore(NamedTuple):
    precision: float
    recall: float
    f1: float


def _token_ids(cand: Sequence[str], ref: Sequence[str]) -> tuple[list[int], list[int]]:
    vocab: dict[str, int] = {}
    a = [vocab.setdefault(t, len(vocab)) for t in cand]
    b = [vocab.setdefault(t, len(vocab)) for t in ref]
    return a, b


def lcs_length(cand: Sequence[str], ref: Sequence[str]) -> int:
    a, b = _token_ids(cand, ref)
    return int(_kernels.lcs_len(a, b))


def rouge_l(candidate: Sequence[str], reference: Sequence[str]) -> RougeScore:
    """Longest-common-subsequence precision/recall/F1 (beta = 1).

    Two empty sequences score 1.0 by convention; exactly one empty scores 0.
    Symmetric in its arguments up to swapping precision and recall.
    """
    if not candidate and not reference:
        return RougeScore(1.0, 1.0, 1.0)
    if not candidate or not reference:
        return RougeScore(0.0, 0.0, 0.0)
    lcs = lcs_length(candidate, reference)
    precision = lcs / len(candidate)
    recall = lcs / len(reference)
    if lcs == 0:
        return RougeScore(0.0, 0.0, 0.0)
    f1 = 2.0 * precision * recall / (precision + recall)
    return RougeScore(precision, recall, f1)


def rouge_l_corpus(
    candidates: Sequence[Sequence[str]],
    references: Sequence[Sequence[str]],
) -> float:
    """Unweighted mean of per-pair F1, summed in index order."""
    if len(candidates) != len(references):
        raise ValueError("candidates and references must have equal length")
    if not candidates:
        raise ValueError("empty corpus")
    total = 0.0
    for cand, ref in zip(candidates, references):
        total += rouge_l(cand, ref).f1
    return total / len(candidates)
