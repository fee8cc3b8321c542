"""Embedding-based similarity scores.

Token-level greedy matching over externally produced embedding sidecars,
plus report-level cosine similarity. Embeddings arrive as float32 payloads;
all arithmetic here happens in float64 after row normalization, so outputs
are scale-invariant per row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from radeval.model import ReportEmbedding, TokenEmbeddingSet


@dataclass(frozen=True)
class SimilarityConfig:
    """Knobs that change reported values and must be pinned per run."""

    idf_weighting: bool = False
    rescale_baseline: float | None = None
    clamp_negative: bool = False

    def __post_init__(self):
        b = self.rescale_baseline
        if b is not None and not (0.0 <= b < 1.0):
            raise ValueError(f"rescale_baseline must be in [0, 1), got {b}")


@dataclass(frozen=True)
class IdfWeights:
    """Smoothed inverse document frequencies over a reference corpus.

    Tokens never seen in the corpus get the df = 0 weight.
    """

    weights: Mapping[str, float]
    unseen: float

    def weight(self, token: str) -> float:
        return self.weights.get(token, self.unseen)


def compute_idf(references: Iterable[Sequence[str]]) -> IdfWeights:
    """idf(t) = log((N + 1) / (df(t) + 1)) over the reference corpus."""
    df: dict[str, int] = {}
    n_docs = 0
    for tokens in references:
        n_docs += 1
        for token in set(tokens):
            df[token] = df.get(token, 0) + 1
    weights = {t: math.log((n_docs + 1) / (c + 1)) for t, c in df.items()}
    return IdfWeights(weights=weights, unseen=math.log(n_docs + 1))


class BertScoreResult(NamedTuple):
    precision: float
    recall: float
    f1: float


def _normalized_rows(emb: TokenEmbeddingSet) -> np.ndarray:
    if len(emb.tokens) == 0 or emb.vectors.shape[0] == 0:
        raise ValueError("no tokens")
    if emb.vectors.shape[0] != len(emb.tokens):
        raise ValueError(
            f"{emb.vectors.shape[0]} embedding rows for {len(emb.tokens)} tokens")
    rows = emb.vectors.astype(np.float64)
    norms = np.linalg.norm(rows, axis=1)
    if np.any(norms == 0.0):
        raise ValueError("degenerate embedding")
    return rows / norms[:, None]


def _token_weights(tokens: Sequence[str], cfg: SimilarityConfig,
                   idf: IdfWeights | Mapping[str, float] | None) -> np.ndarray:
    n = len(tokens)
    if not cfg.idf_weighting:
        return np.full(n, 1.0 / n)
    if idf is None:
        raise ValueError("idf weighting enabled but no idf map provided")
    if isinstance(idf, IdfWeights):
        raw = np.array([idf.weight(t) for t in tokens], dtype=np.float64)
    else:
        raw = np.array([float(idf.get(t, 0.0)) for t in tokens], dtype=np.float64)
    total = raw.sum()
    if total <= 0.0:
        # All-zero weights would be a 0/0 mean; fall back to uniform.
        return np.full(n, 1.0 / n)
    return raw / total


def _rescale(value: float, cfg: SimilarityConfig) -> float:
    if cfg.rescale_baseline is not None:
        value = (value - cfg.rescale_baseline) / (1.0 - cfg.rescale_baseline)
    if cfg.clamp_negative:
        value = min(max(value, 0.0), 1.0)
    return value


def bertscore(
    cand: TokenEmbeddingSet,
    ref: TokenEmbeddingSet,
    cfg: SimilarityConfig = SimilarityConfig(),
    idf: IdfWeights | Mapping[str, float] | None = None,
    matching: str = "greedy",
) -> BertScoreResult:
    """Token-embedding precision/recall/F1 between one candidate and one reference.

    Recall is the weighted mean, over reference tokens, of each token's best
    cosine against the candidate tokens; precision mirrors it over candidate
    tokens. ``matching="sum"`` replaces the per-token best with the mean
    cosine against the whole other side. Baseline rescaling and clamping
    apply to all three outputs, in that order.

    Raises:
        ValueError: empty token set, dim mismatch, zero rows, or idf
            weighting enabled without a map.
    """
    if matching not in ("greedy", "sum"):
        raise ValueError(f"matching must be 'greedy' or 'sum', got {matching!r}")
    cand_rows = _normalized_rows(cand)
    ref_rows = _normalized_rows(ref)
    if cand_rows.shape[1] != ref_rows.shape[1]:
        raise ValueError(
            f"dim mismatch: candidate {cand_rows.shape[1]}, reference {ref_rows.shape[1]}")

    similarity = cand_rows @ ref_rows.T
    if matching == "greedy":
        per_cand = similarity.max(axis=1)
        per_ref = similarity.max(axis=0)
    else:
        per_cand = similarity.mean(axis=1)
        per_ref = similarity.mean(axis=0)

    precision = float(_token_weights(cand.tokens, cfg, idf) @ per_cand)
    recall = float(_token_weights(ref.tokens, cfg, idf) @ per_ref)
    denom = precision + recall
    f1 = 2.0 * precision * recall / denom if denom > 0 else 0.0
    return BertScoreResult(
        precision=_rescale(precision, cfg),
        recall=_rescale(recall, cfg),
        f1=_rescale(f1, cfg),
    )


def report_cosine(cand: ReportEmbedding, ref: ReportEmbedding) -> float:
    """Plain cosine similarity in [-1, 1]; the sign is kept."""
    if cand.dim != ref.dim:
        raise ValueError(f"dim mismatch: candidate {cand.dim}, reference {ref.dim}")
    a = cand.vector.astype(np.float64)
    b = ref.vector.astype(np.float64)
    norm_a = np.linalg.norm(a)
    norm_b = np.linalg.norm(b)
    if norm_a == 0.0 or norm_b == 0.0:
        raise ValueError("degenerate embedding")
    value = float(a @ b / (norm_a * norm_b))
    return float(min(max(value, -1.0), 1.0))
