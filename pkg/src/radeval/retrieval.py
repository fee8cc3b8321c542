"""Zero-shot report-to-report retrieval protocol and ranking metrics.

A labeled corpus of report embeddings is split per seed into queries and a
candidate pool; candidates are ranked by cosine similarity and scored by
P@k, AP, and nDCG@k, where relevance means sharing at least one label and
nDCG gain is the raw shared-label count. Results aggregate to mean and
sample standard deviation across seeds.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from radeval.model import EmbeddingSet, LabelVector, ReportEmbedding, ReportKey
from radeval.rng import substream

QUERY_SAMPLING = ("uniform", "per_label")
METRIC_FAMILIES = ("precision", "map", "ndcg")


@dataclass(frozen=True)
class LabeledCorpusItem:
    key: ReportKey
    embedding: ReportEmbedding
    labels: frozenset[str]

    def __post_init__(self):
        if not self.labels:
            raise ValueError(f"item {self.key} has an empty label set")
        if not np.any(self.embedding.vector):
            raise ValueError(f"item {self.key} has a zero embedding")


def labeled_items_from(
    embeddings: EmbeddingSet,
    label_vectors: Iterable[LabelVector],
    uncertain_policy: str = "as_negative",
) -> tuple[list[LabeledCorpusItem], list[str]]:
    """Join report embeddings with positive label names.

    Returns the usable items plus a skip list (missing embedding, no
    positive labels, zero vector) for the audit section.
    """
    if embeddings.kind != "report":
        raise ValueError("retrieval needs report-level embeddings")
    skipped: list[str] = []
    items: list[LabeledCorpusItem] = []
    for vec in label_vectors:
        name = f"{vec.key.study_id}/{vec.key.system_id}"
        record = embeddings.records.get(vec.key)
        if record is None:
            skipped.append(f"{name}: no embedding")
            continue
        positive = {
            label for label, state in vec.labels.items()
            if state == "positive" or (state == "uncertain"
                                       and uncertain_policy == "as_positive")
        }
        if not positive:
            skipped.append(f"{name}: no positive labels")
            continue
        if not np.any(record.vector):
            skipped.append(f"{name}: zero embedding")
            continue
        items.append(LabeledCorpusItem(
            key=vec.key, embedding=record, labels=frozenset(positive)))
    return items, skipped


def rank(query: LabeledCorpusItem,
         pool: Sequence[LabeledCorpusItem]) -> list[LabeledCorpusItem]:
    """Pool ordered by descending cosine to the query; ties by ascending key."""
    if not pool:
        raise ValueError("empty pool")
    q = query.embedding.vector.astype(np.float64)
    q = q / np.linalg.norm(q)
    matrix = np.stack([item.embedding.vector for item in pool]).astype(np.float64)
    if matrix.shape[1] != q.shape[0]:
        raise ValueError(
            f"dim mismatch: query {q.shape[0]}, pool {matrix.shape[1]}")
    norms = np.linalg.norm(matrix, axis=1)
    sims = matrix @ q / norms
    order = sorted(range(len(pool)), key=lambda i: (-sims[i], pool[i].key))
    return [pool[i] for i in order]


def precision_at_k(relevance: Sequence[bool], k: int, divide_by_k: bool = False) -> float:
    """Fraction of the first k ranked items that are relevant.

    When the pool is shorter than k the denominator is the pool size;
    ``divide_by_k=True`` keeps k as the denominator instead.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    top = list(relevance[:k])
    if not top:
        raise ValueError("empty ranking")
    denom = k if divide_by_k else len(top)
    return sum(1 for r in top if r) / denom


def average_precision(relevance: Sequence[bool]) -> float:
    """Mean of precision at each relevant rank; stops at the last relevant one.

    Raises:
        ValueError: no relevant item in the ranking.
    """
    precisions = []
    seen = 0
    for rank_1based, rel in enumerate(relevance, start=1):
        if rel:
            seen += 1
            precisions.append(seen / rank_1based)
    if not precisions:
        raise ValueError("no relevant items")
    return sum(precisions) / len(precisions)


def ndcg_at_k(gains: Sequence[float], k: int) -> float:
    """DCG@k over raw gains with 1/log2(rank+1) discount, over ideal DCG@k.

    Raises:
        ValueError: k < 1, or every gain is zero.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    values = np.asarray(gains, dtype=np.float64)
    if values.size == 0 or not np.any(values > 0):
        raise ValueError("no positive gains")
    discounts = 1.0 / np.log2(np.arange(2, min(k, values.size) + 2))
    dcg = float(values[:k] @ discounts)
    ideal = np.sort(values)[::-1]
    idcg = float(ideal[:k] @ discounts)
    return dcg / idcg


@dataclass(frozen=True)
class RetrievalRun:
    """One seed's frozen split and rankings, for determinism checks."""

    seed: int
    queries: tuple[ReportKey, ...]
    pool: tuple[ReportKey, ...]
    rankings: tuple[tuple[ReportKey, ...], ...]


@dataclass(frozen=True)
class RetrievalReport:
    metrics: Mapping[str, tuple[float, float]]  # name -> (mean, sample std)
    per_seed: Mapping[str, tuple[float, ...]]
    excluded: Mapping[str, tuple[str, ...]]  # metric family -> query names
    runs: tuple[RetrievalRun, ...] = field(repr=False, default=())


def _sample_queries(items: Sequence[LabeledCorpusItem], n_queries: int,
                    sampling: str, rng: np.random.Generator) -> list[int]:
    if sampling == "uniform":
        return sorted(rng.choice(len(items), size=n_queries, replace=False).tolist())
    # Round-robin over labels: shuffle each label's member list, then take
    # one per label in sorted label order until enough distinct items.
    by_label: dict[str, list[int]] = {}
    for i, item in enumerate(items):
        for label in sorted(item.labels):
            by_label.setdefault(label, []).append(i)
    queues = {}
    for label in sorted(by_label):
        members = np.array(by_label[label])
        rng.shuffle(members)
        queues[label] = list(members.tolist())
    chosen: list[int] = []
    taken: set[int] = set()
    while len(chosen) < n_queries:
        progressed = False
        for label in sorted(queues):
            queue = queues[label]
            while queue:
                i = queue.pop()
                if i not in taken:
                    chosen.append(i)
                    taken.add(i)
                    progressed = True
                    break
            if len(chosen) == n_queries:
                break
        if not progressed:
            raise ValueError(
                f"corpus has only {len(taken)} distinct labeled items; "
                f"need {n_queries} queries")
    return sorted(chosen)


def run_protocol(
    corpus: Sequence[LabeledCorpusItem],
    seeds: Sequence[int],
    n_queries: int = 10,
    max_pos_per_label: int = 200,
    ks: Sequence[int] = (5, 10, 50, 100),
    metrics: Sequence[str] = METRIC_FAMILIES,
    query_sampling: str = "uniform",
    restrict_label: str | None = None,
    divide_by_k: bool = False,
) -> RetrievalReport:
    """Repeat the query/pool split per seed and aggregate ranking metrics.

    Per seed: queries are drawn without replacement, the pool draws up to
    ``max_pos_per_label`` remaining items per label (all labels mixed;
    ``restrict_label`` narrows to one), every query ranks the whole pool,
    and each metric averages over its scorable queries. Queries with no
    relevant item (mAP) or no positive gain (nDCG) are excluded and listed.

    Raises:
        ValueError: corpus too small for the split, unknown metric/sampling
            names, or a metric with no scorable query in some seed.
    """
    for name in metrics:
        if name not in METRIC_FAMILIES:
            raise ValueError(f"unknown metric family {name!r}")
    if query_sampling not in QUERY_SAMPLING:
        raise ValueError(f"unknown query_sampling {query_sampling!r}")
    if not seeds:
        raise ValueError("need at least one seed")
    if len(set(seeds)) != len(seeds):
        raise ValueError("seeds must be distinct")
    if n_queries < 1 or max_pos_per_label < 1:
        raise ValueError("n_queries and max_pos_per_label must be >= 1")
    if any(k < 1 for k in ks):
        raise ValueError("every k must be >= 1")

    items = sorted(corpus, key=lambda item: item.key)
    if restrict_label is not None:
        items = [i for i in items if restrict_label in i.labels]
    if len(items) < n_queries + 1:
        raise ValueError(
            f"corpus has {len(items)} usable items; "
            f"need at least {n_queries + 1} (queries + one candidate)")

    column_names: list[str] = []
    if "precision" in metrics:
        column_names += [f"P@{k}" for k in ks]
    if "map" in metrics:
        column_names.append("mAP")
    if "ndcg" in metrics:
        column_names += [f"nDCG@{k}" for k in ks]

    per_seed: dict[str, list[float]] = {name: [] for name in column_names}
    excluded: dict[str, list[str]] = {"map": [], "ndcg": []}
    runs: list[RetrievalRun] = []

    for seed in seeds:
        rng = substream(seed, "retrieval")
        query_idx = _sample_queries(items, n_queries, query_sampling, rng)
        query_set = set(query_idx)
        remainder = [i for i in range(len(items)) if i not in query_set]

        labels = sorted({label for i in remainder for label in items[i].labels})
        pool_idx: dict[int, None] = {}
        for label in labels:
            members = [i for i in remainder if label in items[i].labels]
            if len(members) > max_pos_per_label:
                pick = rng.choice(len(members), size=max_pos_per_label, replace=False)
                members = [members[j] for j in sorted(pick.tolist())]
            for i in members:
                pool_idx[i] = None
        pool = [items[i] for i in sorted(pool_idx)]
        if not pool:
            raise ValueError("empty candidate pool after sampling")

        rankings = []
        per_query: dict[str, list[float]] = {name: [] for name in column_names}
        for qi in query_idx:
            query = items[qi]
            ranked = rank(query, pool)
            rankings.append(tuple(item.key for item in ranked))
            relevance = [bool(query.labels & item.labels) for item in ranked]
            gains = [float(len(query.labels & item.labels)) for item in ranked]
            qname = f"{query.key.study_id}/{query.key.system_id}@seed{seed}"
            if "precision" in metrics:
                for k in ks:
                    per_query[f"P@{k}"].append(
                        precision_at_k(relevance, k, divide_by_k=divide_by_k))
            if "map" in metrics:
                if any(relevance):
                    per_query["mAP"].append(average_precision(relevance))
                else:
                    excluded["map"].append(qname)
            if "ndcg" in metrics:
                if any(g > 0 for g in gains):
                    for k in ks:
                        per_query[f"nDCG@{k}"].append(ndcg_at_k(gains, k))
                else:
                    excluded["ndcg"].append(qname)

        for name in column_names:
            values = per_query[name]
            if not values:
                raise ValueError(f"no scorable queries for {name} at seed {seed}")
            per_seed[name].append(sum(values) / len(values))

        runs.append(RetrievalRun(
            seed=seed,
            queries=tuple(items[i].key for i in query_idx),
            pool=tuple(item.key for item in pool),
            rankings=tuple(rankings),
        ))

    summary = {}
    for name in column_names:
        values = np.asarray(per_seed[name], dtype=np.float64)
        std = float(np.std(values, ddof=1)) if values.size > 1 else 0.0
        summary[name] = (float(values.mean()), std)

    return RetrievalReport(
        metrics=summary,
        per_seed={name: tuple(vals) for name, vals in per_seed.items()},
        excluded={name: tuple(vals) for name, vals in excluded.items()},
        runs=tuple(runs),
    )
