"""Clinically oriented scores over structured sidecar artifacts.

Label-set F1 over labeler outputs, entity/relation graph overlap, temporal
keyword F1 over raw text, and linear composites of other columns. All
scoring here is set arithmetic over identities; no models run in-process.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Mapping, Sequence

from radeval.errors import ConfigError
from radeval.metrics.lexical import tokenize
from radeval.model import (
    CHEXPERT5,
    DIRECTIONS,
    EntityGraph,
    LabelVector,
    LABEL_SCHEMAS,
    RowKey,
    ScoreMatrix,
)

UNCERTAIN_POLICIES = ("as_positive", "as_negative")
LABEL_AVERAGES = ("micro", "macro", "example")
GRAPH_VARIANTS = ("avg_er", "entity_match", "entity_with_relation")
EMPTY_POLICIES = ("one", "skip")


def _binary(state: str, uncertain_policy: str) -> int:
    if state == "positive":
        return 1
    if state == "uncertain":
        return 1 if uncertain_policy == "as_positive" else 0
    return 0  # negative and blank


def _pair_counts(cand: LabelVector, ref: LabelVector, names: Iterable[str],
                 uncertain_policy: str) -> tuple[int, int, int]:
    tp = fp = fn = 0
    for name in names:
        c = _binary(cand.labels.get(name, "blank"), uncertain_policy)
        r = _binary(ref.labels.get(name, "blank"), uncertain_policy)
        if c and r:
            tp += 1
        elif c:
            fp += 1
        elif r:
            fn += 1
    return tp, fp, fn


def _f1_from_counts(tp: int, fp: int, fn: int) -> float:
    return 2.0 * tp / (2 * tp + fp + fn)


def _check_schema(vectors: Iterable[LabelVector], schema_id: str) -> None:
    # chexpert5 is scored by restricting chexpert14 vectors to its subset.
    allowed = {schema_id}
    if schema_id == "chexpert5":
        allowed.add("chexpert14")
    for vec in vectors:
        if vec.schema_id not in allowed:
            raise ValueError(
                f"schema mismatch: vector for {vec.key.study_id}/{vec.key.system_id} "
                f"has schema {vec.schema_id}, expected {sorted(allowed)}")


def _label_universe(cands: Sequence[LabelVector], refs: Sequence[LabelVector],
                    schema_id: str) -> tuple[str, ...]:
    fixed, _ = LABEL_SCHEMAS[schema_id]
    if schema_id == "chexpert5":
        return CHEXPERT5
    if fixed is not None:
        return fixed
    names: set[str] = set()
    for vec in list(cands) + list(refs):
        names.update(vec.labels)
    return tuple(sorted(names))


def label_f1(
    cands: Sequence[LabelVector],
    refs: Sequence[LabelVector],
    schema_id: str,
    uncertain_policy: str = "as_negative",
    average: str = "micro",
) -> float:
    """F1 over binarized label presence, index-aligned candidate/reference lists.

    positive maps to 1; negative and blank to 0; uncertain follows the
    policy. micro pools TP/FP/FN over every (report, label) cell; macro
    averages per-label F1 (a label positive nowhere counts 1.0); example
    averages per-report F1 (a report positive nowhere counts 1.0).

    Raises:
        ValueError: empty or misaligned corpus, schema mismatch, unknown
            policy/average, or micro with no positive labels anywhere.
    """
    if uncertain_policy not in UNCERTAIN_POLICIES:
        raise ValueError(f"unknown uncertain_policy {uncertain_policy!r}")
    if average not in LABEL_AVERAGES:
        raise ValueError(f"unknown average {average!r}")
    if schema_id not in LABEL_SCHEMAS:
        raise ValueError(f"unknown schema_id {schema_id!r}")
    if len(cands) != len(refs):
        raise ValueError("candidate and reference lists must have equal length")
    if not cands:
        raise ValueError("empty corpus")
    _check_schema(cands, schema_id)
    _check_schema(refs, schema_id)
    names = _label_universe(cands, refs, schema_id)

    if average == "micro":
        tp = fp = fn = 0
        for cand, ref in zip(cands, refs):
            dtp, dfp, dfn = _pair_counts(cand, ref, names, uncertain_policy)
            tp += dtp
            fp += dfp
            fn += dfn
        if tp + fp + fn == 0:
            raise ValueError("no positive labels")
        return _f1_from_counts(tp, fp, fn)

    if average == "macro":
        total = 0.0
        for name in names:
            tp = fp = fn = 0
            for cand, ref in zip(cands, refs):
                dtp, dfp, dfn = _pair_counts(cand, ref, (name,), uncertain_policy)
                tp += dtp
                fp += dfp
                fn += dfn
            total += 1.0 if tp + fp + fn == 0 else _f1_from_counts(tp, fp, fn)
        return total / len(names)

    total = 0.0
    for cand, ref in zip(cands, refs):
        tp, fp, fn = _pair_counts(cand, ref, names, uncertain_policy)
        total += 1.0 if tp + fp + fn == 0 else _f1_from_counts(tp, fp, fn)
    return total / len(cands)


def _entity_identity(entity) -> tuple[str, str]:
    return (" ".join(entity.token_span).lower(), entity.type)


def _graph_sets(graph: EntityGraph) -> tuple[set, set]:
    by_id = {e.entity_id: _entity_identity(e) for e in graph.entities}
    entities = set(by_id.values())
    relations = {
        (by_id[r.head_id], by_id[r.tail_id], r.relation_type) for r in graph.relations
    }
    return entities, relations


def _set_f1(a: set, b: set) -> float:
    if not a and not b:
        return 1.0
    if not a or not b:
        return 0.0
    return 2.0 * len(a & b) / (len(a) + len(b))


def graph_f1(cand: EntityGraph, ref: EntityGraph, variant: str = "avg_er") -> float:
    """Entity/relation set overlap between two report graphs.

    Entity identity is (lowercased joined span, type); relation identity is
    (head identity, tail identity, relation type). Duplicates collapse (set
    semantics). avg_er is the mean of separate entity and relation F1s.
    entity_with_relation only credits a shared entity when it is isolated in
    both graphs or at least one of its incident relations is shared too.
    """
    if variant not in GRAPH_VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    cand_entities, cand_relations = _graph_sets(cand)
    ref_entities, ref_relations = _graph_sets(ref)

    if variant == "avg_er":
        return 0.5 * (_set_f1(cand_entities, ref_entities)
                      + _set_f1(cand_relations, ref_relations))
    if variant == "entity_match":
        return _set_f1(cand_entities, ref_entities)

    if not cand_entities and not ref_entities:
        return 1.0
    if not cand_entities or not ref_entities:
        return 0.0

    def incident(relations: set, identity) -> set:
        return {r for r in relations if r[0] == identity or r[1] == identity}

    matched = 0
    for identity in cand_entities & ref_entities:
        in_cand = incident(cand_relations, identity)
        in_ref = incident(ref_relations, identity)
        if (not in_cand and not in_ref) or (in_cand & in_ref):
            matched += 1
    precision = matched / len(cand_entities)
    recall = matched / len(ref_entities)
    if matched == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class TemporalLexicon:
    """Surface form -> canonical change/stability key."""

    entries: Mapping[str, str]

    def __post_init__(self):
        for surface in self.entries:
            if surface != surface.lower():
                raise ValueError(f"surface form {surface!r} must be lowercase")

    def extract(self, tokens: Iterable[str]) -> frozenset[str]:
        return frozenset(self.entries[t] for t in tokens if t in self.entries)


def load_temporal_lexicon(path: str | None = None) -> TemporalLexicon:
    """Load a lexicon file ({canonical key: [surface forms]}); default is bundled."""
    if path is None:
        text = resources.files("radeval").joinpath("data/temporal_lexicon.json").read_text("utf-8")
    else:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    groups = json.loads(text)
    entries: dict[str, str] = {}
    for canonical, surfaces in groups.items():
        for surface in surfaces:
            if surface in entries:
                raise ValueError(f"surface form {surface!r} appears under two keys")
            entries[surface] = canonical
    return TemporalLexicon(entries=entries)


def temporal_entity_f1(
    cand_text: str,
    ref_text: str,
    lexicon: TemporalLexicon,
    empty_policy: str = "one",
) -> float | None:
    """F1 between the canonical temporal-key sets found in the two texts.

    When neither text contains a temporal term: 1.0 under policy "one",
    None under policy "skip" (the pair drops out of the corpus mean).
    """
    if empty_policy not in EMPTY_POLICIES:
        raise ValueError(f"unknown empty_policy {empty_policy!r}")
    cand_keys = lexicon.extract(tokenize(cand_text))
    ref_keys = lexicon.extract(tokenize(ref_text))
    if not cand_keys and not ref_keys:
        return 1.0 if empty_policy == "one" else None
    return _set_f1(cand_keys, ref_keys)


def temporal_f1_corpus(
    cand_texts: Sequence[str],
    ref_texts: Sequence[str],
    lexicon: TemporalLexicon,
    empty_policy: str = "one",
) -> float:
    if len(cand_texts) != len(ref_texts):
        raise ValueError("candidate and reference lists must have equal length")
    if not cand_texts:
        raise ValueError("empty corpus")
    scores = []
    for cand, ref in zip(cand_texts, ref_texts):
        value = temporal_entity_f1(cand, ref, lexicon, empty_policy)
        if value is not None:
            scores.append(value)
    if not scores:
        raise ValueError("no scorable pairs (all excluded by empty_policy=skip)")
    return sum(scores) / len(scores)


@dataclass(frozen=True)
class CompositeSpec:
    """Linear combination of existing ScoreMatrix columns."""

    weights: Mapping[str, float]
    bias: float = 0.0
    direction: str = "higher_better"

    def __post_init__(self):
        if not self.weights:
            raise ValueError("weights must be non-empty")
        if self.direction not in DIRECTIONS:
            raise ValueError(f"direction must be one of {DIRECTIONS}")


def load_composite_spec(path: str, known_metrics: Iterable[str] | None = None) -> CompositeSpec:
    """Parse a composite spec file; unknown metric names fail here, not mid-run."""
    with open(path, "r", encoding="utf-8") as handle:
        raw = json.load(handle)
    weights = raw.get("weights")
    if not isinstance(weights, dict) or not weights:
        raise ConfigError(f"{path}: composite spec needs a non-empty 'weights' object")
    try:
        spec = CompositeSpec(
            weights={str(k): float(v) for k, v in weights.items()},
            bias=float(raw.get("bias", 0.0)),
            direction=raw.get("direction", "higher_better"),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if known_metrics is not None:
        unknown = sorted(set(spec.weights) - set(known_metrics))
        if unknown:
            raise ConfigError(f"{path}: unknown metric names {unknown}")
    return spec


def composite(matrix: ScoreMatrix, spec: CompositeSpec) -> dict[RowKey, float | None]:
    """bias + sum of weighted columns per row; any missing input makes the row None."""
    missing_columns = sorted(set(spec.weights) - set(matrix.columns))
    if missing_columns:
        raise ValueError(f"composite references absent columns {missing_columns}")
    out: dict[RowKey, float | None] = {}
    for key in matrix.row_keys:
        value = spec.bias
        for name, weight in spec.weights.items():
            cell = matrix.get(key, name)
            if cell is None:
                value = None
                break
            value += weight * cell
        out[key] = value
    return out
