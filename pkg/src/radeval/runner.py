"""Run configuration and command orchestration.

Loads a JSON config, reads the corpus and sidecar artifacts, computes
per-candidate and aggregate score matrices, and drives the agreement,
comparison, retrieval, and validation commands. Every command writes
results.json (lossless) and report.md (human) into the output directory.

Outputs embed the effective config for provenance, minus the output
directory and thread count: those choose where and how fast, not what, and
results must stay byte-identical across parallelism levels.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from radeval import io
from radeval.errors import ConfigError, RadEvalError
from radeval.metrics import clinical, lexical, semantic
from radeval.model import (
    CandidateReport,
    ErrorAnnotation,
    LABEL_SCHEMAS,
    REF_SYSTEM,
    ReportKey,
    RowKey,
    ScoreMatrix,
    Sidecars,
    Study,
    ValidationReport,
    validate_corpus,
)
from radeval import retrieval as retrieval_mod
from radeval import stats
from radeval.util import parallel_map, resolve_threads

KNOWN_METRICS = (
    "bleu",
    "rougeL",
    "bertscore",
    "radevalbertscore",
    "chexbert_sim",
    "chexbert_5",
    "chexbert_14",
    "srr_bert",
    "radgraph_simple",
    "radgraph_er",
    "radgraph_er_bar",
    "temporal_f1",
    "radcliq",
)

SIDECAR_ROLES = (
    "bertscore_tokens",
    "radevalbert_tokens",
    "chexbert_embeddings",
    "chexbert_labels",
    "srr_labels",
    "radgraph_graphs",
    "annotations",
    "retrieval_embeddings",
    "retrieval_labels",
)

#: metric -> sidecar role it cannot run without (None: texts suffice)
_REQUIRES: dict[str, str | None] = {
    "bleu": None,
    "rougeL": None,
    "bertscore": "bertscore_tokens",
    "radevalbertscore": "radevalbert_tokens",
    "chexbert_sim": "chexbert_embeddings",
    "chexbert_5": "chexbert_labels",
    "chexbert_14": "chexbert_labels",
    "srr_bert": "srr_labels",
    "radgraph_simple": "radgraph_graphs",
    "radgraph_er": "radgraph_graphs",
    "radgraph_er_bar": "radgraph_graphs",
    "temporal_f1": None,
    "radcliq": None,  # depends on its component columns instead
}

_GRAPH_VARIANT = {
    "radgraph_simple": "entity_match",
    "radgraph_er": "entity_with_relation",
    "radgraph_er_bar": "avg_er",
}

_LABEL_SCHEMA_FOR_ROLE = {"chexbert_labels": "chexpert14", "srr_labels": "srr55"}

_ALLOWED_OPTIONS: dict[str, set[str]] = {
    "bleu": {"max_n", "smoothing", "sentence_level"},
    "rougeL": set(),
    "bertscore": {"idf_weighting", "rescale_baseline", "clamp_negative", "matching"},
    "radevalbertscore": {"idf_weighting", "rescale_baseline", "clamp_negative", "matching"},
    "chexbert_sim": set(),
    "chexbert_5": {"uncertain_policy", "average"},
    "chexbert_14": {"uncertain_policy", "average"},
    "srr_bert": {"uncertain_policy", "average"},
    "radgraph_simple": set(),
    "radgraph_er": set(),
    "radgraph_er_bar": set(),
    "temporal_f1": {"empty_policy", "lexicon"},
    "radcliq": {"spec"},
}


class ValidationFailure(RadEvalError):
    """Raised when corpus validation blocks a command."""

    def __init__(self, report: ValidationReport):
        self.report = report
        super().__init__(f"{len(report.issues)} validation issue(s)")


@dataclass(frozen=True)
class RunConfig:
    studies: str
    candidates: str
    sidecars: Mapping[str, str] = field(default_factory=dict)
    metrics: tuple[str, ...] = KNOWN_METRICS
    metric_options: Mapping[str, Mapping[str, Any]] = field(default_factory=dict)
    retrieval_label_schema: str = "chexpert14"
    seed: int | None = None
    output_dir: str = "."
    threads: int | None = None

    def echo(self) -> dict:
        """Provenance copy embedded in outputs (what was computed, not where/how)."""
        return {
            "studies": self.studies,
            "candidates": self.candidates,
            "sidecars": dict(self.sidecars),
            "metrics": list(self.metrics),
            "metric_options": {k: dict(v) for k, v in self.metric_options.items()},
            "retrieval_label_schema": self.retrieval_label_schema,
            "seed": self.seed,
        }


_CONFIG_KEYS = {
    "studies", "candidates", "sidecars", "metrics", "metric_options",
    "retrieval_label_schema", "seed", "output_dir", "threads",
}


def load_config(path: str, overrides: Mapping[str, Any] | None = None) -> RunConfig:
    """Parse and validate a run config; CLI overrides win over file values."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            raw = json.load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    for key, value in (overrides or {}).items():
        if value is not None:
            raw[key] = value

    unknown = sorted(set(raw) - _CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys {unknown}")
    for required in ("studies", "candidates"):
        if not raw.get(required):
            raise ConfigError(f"config needs a '{required}' path")

    sidecars = raw.get("sidecars", {})
    if not isinstance(sidecars, dict):
        raise ConfigError("'sidecars' must be an object of role -> path")
    bad_roles = sorted(set(sidecars) - set(SIDECAR_ROLES))
    if bad_roles:
        raise ConfigError(f"unknown sidecar roles {bad_roles}; known: {list(SIDECAR_ROLES)}")

    metrics = tuple(dict.fromkeys(raw.get("metrics", KNOWN_METRICS)))
    bad_metrics = sorted(set(metrics) - set(KNOWN_METRICS))
    if bad_metrics:
        raise ConfigError(f"unknown metrics {bad_metrics}; known: {list(KNOWN_METRICS)}")

    options = raw.get("metric_options", {})
    if not isinstance(options, dict):
        raise ConfigError("'metric_options' must be an object")
    for metric, opts in options.items():
        if metric not in KNOWN_METRICS:
            raise ConfigError(f"metric_options for unknown metric {metric!r}")
        if not isinstance(opts, dict):
            raise ConfigError(f"metric_options[{metric!r}] must be an object")
        bad = sorted(set(opts) - _ALLOWED_OPTIONS[metric])
        if bad:
            raise ConfigError(
                f"unknown options {bad} for metric {metric!r}; "
                f"allowed: {sorted(_ALLOWED_OPTIONS[metric])}")

    schema = raw.get("retrieval_label_schema", "chexpert14")
    if schema not in LABEL_SCHEMAS:
        raise ConfigError(
            f"unknown retrieval_label_schema {schema!r}; known: {sorted(LABEL_SCHEMAS)}")
    seed = raw.get("seed")
    if seed is not None and not isinstance(seed, int):
        raise ConfigError("'seed' must be an integer")
    threads = raw.get("threads")
    if threads is not None and (not isinstance(threads, int) or threads < 1):
        raise ConfigError("'threads' must be a positive integer")

    config = RunConfig(
        studies=str(raw["studies"]),
        candidates=str(raw["candidates"]),
        sidecars={k: str(v) for k, v in sidecars.items()},
        metrics=metrics,
        metric_options={k: dict(v) for k, v in options.items()},
        retrieval_label_schema=str(schema),
        seed=seed,
        output_dir=str(raw.get("output_dir", ".")),
        threads=threads,
    )

    for label, file_path in [("studies", config.studies), ("candidates", config.candidates)] \
            + [(f"sidecars.{role}", p) for role, p in config.sidecars.items()]:
        if not os.path.isfile(file_path):
            raise ConfigError(f"{label}: file not found: {file_path}")
    return config


@dataclass
class Corpus:
    studies: list[Study]
    candidates: list[CandidateReport]
    sidecars: Sidecars
    annotations: list[ErrorAnnotation]

    @property
    def study_by_id(self) -> dict[str, Study]:
        return {s.study_id: s for s in self.studies}


def load_corpus(config: RunConfig) -> Corpus:
    studies = io.read_studies(config.studies)
    candidates = io.read_candidates(config.candidates)
    sidecars = Sidecars()
    annotations: list[ErrorAnnotation] = []
    for role, path in config.sidecars.items():
        if role in ("bertscore_tokens", "radevalbert_tokens"):
            sidecars.token_embeddings[role] = io.read_embeddings(path)
        elif role in ("chexbert_embeddings", "retrieval_embeddings"):
            sidecars.report_embeddings[role] = io.read_embeddings(path)
        elif role in ("chexbert_labels", "srr_labels"):
            sidecars.labels[role] = io.read_labels(path, _LABEL_SCHEMA_FOR_ROLE[role])
        elif role == "retrieval_labels":
            sidecars.labels[role] = io.read_labels(path, config.retrieval_label_schema)
        elif role == "radgraph_graphs":
            sidecars.graphs[role] = io.read_graphs(path)
        elif role == "annotations":
            annotations = io.read_annotations(path)
    return Corpus(studies=studies, candidates=candidates,
                  sidecars=sidecars, annotations=annotations)


def validate_or_raise(corpus: Corpus) -> None:
    report = validate_corpus(corpus.studies, corpus.candidates,
                             corpus.sidecars, corpus.annotations)
    if not report.ok:
        raise ValidationFailure(report)


def _default_composite_path() -> str:
    return str(resources.files("radeval").joinpath("data/radcliq_example.json"))


def _runnable_metrics(config: RunConfig, requested: Sequence[str],
                      audit: dict) -> list[str]:
    """Filter to metrics whose sidecars are configured; record skips."""
    runnable = []
    for metric in requested:
        role = _REQUIRES[metric]
        if role is not None and role not in config.sidecars:
            audit["skipped_metrics"][metric] = f"needs sidecar '{role}' (not configured)"
            continue
        runnable.append(metric)
    if "radcliq" in runnable:
        spec_path = config.metric_options.get("radcliq", {}).get(
            "spec", _default_composite_path())
        spec = clinical.load_composite_spec(spec_path, known_metrics=KNOWN_METRICS)
        missing = sorted(set(spec.weights) - set(runnable))
        if missing:
            runnable.remove("radcliq")
            audit["skipped_metrics"]["radcliq"] = (
                f"composite components {missing} are not being computed")
    return runnable


@dataclass
class _ScoringContext:
    """Shared per-run lookups: tokenized texts and keyed sidecar records."""

    corpus: Corpus
    threads: int
    rows: list[tuple[CandidateReport, Study]] = field(default_factory=list)
    cand_tokens: dict[ReportKey, list[str]] = field(default_factory=dict)
    ref_tokens: dict[str, list[str]] = field(default_factory=dict)

    def __post_init__(self):
        by_id = self.corpus.study_by_id
        for cand in self.corpus.candidates:
            study = by_id[cand.study_id]
            self.rows.append((cand, study))
            self.cand_tokens[cand.key] = lexical.tokenize(cand.text)
        for study in self.corpus.studies:
            self.ref_tokens[study.study_id] = lexical.tokenize(study.reference_text)

    def row_key(self, cand: CandidateReport, study: Study) -> RowKey:
        return RowKey(cand.study_id, cand.system_id, study.section)

    def row_name(self, cand: CandidateReport, study: Study) -> str:
        return f"{cand.study_id}/{cand.system_id}/{study.section}"


Cells = dict[RowKey, "float | None"]  # per-candidate column values, None = missing


def _cells_bleu(ctx: _ScoringContext, opts: Mapping[str, Any],
                missing: list[str]) -> Cells:
    max_n = int(opts.get("max_n", 4))
    smoothing = str(opts.get("smoothing", "none"))

    def one(pair) -> float:
        cand, study = pair
        return lexical.bleu([ctx.cand_tokens[cand.key]],
                            [ctx.ref_tokens[study.study_id]],
                            max_n=max_n, smoothing=smoothing)

    values = parallel_map(one, ctx.rows, ctx.threads)
    return {ctx.row_key(c, s): v for (c, s), v in zip(ctx.rows, values)}


def _cells_rouge(ctx: _ScoringContext, opts: Mapping[str, Any],
                 missing: list[str]) -> Cells:
    def one(pair) -> float:
        cand, study = pair
        return lexical.rouge_l(ctx.cand_tokens[cand.key],
                               ctx.ref_tokens[study.study_id]).f1

    values = parallel_map(one, ctx.rows, ctx.threads)
    return {ctx.row_key(c, s): v for (c, s), v in zip(ctx.rows, values)}


def _cells_token_similarity(ctx: _ScoringContext, role: str,
                            opts: Mapping[str, Any], missing: list[str]) -> Cells:
    emb = ctx.corpus.sidecars.token_embeddings[role]
    cfg = semantic.SimilarityConfig(
        idf_weighting=bool(opts.get("idf_weighting", False)),
        rescale_baseline=opts.get("rescale_baseline"),
        clamp_negative=bool(opts.get("clamp_negative", False)),
    )
    matching = str(opts.get("matching", "greedy"))
    idf = None
    if cfg.idf_weighting:
        ref_token_lists = [emb.records[key].tokens
                           for key in sorted(emb.records)
                           if key.system_id == REF_SYSTEM]
        idf = semantic.compute_idf(ref_token_lists)

    def one(pair) -> float | None:
        cand, study = pair
        cand_rec = emb.records.get(cand.key)
        ref_rec = emb.records.get(ReportKey(study.study_id, REF_SYSTEM))
        if cand_rec is None or ref_rec is None:
            missing.append(f"{ctx.row_name(cand, study)}: no embedding record")
            return None
        try:
            return semantic.bertscore(cand_rec, ref_rec, cfg, idf, matching).f1
        except ValueError as exc:
            missing.append(f"{ctx.row_name(cand, study)}: {exc}")
            return None

    values = parallel_map(one, ctx.rows, ctx.threads)
    return {ctx.row_key(c, s): v for (c, s), v in zip(ctx.rows, values)}


def _cells_report_cosine(ctx: _ScoringContext, opts: Mapping[str, Any],
                         missing: list[str]) -> Cells:
    emb = ctx.corpus.sidecars.report_embeddings["chexbert_embeddings"]

    def one(pair) -> float | None:
        cand, study = pair
        cand_rec = emb.records.get(cand.key)
        ref_rec = emb.records.get(ReportKey(study.study_id, REF_SYSTEM))
        if cand_rec is None or ref_rec is None:
            missing.append(f"{ctx.row_name(cand, study)}: no embedding record")
            return None
        try:
            return semantic.report_cosine(cand_rec, ref_rec)
        except ValueError as exc:
            missing.append(f"{ctx.row_name(cand, study)}: {exc}")
            return None

    values = parallel_map(one, ctx.rows, ctx.threads)
    return {ctx.row_key(c, s): v for (c, s), v in zip(ctx.rows, values)}


def _cells_labels(ctx: _ScoringContext, role: str, schema_id: str,
                  opts: Mapping[str, Any], missing: list[str]) -> Cells:
    by_key = {vec.key: vec for vec in ctx.corpus.sidecars.labels[role]}
    policy = str(opts.get("uncertain_policy", "as_negative"))

    out: Cells = {}
    for cand, study in ctx.rows:
        cand_vec = by_key.get(cand.key)
        ref_vec = by_key.get(ReportKey(study.study_id, REF_SYSTEM))
        if cand_vec is None or ref_vec is None:
            missing.append(f"{ctx.row_name(cand, study)}: no label record")
            out[ctx.row_key(cand, study)] = None
            continue
        # Per-candidate cells always use the per-report (example) score; the
        # configured average applies to the corpus aggregate.
        out[ctx.row_key(cand, study)] = clinical.label_f1(
            [cand_vec], [ref_vec], schema_id,
            uncertain_policy=policy, average="example")
    return out


def _cells_graphs(ctx: _ScoringContext, variant: str,
                  opts: Mapping[str, Any], missing: list[str]) -> Cells:
    by_key = {g.key: g for g in ctx.corpus.sidecars.graphs["radgraph_graphs"]}

    out: Cells = {}
    for cand, study in ctx.rows:
        cand_graph = by_key.get(cand.key)
        ref_graph = by_key.get(ReportKey(study.study_id, REF_SYSTEM))
        if cand_graph is None or ref_graph is None:
            missing.append(f"{ctx.row_name(cand, study)}: no graph record")
            out[ctx.row_key(cand, study)] = None
            continue
        out[ctx.row_key(cand, study)] = clinical.graph_f1(cand_graph, ref_graph, variant)
    return out


def _load_lexicon(opts: Mapping[str, Any]) -> clinical.TemporalLexicon:
    return clinical.load_temporal_lexicon(opts.get("lexicon"))


def _cells_temporal(ctx: _ScoringContext, opts: Mapping[str, Any],
                    missing: list[str]) -> Cells:
    lexicon = _load_lexicon(opts)
    policy = str(opts.get("empty_policy", "one"))

    out: Cells = {}
    for cand, study in ctx.rows:
        value = clinical.temporal_entity_f1(
            cand.text, study.reference_text, lexicon, empty_policy=policy)
        if value is None:
            missing.append(f"{ctx.row_name(cand, study)}: no temporal terms (policy skip)")
        out[ctx.row_key(cand, study)] = value
    return out


def _per_candidate_cells(ctx: _ScoringContext, metric: str,
                         opts: Mapping[str, Any], missing: list[str]) -> Cells:
    if metric == "bleu":
        return _cells_bleu(ctx, opts, missing)
    if metric == "rougeL":
        return _cells_rouge(ctx, opts, missing)
    if metric in ("bertscore", "radevalbertscore"):
        role = _REQUIRES[metric]
        return _cells_token_similarity(ctx, role, opts, missing)
    if metric == "chexbert_sim":
        return _cells_report_cosine(ctx, opts, missing)
    if metric in ("chexbert_5", "chexbert_14"):
        schema = "chexpert5" if metric == "chexbert_5" else "chexpert14"
        return _cells_labels(ctx, "chexbert_labels", schema, opts, missing)
    if metric == "srr_bert":
        return _cells_labels(ctx, "srr_labels", "srr55", opts, missing)
    if metric in _GRAPH_VARIANT:
        return _cells_graphs(ctx, _GRAPH_VARIANT[metric], opts, missing)
    if metric == "temporal_f1":
        return _cells_temporal(ctx, opts, missing)
    raise ValueError(f"no cell builder for metric {metric!r}")


def _mean_of_present(values: Iterable[float | None]) -> float | None:
    present = [v for v in values if v is not None]
    if not present:
        return None
    return sum(present) / len(present)


def _aggregate_value(metric: str, ctx: _ScoringContext,
                     group: list[tuple[CandidateReport, Study]],
                     cells: Cells, opts: Mapping[str, Any],
                     notes: list[str]) -> float | None:
    name = metric
    if metric == "bleu" and not opts.get("sentence_level", False):
        cands = [ctx.cand_tokens[c.key] for c, _ in group]
        refs = [ctx.ref_tokens[s.study_id] for _, s in group]
        return lexical.bleu(cands, refs,
                            max_n=int(opts.get("max_n", 4)),
                            smoothing=str(opts.get("smoothing", "none")))
    if metric in ("chexbert_5", "chexbert_14", "srr_bert"):
        role = _REQUIRES[metric]
        by_key = {vec.key: vec for vec in ctx.corpus.sidecars.labels[role]}
        pairs = [(by_key.get(c.key), by_key.get(ReportKey(s.study_id, REF_SYSTEM)))
                 for c, s in group]
        pairs = [(cv, rv) for cv, rv in pairs if cv is not None and rv is not None]
        if not pairs:
            return None
        schema = {"chexbert_5": "chexpert5", "chexbert_14": "chexpert14",
                  "srr_bert": "srr55"}[metric]
        try:
            return clinical.label_f1(
                [cv for cv, _ in pairs], [rv for _, rv in pairs], schema,
                uncertain_policy=str(opts.get("uncertain_policy", "as_negative")),
                average=str(opts.get("average", "micro")))
        except ValueError as exc:
            notes.append(f"{name}: aggregate undefined ({exc})")
            return None
    if metric == "temporal_f1":
        lexicon = _load_lexicon(opts)
        try:
            return clinical.temporal_f1_corpus(
                [c.text for c, _ in group],
                [s.reference_text for _, s in group],
                lexicon, empty_policy=str(opts.get("empty_policy", "one")))
        except ValueError as exc:
            notes.append(f"{name}: aggregate undefined ({exc})")
            return None
    # Mean of available per-candidate cells (rougeL and the similarity and
    # graph families; also bleu under sentence_level).
    return _mean_of_present(cells.get(ctx.row_key(c, s)) for c, s in group)


def score_matrices(corpus: Corpus, config: RunConfig,
                   metrics: Sequence[str] | None = None
                   ) -> tuple[ScoreMatrix, ScoreMatrix, dict]:
    """Per-candidate and per-(system, dataset, section) aggregate matrices."""
    audit: dict[str, Any] = {"skipped_metrics": {}, "missing_cells": {}, "notes": []}
    requested = list(metrics if metrics is not None else config.metrics)
    if "radcliq" in requested:
        # The composite needs its component columns; pull them in implicitly.
        spec_path = config.metric_options.get("radcliq", {}).get(
            "spec", _default_composite_path())
        component_spec = clinical.load_composite_spec(spec_path,
                                                      known_metrics=KNOWN_METRICS)
        for name in component_spec.weights:
            if name not in requested:
                requested.append(name)
    runnable = _runnable_metrics(config, requested, audit)
    threads = resolve_threads(config.threads)
    ctx = _ScoringContext(corpus=corpus, threads=threads)

    per_candidate = ScoreMatrix()
    for cand, study in ctx.rows:
        per_candidate.add_row(ctx.row_key(cand, study), dataset=study.source_dataset)

    spec = None
    plain = [m for m in runnable if m != "radcliq"]
    if "radcliq" in runnable:
        spec_path = config.metric_options.get("radcliq", {}).get(
            "spec", _default_composite_path())
        spec = clinical.load_composite_spec(spec_path, known_metrics=KNOWN_METRICS)
        if spec_path == _default_composite_path():
            audit["notes"].append(
                "radcliq uses the bundled illustrative composite spec; "
                "supply metric_options.radcliq.spec for fitted weights")

    cell_store: dict[str, Cells] = {}
    for metric in plain:
        missing: list[str] = []
        opts = config.metric_options.get(metric, {})
        cells = _per_candidate_cells(ctx, metric, opts, missing)
        cell_store[metric] = cells
        per_candidate.add_column(metric)
        for key, value in cells.items():
            per_candidate.set(key, metric, value)
        if missing:
            audit["missing_cells"][metric] = missing

    if spec is not None:
        per_candidate.add_column("radcliq", direction=spec.direction)
        for key, value in clinical.composite(per_candidate, spec).items():
            per_candidate.set(key, "radcliq", value)

    # Aggregates: one row per (system, dataset, section), study_id left empty.
    groups: dict[tuple[str, str, str], list[tuple[CandidateReport, Study]]] = {}
    for cand, study in ctx.rows:
        groups.setdefault(
            (study.source_dataset, study.section, cand.system_id), []).append((cand, study))

    aggregates = ScoreMatrix()
    for metric in plain:
        aggregates.add_column(metric)
    for dataset, section, system in sorted(groups):
        key = RowKey("", system, section)
        aggregates.add_row(key, dataset=dataset)
        group = groups[(dataset, section, system)]
        for metric in plain:
            opts = config.metric_options.get(metric, {})
            value = _aggregate_value(metric, ctx, group, cell_store[metric],
                                     opts, audit["notes"])
            aggregates.set(key, metric, value)
    if spec is not None:
        aggregates.add_column("radcliq", direction=spec.direction)
        for key, value in clinical.composite(aggregates, spec).items():
            aggregates.set(key, "radcliq", value)

    return per_candidate, aggregates, audit


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def _matrix_payload(matrix: ScoreMatrix) -> dict:
    rows = []
    for key in matrix.row_keys:
        rows.append({
            "study_id": key.study_id,
            "system_id": key.system_id,
            "section": key.section,
            "dataset": matrix.dataset(key),
            "cells": {c: matrix.get(key, c) for c in matrix.columns},
        })
    return {
        "columns": matrix.columns,
        "directions": {c: matrix.direction(c) for c in matrix.columns},
        "rows": rows,
    }


def cmd_score(config: RunConfig) -> dict:
    corpus = load_corpus(config)
    validate_or_raise(corpus)
    per_candidate, aggregates, audit = score_matrices(corpus, config)

    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    io.write_scores(per_candidate, out / "per_candidate.scores.jsonl")
    io.write_scores(aggregates, out / "aggregate.scores.jsonl")

    results = {
        "command": "score",
        "config": config.echo(),
        "results": {
            "aggregates": _matrix_payload(aggregates),
            "per_candidate_file": "per_candidate.scores.jsonl",
            "n_candidates": len(per_candidate),
        },
        "audit": audit,
    }
    _write_json(out / "results.json", results)

    lines = ["# Score run", ""]
    lines.append(io.render_scores_markdown(
        aggregates, heading="## Aggregates (scores x100)"))
    lines += _audit_markdown(audit)
    (out / "report.md").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return results


def _audit_markdown(audit: Mapping[str, Any]) -> list[str]:
    lines = ["", "## Audit", ""]
    skipped = audit.get("skipped_metrics", {})
    if skipped:
        lines.append("Skipped metrics:")
        for metric in sorted(skipped):
            lines.append(f"- {metric}: {skipped[metric]}")
    missing = audit.get("missing_cells", {})
    for metric in sorted(missing):
        lines.append(f"- {metric}: {len(missing[metric])} missing cell(s)")
    for note in audit.get("notes", []):
        lines.append(f"- note: {note}")
    if len(lines) == 3:
        lines.append("clean")
    return lines


def _paired_by_study(matrix: ScoreMatrix, metric: str, system_a: str, system_b: str,
                     audit: dict) -> tuple[list[float], list[float]]:
    scores: dict[tuple[str, str], dict[str, float]] = {}
    for key in matrix.row_keys:
        if key.system_id in (system_a, system_b):
            value = matrix.get(key, metric)
            if value is not None:
                scores.setdefault((key.study_id, key.section), {})[key.system_id] = value
    a: list[float] = []
    b: list[float] = []
    for study_key in scores:
        pair = scores[study_key]
        if system_a in pair and system_b in pair:
            a.append(pair[system_a])
            b.append(pair[system_b])
        else:
            audit["unpaired_studies"].append("/".join(study_key))
    return a, b


def cmd_compare(config: RunConfig, system_a: str, system_b: str, metric: str,
                iterations: int = 10000, resamples: int = 1000,
                level: float = 0.95) -> dict:
    if config.seed is None:
        raise ConfigError("compare is stochastic; a seed is required")
    if metric not in KNOWN_METRICS:
        raise ConfigError(f"unknown metric {metric!r}")
    corpus = load_corpus(config)
    validate_or_raise(corpus)

    audit: dict[str, Any] = {"unpaired_studies": []}
    per_candidate, _, score_audit = score_matrices(corpus, config, metrics=[metric])
    if metric not in per_candidate.columns:
        raise ConfigError(
            f"metric {metric!r} could not be computed: "
            f"{score_audit['skipped_metrics'].get(metric, 'unknown reason')}")
    audit.update(score_audit)

    a, b = _paired_by_study(per_candidate, metric, system_a, system_b, audit)
    if len(a) < 2:
        raise ValueError(
            f"need at least 2 studies scored for both systems, got {len(a)}")
    perm = stats.permutation_test(a, b, iterations=iterations, seed=config.seed)
    boot = stats.bootstrap_diff_ci(a, b, resamples=resamples, level=level,
                                   seed=config.seed)

    results = {
        "command": "compare",
        "config": config.echo(),
        "params": {
            "system_a": system_a, "system_b": system_b, "metric": metric,
            "iterations": iterations, "resamples": resamples, "level": level,
        },
        "results": {
            "n_pairs": len(a),
            "mean_a": sum(a) / len(a),
            "mean_b": sum(b) / len(b),
            "mean_diff": boot.mean_diff,
            "p_value": perm.p_value,
            "ci_low": boot.ci_low,
            "ci_high": boot.ci_high,
        },
        "audit": audit,
    }
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "results.json", results)

    r = results["results"]
    lines = [
        "# System comparison", "",
        f"Metric `{metric}`, {r['n_pairs']} paired studies.", "",
        f"| | {system_a} | {system_b} |",
        "|---|---|---|",
        f"| mean score | {io.render_cell(r['mean_a'])} | {io.render_cell(r['mean_b'])} |",
        "",
        f"Mean difference {r['mean_diff']:+.4f}, "
        f"95% bootstrap CI [{r['ci_low']:.4f}, {r['ci_high']:.4f}], "
        f"two-sided permutation p = {r['p_value']:.4f} "
        f"({iterations} sign-flip iterations).",
    ]
    lines += _audit_markdown(audit)
    (out / "report.md").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return results


def parse_endpoint(text: str) -> stats.Endpoint:
    """CLI endpoint syntax: kind[:category][@section]."""
    section = "all"
    body = text
    if "@" in body:
        body, section = body.rsplit("@", 1)
    try:
        if ":" in body:
            kind, category = body.split(":", 1)
            return stats.Endpoint(kind=kind, category=category, section=section)
        return stats.Endpoint(kind=body, section=section)
    except ValueError as exc:
        raise ConfigError(f"bad endpoint {text!r}: {exc}") from exc


def cmd_agree(config: RunConfig, endpoints: Sequence[stats.Endpoint],
              resamples: int = 1000, level: float = 0.95) -> dict:
    if config.seed is None:
        raise ConfigError("agree is stochastic; a seed is required")
    if "annotations" not in config.sidecars:
        raise ConfigError("agree needs the 'annotations' sidecar")
    corpus = load_corpus(config)
    validate_or_raise(corpus)
    if not corpus.annotations:
        raise ConfigError("annotation file holds no records")

    metrics = [m for m in config.metrics]
    per_candidate, _, audit = score_matrices(corpus, config, metrics=metrics)

    rows = []
    for endpoint in endpoints:
        for metric in per_candidate.columns:
            x_sign = 1.0
            matrix = per_candidate
            if per_candidate.direction(metric) == "lower_better":
                # Flip so "aligned" always means better metric, fewer errors.
                x_sign = -1.0
            sample, join_audit = stats.build_paired_sample(
                matrix, corpus.annotations, metric, endpoint)
            if x_sign < 0:
                sample = stats.PairedSample(
                    x=tuple(-v for v in sample.x), y=sample.y,
                    block_id=sample.block_id, stratum=sample.stratum)
            row: dict[str, Any] = {
                "endpoint": endpoint.label(),
                "metric": metric,
                "sign_flipped": x_sign < 0,
                "join": join_audit,
            }
            for statistic in ("pooled", "blocked"):
                try:
                    result = stats.block_bootstrap_ci(
                        sample, statistic=statistic, resamples=resamples,
                        level=level, seed=config.seed)
                    row[statistic] = {
                        "tau_b": result.tau_b,
                        "ci_low": result.ci_low,
                        "ci_high": result.ci_high,
                        "n": result.n,
                        "n_pairs": result.n_pairs,
                        "n_blocks": result.n_blocks,
                        "classification": result.classification,
                        "dropped_blocks": sorted(result.dropped_blocks),
                        "skipped_resamples": result.skipped_resamples,
                    }
                except ValueError as exc:
                    row[statistic] = {"undefined": str(exc)}
            rows.append(row)

    results = {
        "command": "agree",
        "config": config.echo(),
        "params": {
            "endpoints": [e.label() for e in endpoints],
            "resamples": resamples,
            "level": level,
        },
        "results": {"rows": rows},
        "audit": audit,
    }
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "results.json", results)
    (out / "report.md").write_text(_agree_markdown(results), encoding="utf-8")
    return results


def _agree_markdown(results: dict) -> str:
    lines = ["# Metric-expert agreement", "",
             "tau_b against expert error counts; more negative is better "
             "(higher metric, fewer errors).", ""]
    rows = results["results"]["rows"]
    endpoints = []
    for row in rows:
        if row["endpoint"] not in endpoints:
            endpoints.append(row["endpoint"])
    for endpoint in endpoints:
        lines.append(f"## endpoint {endpoint}")
        for statistic in ("pooled", "blocked"):
            lines += ["", f"### {statistic}", ""]
            lines.append("| metric | tau_b | 95% CI | scope | verdict |")
            lines.append("|---|---|---|---|---|")
            scored = []
            unscored = []
            for row in rows:
                if row["endpoint"] != endpoint:
                    continue
                cell = row[statistic]
                if "undefined" in cell:
                    unscored.append((row["metric"], cell["undefined"]))
                    continue
                scored.append((cell["tau_b"], row["metric"], cell))
            scored.sort(key=lambda item: (item[0], item[1]))
            for tau, metric, cell in scored:
                if statistic == "blocked":
                    scope = f"(blocks {cell['n_blocks']}, pairs {cell['n_pairs']})"
                else:
                    scope = f"(pairs {cell['n_pairs']:,}, n {cell['n']})"
                flip = " (sign flipped)" if _row_flagged(rows, endpoint, metric) else ""
                lines.append(
                    f"| {metric}{flip} | {tau:.3f} | "
                    f"[{cell['ci_low']:.3f}, {cell['ci_high']:.3f}] | "
                    f"{scope} | {cell['classification']} |")
            for metric, reason in unscored:
                lines.append(f"| {metric} | undefined | - | - | {reason} |")
        lines.append("")
    lines += _audit_markdown(results["audit"])
    return "\n".join(lines) + "\n"


def _row_flagged(rows: list[dict], endpoint: str, metric: str) -> bool:
    for row in rows:
        if row["endpoint"] == endpoint and row["metric"] == metric:
            return bool(row.get("sign_flipped"))
    return False


def cmd_retrieve(config: RunConfig, seeds: Sequence[int] | None = None,
                 n_seeds: int = 10, n_queries: int = 10,
                 max_pos_per_label: int = 200,
                 ks: Sequence[int] = (5, 10, 50, 100),
                 query_sampling: str = "uniform",
                 restrict_label: str | None = None,
                 divide_by_k: bool = False) -> dict:
    if config.seed is None and seeds is None:
        raise ConfigError("retrieve is stochastic; a seed is required")
    for role in ("retrieval_embeddings", "retrieval_labels"):
        if role not in config.sidecars:
            raise ConfigError(f"retrieve needs the '{role}' sidecar")
    corpus = load_corpus(config)
    validate_or_raise(corpus)

    if seeds is None:
        seeds = [config.seed + i for i in range(n_seeds)]
    emb = corpus.sidecars.report_embeddings["retrieval_embeddings"]
    items, skipped = retrieval_mod.labeled_items_from(
        emb, corpus.sidecars.labels["retrieval_labels"])
    report = retrieval_mod.run_protocol(
        items, seeds=list(seeds), n_queries=n_queries,
        max_pos_per_label=max_pos_per_label, ks=list(ks),
        query_sampling=query_sampling, restrict_label=restrict_label,
        divide_by_k=divide_by_k)

    run_digests = []
    for run in report.runs:
        digest = hashlib.sha256(
            json.dumps(run.rankings, sort_keys=True).encode("utf-8")).hexdigest()
        run_digests.append({
            "seed": run.seed,
            "n_queries": len(run.queries),
            "pool_size": len(run.pool),
            "rankings_sha256": digest,
        })

    results = {
        "command": "retrieve",
        "config": config.echo(),
        "params": {
            "seeds": list(seeds), "n_queries": n_queries,
            "max_pos_per_label": max_pos_per_label, "ks": list(ks),
            "query_sampling": query_sampling, "restrict_label": restrict_label,
            "divide_by_k": divide_by_k,
        },
        "results": {
            "metrics": {name: {"mean": mean, "std": std}
                        for name, (mean, std) in report.metrics.items()},
            "per_seed": {name: list(vals) for name, vals in report.per_seed.items()},
            "excluded_queries": {name: list(vals)
                                 for name, vals in report.excluded.items()},
            "runs": run_digests,
        },
        "audit": {"skipped_items": skipped},
    }
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "results.json", results)

    names = list(report.metrics)
    lines = ["# Retrieval protocol", "",
             f"{len(items)} labeled items, {len(seeds)} seeds, "
             f"{n_queries} queries per seed (mean ± std, x100).", "",
             "| " + " | ".join(names) + " |",
             "|" + "---|" * len(names)]
    cells = []
    for name in names:
        mean, std = report.metrics[name]
        cells.append(f"{mean * 100:.1f} ± {std * 100:.1f}")
    lines.append("| " + " | ".join(cells) + " |")
    if skipped:
        lines += ["", f"{len(skipped)} item(s) skipped; see results.json audit."]
    (out / "report.md").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return results


def cmd_validate(config: RunConfig) -> ValidationReport:
    corpus = load_corpus(config)
    return validate_corpus(corpus.studies, corpus.candidates,
                           corpus.sidecars, corpus.annotations)
