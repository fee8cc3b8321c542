"""Readers and writers for every on-disk format.

All text formats are line-delimited JSON (one object per line, UTF-8).
Embedding payloads are base64-encoded little-endian float32, row-major,
inside the JSON record, so a single file stays portable and diffable.
Every parse failure is raised as a located error (path, line, field).

Readers are streaming (one line in memory at a time) and order-preserving.
serialize followed by parse reproduces the input object exactly.
"""

from __future__ import annotations

import base64
import binascii
import json
from pathlib import Path
from typing import Any, Callable, Iterable, Iterator

import numpy as np

from radeval.errors import DuplicateKeyError, ParseError, SchemaError
from radeval.model import (
    CandidateReport,
    EmbeddingSet,
    EntityGraph,
    Entity,
    ErrorAnnotation,
    LabelVector,
    LABEL_SCHEMAS,
    Relation,
    ReportEmbedding,
    ReportKey,
    RowKey,
    ScoreMatrix,
    Study,
    TokenEmbeddingSet,
)

FORMAT_VERSION = 1


def _lines(path: str | Path) -> Iterator[tuple[int, dict]]:
    """Yield (line_number, parsed object) per non-blank line."""
    with open(path, "r", encoding="utf-8") as handle:
        for number, raw in enumerate(handle, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", path=path, line=number) from exc
            if not isinstance(obj, dict):
                raise ParseError("expected a JSON object", path=path, line=number)
            yield number, obj


def _req(obj: dict, name: str, typ: type, path, line: int) -> Any:
    if name not in obj:
        raise ParseError("required field missing", path=path, line=line, field=name)
    value = obj[name]
    if typ is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, typ) or (isinstance(value, bool) and typ is not bool):
        raise ParseError(
            f"expected {typ.__name__}, got {type(value).__name__}",
            path=path, line=line, field=name)
    return value


def _build(factory: Callable, path, line: int, **kwargs):
    """Run a model constructor, converting invariant violations to located errors."""
    try:
        return factory(**kwargs)
    except ValueError as exc:
        raise ParseError(str(exc), path=path, line=line) from exc


def read_studies(path: str | Path) -> list[Study]:
    out: list[Study] = []
    seen: set[tuple[str, str]] = set()
    for line, obj in _lines(path):
        study = _build(
            Study, path, line,
            study_id=_req(obj, "study_id", str, path, line),
            section=_req(obj, "section", str, path, line),
            reference_text=_req(obj, "reference_text", str, path, line),
            source_dataset=obj.get("source_dataset", ""),
        )
        ident = (study.study_id, study.section)
        if ident in seen:
            raise DuplicateKeyError(
                f"duplicate study {study.study_id}/{study.section}", path=path, line=line)
        seen.add(ident)
        out.append(study)
    return out


def write_studies(studies: Iterable[Study], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for study in studies:
            record = {
                "study_id": study.study_id,
                "section": study.section,
                "reference_text": study.reference_text,
                "source_dataset": study.source_dataset,
            }
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")


def read_candidates(path: str | Path) -> list[CandidateReport]:
    out: list[CandidateReport] = []
    seen: set[ReportKey] = set()
    for line, obj in _lines(path):
        cand = _build(
            CandidateReport, path, line,
            study_id=_req(obj, "study_id", str, path, line),
            system_id=_req(obj, "system_id", str, path, line),
            text=_req(obj, "text", str, path, line),
        )
        if cand.key in seen:
            raise DuplicateKeyError(
                f"duplicate candidate {cand.study_id}/{cand.system_id}", path=path, line=line)
        seen.add(cand.key)
        out.append(cand)
    return out


def write_candidates(candidates: Iterable[CandidateReport], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for cand in candidates:
            record = {"study_id": cand.study_id, "system_id": cand.system_id, "text": cand.text}
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")


def read_labels(path: str | Path, schema_id: str) -> list[LabelVector]:
    """Parse label vectors, enforcing the declared schema per line."""
    if schema_id not in LABEL_SCHEMAS:
        raise SchemaError(f"unknown schema_id {schema_id!r}", path=path)
    out: list[LabelVector] = []
    seen: set[ReportKey] = set()
    for line, obj in _lines(path):
        labels = _req(obj, "labels", dict, path, line)
        for name, state in labels.items():
            if not isinstance(name, str) or not isinstance(state, str):
                raise ParseError("labels must map string names to string states",
                                 path=path, line=line, field="labels")
        vec = _build(
            LabelVector, path, line,
            key=ReportKey(_req(obj, "study_id", str, path, line),
                          _req(obj, "system_id", str, path, line)),
            labels=dict(labels),
            schema_id=schema_id,
        )
        problems = vec.schema_problems()
        if problems:
            raise SchemaError(problems[0], path=path, line=line, field="labels")
        if vec.key in seen:
            raise DuplicateKeyError(
                f"duplicate label vector {vec.key.study_id}/{vec.key.system_id}",
                path=path, line=line)
        seen.add(vec.key)
        out.append(vec)
    return out


def write_labels(vectors: Iterable[LabelVector], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for vec in vectors:
            record = {
                "study_id": vec.key.study_id,
                "system_id": vec.key.system_id,
                "labels": dict(vec.labels),
            }
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")


def read_graphs(path: str | Path) -> list[EntityGraph]:
    out: list[EntityGraph] = []
    seen: set[ReportKey] = set()
    for line, obj in _lines(path):
        entities = []
        for item in _req(obj, "entities", list, path, line):
            if not isinstance(item, dict):
                raise ParseError("entity must be an object", path=path, line=line, field="entities")
            tokens = _req(item, "tokens", list, path, line)
            if not all(isinstance(t, str) for t in tokens):
                raise ParseError("entity tokens must be strings",
                                 path=path, line=line, field="tokens")
            entities.append(Entity(
                entity_id=_req(item, "id", str, path, line),
                token_span=tuple(tokens),
                type=_req(item, "type", str, path, line),
            ))
        relations = []
        for item in obj.get("relations", []):
            if not isinstance(item, dict):
                raise ParseError("relation must be an object",
                                 path=path, line=line, field="relations")
            relations.append(Relation(
                head_id=_req(item, "head", str, path, line),
                tail_id=_req(item, "tail", str, path, line),
                relation_type=_req(item, "type", str, path, line),
            ))
        graph = _build(
            EntityGraph, path, line,
            key=ReportKey(_req(obj, "study_id", str, path, line),
                          _req(obj, "system_id", str, path, line)),
            entities=tuple(entities),
            relations=tuple(relations),
        )
        if graph.key in seen:
            raise DuplicateKeyError(
                f"duplicate graph {graph.key.study_id}/{graph.key.system_id}",
                path=path, line=line)
        seen.add(graph.key)
        out.append(graph)
    return out


def write_graphs(graphs: Iterable[EntityGraph], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for graph in graphs:
            record = {
                "study_id": graph.key.study_id,
                "system_id": graph.key.system_id,
                "entities": [
                    {"id": e.entity_id, "tokens": list(e.token_span), "type": e.type}
                    for e in graph.entities
                ],
                "relations": [
                    {"head": r.head_id, "tail": r.tail_id, "type": r.relation_type}
                    for r in graph.relations
                ],
            }
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")


def read_annotations(path: str | Path) -> list[ErrorAnnotation]:
    out: list[ErrorAnnotation] = []
    seen: set[tuple[str, str, str]] = set()
    for line, obj in _lines(path):
        counts = _req(obj, "counts", dict, path, line)
        for category, per_sig in counts.items():
            if not isinstance(per_sig, dict):
                raise ParseError(f"counts for {category!r} must be an object",
                                 path=path, line=line, field="counts")
            for sig, value in per_sig.items():
                if not isinstance(value, int) or isinstance(value, bool):
                    raise ParseError(f"count for ({category}, {sig}) must be an integer",
                                     path=path, line=line, field="counts")
        ann = _build(
            ErrorAnnotation, path, line,
            study_id=_req(obj, "study_id", str, path, line),
            system_id=_req(obj, "system_id", str, path, line),
            section=_req(obj, "section", str, path, line),
            counts=counts,
        )
        ident = (ann.study_id, ann.system_id, ann.section)
        if ident in seen:
            raise DuplicateKeyError(
                f"duplicate annotation {'/'.join(ident)}", path=path, line=line)
        seen.add(ident)
        out.append(ann)
    return out


def write_annotations(annotations: Iterable[ErrorAnnotation], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for ann in annotations:
            record = {
                "study_id": ann.study_id,
                "system_id": ann.system_id,
                "section": ann.section,
                "counts": {c: dict(per) for c, per in ann.counts.items()},
            }
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")


def _decode_payload(obj: dict, dim: int, path, line: int) -> np.ndarray:
    text = _req(obj, "data", str, path, line)
    try:
        raw = base64.b64decode(text, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise ParseError(f"invalid base64 payload: {exc}",
                         path=path, line=line, field="data") from exc
    if len(raw) % (dim * 4) != 0:
        raise ParseError(
            f"payload is {len(raw)} bytes, not a multiple of dim*4 = {dim * 4}",
            path=path, line=line, field="data")
    flat = np.frombuffer(raw, dtype="<f4")
    return flat.reshape(-1, dim)


def read_embeddings(path: str | Path) -> EmbeddingSet:
    stream = _lines(path)
    try:
        line, header = next(stream)
    except StopIteration:
        raise ParseError("missing header line", path=path, line=1) from None
    version = _req(header, "format_version", int, path, line)
    if version != FORMAT_VERSION:
        raise ParseError(f"unsupported format_version {version}",
                         path=path, line=line, field="format_version")
    kind = _req(header, "kind", str, path, line)
    if kind not in ("token", "report"):
        raise ParseError(f"kind must be 'token' or 'report', got {kind!r}",
                         path=path, line=line, field="kind")
    dim = _req(header, "dim", int, path, line)
    if dim <= 0:
        raise ParseError("dim must be positive", path=path, line=line, field="dim")
    declared = _req(header, "record_count", int, path, line)

    records: dict[ReportKey, TokenEmbeddingSet | ReportEmbedding] = {}
    for line, obj in stream:
        key = ReportKey(_req(obj, "study_id", str, path, line),
                        _req(obj, "system_id", str, path, line))
        if key in records:
            raise DuplicateKeyError(
                f"duplicate embedding record {key.study_id}/{key.system_id}",
                path=path, line=line)
        matrix = _decode_payload(obj, dim, path, line)
        if kind == "token":
            tokens = _req(obj, "tokens", list, path, line)
            if not all(isinstance(t, str) for t in tokens):
                raise ParseError("tokens must be strings", path=path, line=line, field="tokens")
            records[key] = TokenEmbeddingSet(key=key, tokens=tuple(tokens), vectors=matrix)
        else:
            if matrix.shape[0] != 1:
                raise ParseError(
                    f"report record must hold exactly dim*4 = {dim * 4} bytes, "
                    f"got {matrix.shape[0]} rows",
                    path=path, line=line, field="data")
            records[key] = ReportEmbedding(key=key, vector=matrix[0])
    if len(records) != declared:
        raise ParseError(
            f"header declares {declared} records, file holds {len(records)}",
            path=path, field="record_count")
    return EmbeddingSet(kind=kind, dim=dim, records=records)


def write_embeddings(emb: EmbeddingSet, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        header = {
            "format_version": FORMAT_VERSION,
            "kind": emb.kind,
            "dim": emb.dim,
            "record_count": len(emb.records),
        }
        handle.write(json.dumps(header) + "\n")
        for key, record in emb.records.items():
            payload = record.vectors if emb.kind == "token" else record.vector.reshape(1, -1)
            data = base64.b64encode(
                np.ascontiguousarray(payload, dtype="<f4").tobytes()).decode("ascii")
            out: dict[str, Any] = {"study_id": key.study_id, "system_id": key.system_id}
            if emb.kind == "token":
                out["tokens"] = list(record.tokens)
            out["data"] = data
            handle.write(json.dumps(out, ensure_ascii=False) + "\n")


def read_scores(path: str | Path) -> ScoreMatrix:
    stream = _lines(path)
    try:
        line, header = next(stream)
    except StopIteration:
        raise ParseError("missing header line", path=path, line=1) from None
    version = _req(header, "format_version", int, path, line)
    if version != FORMAT_VERSION:
        raise ParseError(f"unsupported format_version {version}",
                         path=path, line=line, field="format_version")
    columns = _req(header, "columns", list, path, line)
    directions = _req(header, "directions", dict, path, line)
    declared = _req(header, "row_count", int, path, line)

    matrix = ScoreMatrix()
    for name in columns:
        if not isinstance(name, str):
            raise ParseError("columns must be strings", path=path, line=line, field="columns")
        try:
            matrix.add_column(name, directions.get(name, "higher_better"))
        except ValueError as exc:
            raise ParseError(str(exc), path=path, line=line, field="directions") from exc

    count = 0
    for line, obj in stream:
        key = RowKey(_req(obj, "study_id", str, path, line),
                     _req(obj, "system_id", str, path, line),
                     _req(obj, "section", str, path, line))
        try:
            matrix.add_row(key, dataset=obj.get("dataset", ""))
        except ValueError as exc:
            err = DuplicateKeyError if "duplicate" in str(exc) else ParseError
            raise err(str(exc), path=path, line=line) from exc
        cells = _req(obj, "cells", dict, path, line)
        for column, value in cells.items():
            if value is None:
                continue
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ParseError(f"cell {column!r} must be a number or null",
                                 path=path, line=line, field="cells")
            try:
                matrix.set(key, column, float(value))
            except (KeyError, ValueError) as exc:
                raise ParseError(str(exc), path=path, line=line, field="cells") from exc
        count += 1
    if count != declared:
        raise ParseError(f"header declares {declared} rows, file holds {count}",
                         path=path, field="row_count")
    return matrix


def write_scores(matrix: ScoreMatrix, path: str | Path) -> None:
    """Lossless JSON form: header line, then one line per row."""
    with open(path, "w", encoding="utf-8") as handle:
        header = {
            "format_version": FORMAT_VERSION,
            "columns": matrix.columns,
            "directions": {c: matrix.direction(c) for c in matrix.columns},
            "row_count": len(matrix),
        }
        handle.write(json.dumps(header) + "\n")
        for key in matrix.row_keys:
            record = {
                "study_id": key.study_id,
                "system_id": key.system_id,
                "section": key.section,
                "dataset": matrix.dataset(key),
                "cells": {c: matrix.get(key, c) for c in matrix.columns},
            }
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")


def render_cell(value: float | None) -> str:
    """Human tables show scores x100 with one decimal; missing cells stay blank."""
    if value is None:
        return ""
    return f"{value * 100:.1f}"


def render_scores_markdown(matrix: ScoreMatrix, heading: str = "# Scores") -> str:
    """Markdown view grouped by (dataset, section), rows sorted by system then study."""
    columns = matrix.columns
    blocks: dict[tuple[str, str], list[RowKey]] = {}
    for key in matrix.row_keys:
        blocks.setdefault((matrix.dataset(key), key.section), []).append(key)

    lines = [heading, ""]
    if not blocks:
        header = "| system | study | " + " | ".join(columns) + " |"
        rule = "|" + "---|" * (len(columns) + 2)
        lines += [header, rule, ""]
        return "\n".join(lines)

    block_marker = heading.split(" ", 1)[0] + "#"
    for dataset, section in sorted(blocks):
        keys = sorted(blocks[(dataset, section)],
                      key=lambda k: (k.system_id, k.study_id))
        title = f"{block_marker} {dataset or 'corpus'} / {section}"
        lines.append(title)
        lines.append("")
        show_study = any(k.study_id for k in keys)
        head = ["system"] + (["study"] if show_study else []) + list(columns)
        lines.append("| " + " | ".join(head) + " |")
        lines.append("|" + "---|" * len(head))
        for key in keys:
            cells = [key.system_id] + ([key.study_id] if show_study else [])
            cells += [render_cell(matrix.get(key, c)) for c in columns]
            lines.append("| " + " | ".join(cells) + " |")
        lines.append("")
    return "\n".join(lines)


def write_score_matrix(matrix: ScoreMatrix, path: str | Path, format: str = "json") -> None:
    if format == "json":
        write_scores(matrix, path)
    elif format == "markdown":
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(render_scores_markdown(matrix))
    else:
        raise ValueError(f"format must be 'json' or 'markdown', got {format!r}")
