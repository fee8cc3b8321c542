"""Serialization to the engine's sidecar file formats.

Embedding files: one JSON header line {format_version, kind, dim,
record_count}, then one record per line with study_id/system_id,
tokens for token-kind files, and a base64 payload of little-endian
float32 rows. Label files: one record per line with study_id/system_id
and a labels object mapping names to states.
"""

from __future__ import annotations

import base64
import json
from typing import Sequence

import numpy as np

FORMAT_VERSION = 1


def _payload(rows: np.ndarray) -> str:
    data = np.ascontiguousarray(rows, dtype="<f4").tobytes()
    return base64.b64encode(data).decode("ascii")


def write_embedding_file(path: str, kind: str, dim: int,
                         records: Sequence[tuple]) -> None:
    """records: (study_id, system_id, tokens-or-None, float32 rows)."""
    lines = [json.dumps({"format_version": FORMAT_VERSION, "kind": kind,
                         "dim": dim, "record_count": len(records)})]
    for study_id, system_id, tokens, rows in records:
        obj: dict = {"study_id": study_id, "system_id": system_id}
        if kind == "token":
            obj["tokens"] = list(tokens)
        obj["data"] = _payload(np.atleast_2d(rows))
        lines.append(json.dumps(obj, ensure_ascii=False))
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("\n".join(lines) + "\n")


def write_labels_file(path: str, records: Sequence[tuple]) -> None:
    """records: (study_id, system_id, {label name: state})."""
    lines = []
    for study_id, system_id, labels in records:
        lines.append(json.dumps({"study_id": study_id, "system_id": system_id,
                                 "labels": labels}, ensure_ascii=False))
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("\n".join(lines) + "\n")
