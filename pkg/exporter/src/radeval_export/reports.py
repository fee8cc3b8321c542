"""Reading report text out of the engine's studies/candidates files."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

from radeval_export.errors import ExportError

REF_SYSTEM = "REF"


@dataclass(frozen=True)
class ReportRecord:
    study_id: str
    system_id: str
    text: str


def _classify(obj: dict, path: str, line: int) -> ReportRecord:
    # a study line carries reference_text; a candidate line carries
    # system_id + text. Anything else is not a report record.
    if "reference_text" in obj:
        return ReportRecord(
            study_id=_field(obj, "study_id", path, line),
            system_id=REF_SYSTEM,
            text=_field(obj, "reference_text", path, line),
        )
    if "system_id" in obj:
        record = ReportRecord(
            study_id=_field(obj, "study_id", path, line),
            system_id=_field(obj, "system_id", path, line),
            text=_field(obj, "text", path, line),
        )
        if record.system_id == REF_SYSTEM:
            raise ExportError(
                f"{path} line {line}: system_id {REF_SYSTEM!r} is reserved "
                "for references")
        return record
    raise ExportError(
        f"{path} line {line}: record is neither a study (reference_text) "
        "nor a candidate (system_id + text)")


def _field(obj: dict, name: str, path: str, line: int) -> str:
    value = obj.get(name)
    if not isinstance(value, str):
        raise ExportError(f"{path} line {line}: missing or non-string {name!r}")
    return value


def read_reports(paths: Sequence[str]) -> list[ReportRecord]:
    """Parse report records from one or more files, preserving order.

    Raises:
        ExportError: unreadable file, malformed line, or a duplicate
            (study_id, system_id) key across all inputs.
    """
    out: list[ReportRecord] = []
    seen: set[tuple[str, str]] = set()
    for path in paths:
        try:
            with open(path, "r", encoding="utf-8") as handle:
                lines = handle.readlines()
        except OSError as exc:
            raise ExportError(f"cannot read {path}: {exc}") from exc
        for line_no, raw in enumerate(lines, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ExportError(f"{path} line {line_no}: not valid JSON: {exc}") from exc
            if not isinstance(obj, dict):
                raise ExportError(f"{path} line {line_no}: record must be an object")
            record = _classify(obj, path, line_no)
            key = (record.study_id, record.system_id)
            if key in seen:
                raise ExportError(
                    f"{path} line {line_no}: duplicate report key "
                    f"{record.study_id}/{record.system_id}")
            seen.add(key)
            out.append(record)
    if not out:
        raise ExportError("no report records found in the input files")
    return out
