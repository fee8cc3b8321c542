"""Domain types shared by all modules, with validation invariants.

All types are immutable after construction and safe to share across
threads. Per-object field invariants are enforced at construction (the
readers turn violations into located parse errors); cross-object
consistency is checked by :func:`validate_corpus`, which reports issues
instead of raising.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple

import numpy as np

SECTIONS = ("findings", "impression")

REF_SYSTEM = "REF"

LABEL_STATES = ("positive", "negative", "uncertain", "blank")

CHEXPERT14 = (
    "No Finding",
    "Enlarged Cardiomediastinum",
    "Cardiomegaly",
    "Lung Opacity",
    "Lung Lesion",
    "Edema",
    "Consolidation",
    "Pneumonia",
    "Atelectasis",
    "Pneumothorax",
    "Pleural Effusion",
    "Pleural Other",
    "Fracture",
    "Support Devices",
)

CHEXPERT5 = (
    "Atelectasis",
    "Cardiomegaly",
    "Consolidation",
    "Edema",
    "Pleural Effusion",
)

ERROR_CATEGORIES = (
    "false_prediction",
    "omission",
    "incorrect_location",
    "incorrect_severity",
    "spurious_comparison",
    "omission_of_change",
    "inarticulate",
)

SIGNIFICANCES = ("significant", "insignificant")

EMBEDDING_KINDS = ("token", "report")

#: schema_id -> (fixed label tuple or None, required count or None)
LABEL_SCHEMAS: dict[str, tuple[tuple[str, ...] | None, int | None]] = {
    "chexpert14": (CHEXPERT14, 14),
    "chexpert5": (CHEXPERT5, 5),
    "srr55": (None, 55),
    "custom": (None, None),
}


class ReportKey(NamedTuple):
    """Composite key shared by all artifacts.

    Candidates are keyed (study_id, system_id); the reference report of a
    study is keyed (study_id, "REF").
    """

    study_id: str
    system_id: str


class RowKey(NamedTuple):
    """Score-matrix row identity."""

    study_id: str
    system_id: str
    section: str


@dataclass(frozen=True)
class Study:
    study_id: str
    section: str
    reference_text: str
    source_dataset: str = ""

    def __post_init__(self):
        if not self.study_id:
            raise ValueError("study_id must be non-empty")
        if self.section not in SECTIONS:
            raise ValueError(f"section must be one of {SECTIONS}, got {self.section!r}")
        if not self.reference_text:
            raise ValueError("reference_text must be non-empty")


@dataclass(frozen=True)
class CandidateReport:
    study_id: str
    system_id: str
    text: str

    def __post_init__(self):
        if not self.study_id:
            raise ValueError("study_id must be non-empty")
        if not self.system_id:
            raise ValueError("system_id must be non-empty")
        if self.system_id == REF_SYSTEM:
            raise ValueError(f"system_id {REF_SYSTEM!r} is reserved for references")

    @property
    def key(self) -> ReportKey:
        return ReportKey(self.study_id, self.system_id)


@dataclass(frozen=True)
class LabelVector:
    key: ReportKey
    labels: Mapping[str, str]  # label name -> state, insertion-ordered
    schema_id: str

    def __post_init__(self):
        if self.schema_id not in LABEL_SCHEMAS:
            raise ValueError(f"unknown schema_id {self.schema_id!r}")
        for name, state in self.labels.items():
            if state not in LABEL_STATES:
                raise ValueError(f"label {name!r} has unknown state {state!r}")

    def schema_problems(self) -> list[str]:
        """Mismatches between the label set and the declared schema."""
        fixed, count = LABEL_SCHEMAS[self.schema_id]
        problems = []
        if fixed is not None:
            declared = set(fixed)
            present = set(self.labels)
            for name in sorted(present - declared):
                problems.append(f"label {name!r} not in schema {self.schema_id}")
            for name in fixed:
                if name not in present:
                    problems.append(f"label {name!r} missing from record")
        elif count is not None and len(self.labels) != count:
            problems.append(
                f"schema {self.schema_id} requires {count} labels, got {len(self.labels)}"
            )
        return problems


class Entity(NamedTuple):
    entity_id: str
    token_span: tuple[str, ...]
    type: str


class Relation(NamedTuple):
    head_id: str
    tail_id: str
    relation_type: str


@dataclass(frozen=True)
class EntityGraph:
    key: ReportKey
    entities: tuple[Entity, ...]
    relations: tuple[Relation, ...]

    def __post_init__(self):
        ids = [e.entity_id for e in self.entities]
        if len(ids) != len(set(ids)):
            raise ValueError("entity ids must be unique")
        known = set(ids)
        for entity in self.entities:
            if not entity.token_span:
                raise ValueError(f"entity {entity.entity_id!r} has an empty token span")
        for rel in self.relations:
            if rel.head_id not in known or rel.tail_id not in known:
                raise ValueError(
                    f"relation {rel.head_id!r}->{rel.tail_id!r} references an unknown entity"
                )


@dataclass(frozen=True, eq=False)
class TokenEmbeddingSet:
    """Per-token embedding rows for one report.

    The row/token-count invariant is deliberately not enforced here so that
    validation can report the mismatch instead of failing the parse.
    """

    key: ReportKey
    tokens: tuple[str, ...]
    vectors: np.ndarray  # float32, shape (rows, dim)

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def __eq__(self, other) -> bool:
        if not isinstance(other, TokenEmbeddingSet):
            return NotImplemented
        return (self.key == other.key and self.tokens == other.tokens
                and np.array_equal(self.vectors, other.vectors))


@dataclass(frozen=True, eq=False)
class ReportEmbedding:
    key: ReportKey
    vector: np.ndarray  # float32, shape (dim,)

    @property
    def dim(self) -> int:
        return int(self.vector.shape[0])

    def __eq__(self, other) -> bool:
        if not isinstance(other, ReportEmbedding):
            return NotImplemented
        return self.key == other.key and np.array_equal(self.vector, other.vector)


@dataclass(frozen=True, eq=False)
class EmbeddingSet:
    """One embedding sidecar file: a keyed collection of same-dim records."""

    kind: str  # one of EMBEDDING_KINDS
    dim: int
    records: Mapping[ReportKey, TokenEmbeddingSet | ReportEmbedding]

    def __post_init__(self):
        if self.kind not in EMBEDDING_KINDS:
            raise ValueError(f"kind must be one of {EMBEDDING_KINDS}, got {self.kind!r}")
        if self.dim <= 0:
            raise ValueError("dim must be positive")

    def __eq__(self, other) -> bool:
        if not isinstance(other, EmbeddingSet):
            return NotImplemented
        return (self.kind == other.kind and self.dim == other.dim
                and dict(self.records) == dict(other.records))


@dataclass(frozen=True)
class ErrorAnnotation:
    """Expert error counts for one candidate, split by clinical significance."""

    study_id: str
    system_id: str
    section: str
    counts: Mapping[str, Mapping[str, int]]  # category -> significance -> count

    def __post_init__(self):
        if self.section not in SECTIONS:
            raise ValueError(f"section must be one of {SECTIONS}, got {self.section!r}")
        normalized: dict[str, dict[str, int]] = {}
        for category in ERROR_CATEGORIES:
            per_sig = dict(self.counts.get(category, {}))
            for sig in SIGNIFICANCES:
                value = int(per_sig.get(sig, 0))
                if value < 0:
                    raise ValueError(f"count for ({category}, {sig}) must be >= 0")
                per_sig[sig] = value
            normalized[category] = {sig: per_sig[sig] for sig in SIGNIFICANCES}
        for category in self.counts:
            if category not in ERROR_CATEGORIES:
                raise ValueError(f"unknown error category {category!r}")
        object.__setattr__(self, "counts", normalized)

    @property
    def key(self) -> ReportKey:
        return ReportKey(self.study_id, self.system_id)

    @property
    def total_significant(self) -> int:
        return sum(self.counts[c]["significant"] for c in ERROR_CATEGORIES)

    @property
    def total_insignificant(self) -> int:
        return sum(self.counts[c]["insignificant"] for c in ERROR_CATEGORIES)


DIRECTIONS = ("higher_better", "lower_better")


class ScoreMatrix:
    """Candidate x metric score table, the interchange between scoring and stats.

    Rows are identified by (study_id, system_id, section); each row may carry
    a dataset tag used only for grouping in human-readable reports. Missing
    cells are explicit (None), never silently zero.
    """

    def __init__(self, columns: Iterable[str] = ()):
        self._columns: list[str] = []
        self._directions: dict[str, str] = {}
        self._cells: dict[RowKey, dict[str, float]] = {}
        self._datasets: dict[RowKey, str] = {}
        for name in columns:
            self.add_column(name)

    @property
    def columns(self) -> list[str]:
        return list(self._columns)

    @property
    def row_keys(self) -> list[RowKey]:
        return list(self._cells)

    def direction(self, column: str) -> str:
        return self._directions.get(column, "higher_better")

    def add_column(self, name: str, direction: str = "higher_better") -> None:
        if direction not in DIRECTIONS:
            raise ValueError(f"direction must be one of {DIRECTIONS}")
        if name in self._columns:
            raise ValueError(f"duplicate column {name!r}")
        self._columns.append(name)
        self._directions[name] = direction

    def add_row(self, key: RowKey, dataset: str = "") -> None:
        if key.section not in SECTIONS:
            raise ValueError(f"section must be one of {SECTIONS}, got {key.section!r}")
        if key in self._cells:
            raise ValueError(f"duplicate row {key}")
        self._cells[key] = {}
        self._datasets[key] = dataset

    def dataset(self, key: RowKey) -> str:
        return self._datasets[key]

    def set(self, key: RowKey, column: str, value: float | None) -> None:
        """Store one cell; None clears it, so cells are either finite or absent."""
        if key not in self._cells:
            raise KeyError(f"unknown row {key}")
        if column not in self._columns:
            raise KeyError(f"unknown column {column!r}")
        if value is None:
            self._cells[key].pop(column, None)
            return
        value = float(value)
        if not np.isfinite(value):
            raise ValueError(f"score for {key}/{column} must be finite")
        self._cells[key][column] = value

    def get(self, key: RowKey, column: str) -> float | None:
        return self._cells.get(key, {}).get(column)

    def column_values(self, column: str) -> dict[RowKey, float]:
        """All non-missing cells of one column, in row order."""
        out = {}
        for key, cells in self._cells.items():
            value = cells.get(column)
            if value is not None:
                out[key] = value
        return out

    def __len__(self) -> int:
        return len(self._cells)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ScoreMatrix):
            return NotImplemented
        return (
            self._columns == other._columns
            and self._directions == other._directions
            and self._datasets == other._datasets
            and {k: dict(v) for k, v in self._cells.items()}
            == {k: dict(v) for k, v in other._cells.items()}
        )


@dataclass(frozen=True)
class ValidationIssue:
    kind: str
    message: str
    where: str = ""

    def __str__(self) -> str:
        return f"[{self.kind}] {self.where}: {self.message}" if self.where else f"[{self.kind}] {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    issues: tuple[ValidationIssue, ...]

    @property
    def ok(self) -> bool:
        return not self.issues

    def by_kind(self, kind: str) -> list[ValidationIssue]:
        return [i for i in self.issues if i.kind == kind]


@dataclass
class Sidecars:
    """Externally produced per-report artifacts consumed by the engine."""

    token_embeddings: dict[str, EmbeddingSet] = field(default_factory=dict)
    report_embeddings: dict[str, EmbeddingSet] = field(default_factory=dict)
    labels: dict[str, list[LabelVector]] = field(default_factory=dict)
    graphs: dict[str, list[EntityGraph]] = field(default_factory=dict)
    scores: list[ScoreMatrix] = field(default_factory=list)


def _resolves(key: ReportKey, study_sections: dict[str, list[str]],
              candidate_keys: set[ReportKey]) -> bool:
    if key.system_id == REF_SYSTEM:
        return key.study_id in study_sections
    return key in candidate_keys


def validate_corpus(
    studies: Iterable[Study],
    candidates: Iterable[CandidateReport] = (),
    sidecars: Sidecars | None = None,
    annotations: Iterable[ErrorAnnotation] = (),
) -> ValidationReport:
    """Check cross-object consistency; problems are report entries, not exceptions."""
    issues: list[ValidationIssue] = []

    study_sections: dict[str, list[str]] = {}
    seen_studies: set[tuple[str, str]] = set()
    for study in studies:
        ident = (study.study_id, study.section)
        if ident in seen_studies:
            issues.append(ValidationIssue(
                "duplicate_study", "study appears more than once",
                f"study {study.study_id}/{study.section}"))
        seen_studies.add(ident)
        study_sections.setdefault(study.study_id, []).append(study.section)

    candidate_keys: set[ReportKey] = set()
    for cand in candidates:
        if cand.key in candidate_keys:
            issues.append(ValidationIssue(
                "duplicate_candidate", "candidate appears more than once",
                f"candidate {cand.study_id}/{cand.system_id}"))
        candidate_keys.add(cand.key)
        sections = study_sections.get(cand.study_id)
        if sections is None:
            issues.append(ValidationIssue(
                "dangling_study_id", "candidate references an unknown study",
                f"candidate {cand.study_id}/{cand.system_id}"))
        elif len(sections) > 1:
            issues.append(ValidationIssue(
                "ambiguous_section",
                "study exists in more than one section; candidate cannot be resolved",
                f"candidate {cand.study_id}/{cand.system_id}"))

    seen_annotations: set[tuple[str, str, str]] = set()
    for ann in annotations:
        ident = (ann.study_id, ann.system_id, ann.section)
        if ident in seen_annotations:
            issues.append(ValidationIssue(
                "duplicate_annotation", "annotation appears more than once",
                f"annotation {'/'.join(ident)}"))
        seen_annotations.add(ident)
        if ann.section not in study_sections.get(ann.study_id, []):
            issues.append(ValidationIssue(
                "dangling_annotation", "annotation references an unknown study/section",
                f"annotation {'/'.join(ident)}"))
        if ann.key not in candidate_keys:
            issues.append(ValidationIssue(
                "dangling_annotation", "annotation references an unknown candidate",
                f"annotation {'/'.join(ident)}"))

    sidecars = sidecars or Sidecars()

    for name, vectors in sidecars.labels.items():
        seen: set[ReportKey] = set()
        for vec in vectors:
            where = f"labels[{name}] {vec.key.study_id}/{vec.key.system_id}"
            if vec.key in seen:
                issues.append(ValidationIssue(
                    "duplicate_sidecar_key", "label vector appears more than once", where))
            seen.add(vec.key)
            if not _resolves(vec.key, study_sections, candidate_keys):
                issues.append(ValidationIssue(
                    "dangling_sidecar_key", "label vector references an unknown report", where))
            for problem in vec.schema_problems():
                issues.append(ValidationIssue("schema_mismatch", problem, where))

    for name, graphs in sidecars.graphs.items():
        seen = set()
        for graph in graphs:
            where = f"graphs[{name}] {graph.key.study_id}/{graph.key.system_id}"
            if graph.key in seen:
                issues.append(ValidationIssue(
                    "duplicate_sidecar_key", "graph appears more than once", where))
            seen.add(graph.key)
            if not _resolves(graph.key, study_sections, candidate_keys):
                issues.append(ValidationIssue(
                    "dangling_sidecar_key", "graph references an unknown report", where))

    for group, kind in ((sidecars.token_embeddings, "token"),
                        (sidecars.report_embeddings, "report")):
        for name, emb in group.items():
            for key, record in emb.records.items():
                where = f"embeddings[{name}] {key.study_id}/{key.system_id}"
                if not _resolves(key, study_sections, candidate_keys):
                    issues.append(ValidationIssue(
                        "dangling_sidecar_key", "embedding references an unknown report", where))
                vectors = record.vectors if kind == "token" else record.vector
                if not np.all(np.isfinite(vectors)):
                    issues.append(ValidationIssue(
                        "non_finite_embedding", "embedding contains non-finite values", where))
                if kind == "token" and record.vectors.shape[0] != len(record.tokens):
                    issues.append(ValidationIssue(
                        "row_token_mismatch",
                        f"{record.vectors.shape[0]} rows for {len(record.tokens)} tokens",
                        where))

    for matrix in sidecars.scores:
        for key in matrix.row_keys:
            if ReportKey(key.study_id, key.system_id) not in candidate_keys \
                    and key.system_id != REF_SYSTEM:
                issues.append(ValidationIssue(
                    "dangling_sidecar_key", "score row references an unknown candidate",
                    f"scores {key.study_id}/{key.system_id}/{key.section}"))

    return ValidationReport(tuple(issues))
