"""Domain objects: construction rules, score matrix semantics, corpus validation."""

import numpy as np
import pytest

from radeval.model import (
    CHEXPERT5,
    CHEXPERT14,
    EMBEDDING_KINDS,
    ERROR_CATEGORIES,
    REF_SYSTEM,
    SECTIONS,
    CandidateReport,
    EmbeddingSet,
    Entity,
    EntityGraph,
    ErrorAnnotation,
    LabelVector,
    Relation,
    ReportEmbedding,
    ReportKey,
    RowKey,
    ScoreMatrix,
    Sidecars,
    Study,
    TokenEmbeddingSet,
    validate_corpus,
)


def test_schema_constants():
    assert len(CHEXPERT14) == 14
    assert len(CHEXPERT5) == 5
    assert set(CHEXPERT5) <= set(CHEXPERT14)
    assert len(ERROR_CATEGORIES) == 7
    assert SECTIONS == ("findings", "impression")


def test_study_validation():
    study = Study("s1", "findings", "text", "ds")
    assert study.study_id == "s1"
    with pytest.raises(ValueError):
        Study("s1", "conclusion", "text", "ds")
    with pytest.raises(ValueError):
        Study("s1", "findings", "", "ds")
    with pytest.raises(ValueError):
        Study("", "findings", "text", "ds")


def test_candidate_rejects_reserved_system():
    CandidateReport("s1", "model9", "text")
    with pytest.raises(ValueError):
        CandidateReport("s1", REF_SYSTEM, "text")
    with pytest.raises(ValueError):
        CandidateReport("s1", "", "text")


def full_labels(**overrides):
    labels = {name: "negative" for name in CHEXPERT14}
    labels.update(overrides)
    return labels


def test_label_vector_schema_problems():
    key = ReportKey("s1", "m")
    good = LabelVector(key, full_labels(), "chexpert14")
    assert good.schema_problems() == []

    extra = dict(full_labels())
    extra["Bogus"] = "positive"
    problems = LabelVector(key, extra, "chexpert14").schema_problems()
    assert any("Bogus" in p for p in problems)

    missing = dict(full_labels())
    missing.pop("Edema")
    problems = LabelVector(key, missing, "chexpert14").schema_problems()
    assert any("Edema" in p for p in problems)

    with pytest.raises(ValueError):
        LabelVector(key, {"Edema": "sometimes"}, "chexpert14")
    with pytest.raises(ValueError):
        LabelVector(key, full_labels(), "not-a-schema")


def test_label_vector_count_only_schemas():
    key = ReportKey("s1", "m")
    fifty_five = {f"L{i}": "negative" for i in range(55)}
    assert LabelVector(key, fifty_five, "srr55").schema_problems() == []
    short = {f"L{i}": "negative" for i in range(54)}
    assert LabelVector(key, short, "srr55").schema_problems() != []
    assert LabelVector(key, {"anything": "positive"}, "custom").schema_problems() == []


def test_entity_graph_validation():
    key = ReportKey("s1", "m")
    e1 = Entity("a", ("pleural", "effusion"), "OBS")
    e2 = Entity("b", ("left",), "ANAT")
    graph = EntityGraph(key, (e1, e2), (Relation("a", "b", "located_at"),))
    assert len(graph.entities) == 2

    with pytest.raises(ValueError):
        EntityGraph(key, (e1, Entity("a", ("x",), "OBS")), ())
    with pytest.raises(ValueError):
        EntityGraph(key, (e1,), (Relation("a", "zz", "modify"),))
    with pytest.raises(ValueError):
        EntityGraph(key, (Entity("c", (), "OBS"),), ())


def test_embedding_equality_is_structural():
    key = ReportKey("s1", "m")
    a = TokenEmbeddingSet(key, ("t1",), np.ones((1, 3), dtype=np.float32))
    b = TokenEmbeddingSet(key, ("t1",), np.ones((1, 3), dtype=np.float32))
    c = TokenEmbeddingSet(key, ("t1",), np.zeros((1, 3), dtype=np.float32))
    assert a == b
    assert a != c
    assert a != "not an embedding"

    r1 = ReportEmbedding(key, np.arange(3, dtype=np.float32))
    r2 = ReportEmbedding(key, np.arange(3, dtype=np.float32))
    assert r1 == r2

    s1 = EmbeddingSet("token", 3, {key: a})
    s2 = EmbeddingSet("token", 3, {key: b})
    assert s1 == s2
    with pytest.raises(ValueError):
        EmbeddingSet("image", 3, {})
    with pytest.raises(ValueError):
        EmbeddingSet("token", 0, {})
    assert set(EMBEDDING_KINDS) == {"token", "report"}


def test_error_annotation_normalizes_counts():
    ann = ErrorAnnotation("s1", "m", "findings",
                          {"omission": {"significant": 2}})
    assert ann.counts["omission"] == {"significant": 2, "insignificant": 0}
    # untouched categories are zero-filled
    assert ann.counts["false_prediction"] == {"significant": 0, "insignificant": 0}
    assert ann.total_significant == 2
    assert ann.total_insignificant == 0

    with pytest.raises(ValueError):
        ErrorAnnotation("s1", "m", "findings", {"omission": {"significant": -1}})
    with pytest.raises(ValueError):
        ErrorAnnotation("s1", "m", "findings", {"typo_category": {}})
    with pytest.raises(ValueError):
        ErrorAnnotation("s1", "m", "conclusion", {})


def test_score_matrix_cells_and_none_semantics():
    matrix = ScoreMatrix()
    matrix.add_column("bleu")
    matrix.add_column("radcliq", direction="lower_better")
    with pytest.raises(ValueError):
        matrix.add_column("bleu")
    with pytest.raises(ValueError):
        matrix.add_column("x", direction="sideways")

    key = RowKey("s1", "m", "findings")
    matrix.add_row(key, dataset="toy")
    with pytest.raises(ValueError):
        matrix.add_row(key)
    with pytest.raises(ValueError):
        matrix.add_row(RowKey("s2", "m", "conclusion"))

    matrix.set(key, "bleu", 0.5)
    assert matrix.get(key, "bleu") == 0.5
    assert matrix.get(key, "radcliq") is None
    assert matrix.column_values("bleu") == {key: 0.5}
    assert matrix.direction("radcliq") == "lower_better"
    assert matrix.dataset(key) == "toy"

    # None clears: a cleared cell equals a never-set cell
    other = ScoreMatrix()
    other.add_column("bleu")
    other.add_column("radcliq", direction="lower_better")
    other.add_row(key, dataset="toy")
    other.set(key, "bleu", 0.9)
    other.set(key, "bleu", None)
    matrix.set(key, "bleu", None)
    assert matrix == other

    with pytest.raises(KeyError):
        matrix.set(key, "unknown_metric", 1.0)
    with pytest.raises(KeyError):
        matrix.set(RowKey("nope", "m", "findings"), "bleu", 1.0)


def base_corpus():
    studies = [Study("s1", "findings", "ref one", "toy"),
               Study("s2", "impression", "ref two", "toy")]
    candidates = [CandidateReport("s1", "m", "cand one"),
                  CandidateReport("s2", "m", "cand two")]
    return studies, candidates


def test_validate_corpus_clean():
    studies, candidates = base_corpus()
    report = validate_corpus(studies, candidates, Sidecars(), [])
    assert report.ok
    assert list(report.issues) == []


def test_validate_corpus_duplicates_and_dangling():
    studies, candidates = base_corpus()
    studies.append(Study("s1", "findings", "again", "toy"))
    candidates.append(CandidateReport("s1", "m", "dup"))
    candidates.append(CandidateReport("ghost", "m", "no study"))
    report = validate_corpus(studies, candidates, Sidecars(), [])
    kinds = {issue.kind for issue in report.issues}
    assert "duplicate_study" in kinds
    assert "duplicate_candidate" in kinds
    assert "dangling_study_id" in kinds
    assert not report.ok


def test_validate_corpus_ambiguous_section():
    studies, candidates = base_corpus()
    studies.append(Study("s1", "impression", "both sections", "toy"))
    annotations = [ErrorAnnotation("s1", "m", "findings", {})]
    report = validate_corpus(studies, candidates, Sidecars(), annotations)
    assert report.by_kind("ambiguous_section")


def test_validate_corpus_annotation_issues():
    studies, candidates = base_corpus()
    annotations = [
        ErrorAnnotation("s1", "m", "findings", {}),
        ErrorAnnotation("s1", "m", "findings", {}),
        ErrorAnnotation("s9", "m", "findings", {}),
    ]
    report = validate_corpus(studies, candidates, Sidecars(), annotations)
    assert report.by_kind("duplicate_annotation")
    assert report.by_kind("dangling_annotation")


def test_validate_corpus_sidecar_issues():
    studies, candidates = base_corpus()
    ghost = ReportKey("ghost", "m")
    ok_key = ReportKey("s1", "m")
    bad_vec = np.array([1.0, float("nan")], dtype=np.float32)
    embeddings = EmbeddingSet("report", 2, {
        ghost: ReportEmbedding(ghost, np.ones(2, dtype=np.float32)),
        ok_key: ReportEmbedding(ok_key, bad_vec),
    })
    mismatch_key = ReportKey("s2", "m")
    tokens = EmbeddingSet("token", 2, {
        mismatch_key: TokenEmbeddingSet(mismatch_key, ("a", "b"),
                                        np.ones((3, 2), dtype=np.float32)),
    })
    labels = {"chexbert_labels": [
        LabelVector(ok_key, {"only": "positive"}, "chexpert14"),
    ]}
    sidecars = Sidecars(report_embeddings={"chexbert_embeddings": embeddings},
                        token_embeddings={"bertscore_tokens": tokens},
                        labels=labels)
    report = validate_corpus(studies, candidates, sidecars, [])
    kinds = {issue.kind for issue in report.issues}
    assert "dangling_sidecar_key" in kinds
    assert "non_finite_embedding" in kinds
    assert "row_token_mismatch" in kinds
    assert "schema_mismatch" in kinds


def test_validate_corpus_reference_keys_resolve():
    studies, candidates = base_corpus()
    ref_key = ReportKey("s1", REF_SYSTEM)
    embeddings = EmbeddingSet("report", 2, {
        ref_key: ReportEmbedding(ref_key, np.ones(2, dtype=np.float32)),
    })
    report = validate_corpus(studies, candidates,
                             Sidecars(report_embeddings={"x": embeddings}), [])
    assert not report.by_kind("dangling_sidecar_key")
