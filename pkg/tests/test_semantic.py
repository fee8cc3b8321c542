"""Embedding similarity scores against hand arithmetic and a brute-force oracle."""

import math

import numpy as np
import pytest

from radeval.metrics.semantic import (
    BertScoreResult,
    IdfWeights,
    SimilarityConfig,
    bertscore,
    compute_idf,
    report_cosine,
)
from radeval.model import ReportEmbedding, ReportKey, TokenEmbeddingSet

KEY = ReportKey("s1", "m")


def tok(tokens, rows):
    return TokenEmbeddingSet(KEY, tuple(tokens), np.asarray(rows, dtype=np.float32))


def test_idf_formula():
    idf = compute_idf([["a", "b"], ["a", "c"], ["a"]])
    assert idf.weight("a") == pytest.approx(math.log(4 / 4), abs=1e-12)
    assert idf.weight("b") == pytest.approx(math.log(4 / 2), abs=1e-12)
    assert idf.weight("never_seen") == pytest.approx(math.log(4), abs=1e-12)
    # repeats inside one document count once
    idf2 = compute_idf([["a", "a"]])
    assert idf2.weight("a") == pytest.approx(math.log(2 / 2), abs=1e-12)


def test_bertscore_pinned_arithmetic():
    cand = tok(["x"], [[1.0, 0.0]])
    ref = tok(["x", "y"], [[1.0, 0.0], [0.0, 1.0]])
    got = bertscore(cand, ref)
    assert got.precision == pytest.approx(1.0, abs=1e-12)
    assert got.recall == pytest.approx(0.5, abs=1e-12)
    assert got.f1 == pytest.approx(2 / 3, abs=1e-12)


def test_bertscore_identity_one_hot_is_exact():
    emb = tok(["a", "b"], [[1.0, 0.0], [0.0, 1.0]])
    assert bertscore(emb, emb) == BertScoreResult(1.0, 1.0, 1.0)


def test_bertscore_scale_invariance():
    cand = tok(["x", "y"], [[3.0, 4.0], [1.0, 2.0]])
    ref = tok(["u"], [[2.0, -1.0]])
    scaled = tok(["x", "y"], [[30.0, 40.0], [0.5, 1.0]])
    a = bertscore(cand, ref)
    b = bertscore(scaled, ref)
    assert a.precision == pytest.approx(b.precision, abs=1e-12)
    assert a.recall == pytest.approx(b.recall, abs=1e-12)


def test_bertscore_swap_symmetry():
    cand = tok(["x", "y"], [[1.0, 1.0], [0.0, 1.0]])
    ref = tok(["u", "v", "w"], [[1.0, 0.0], [0.5, 0.5], [-1.0, 0.3]])
    forward = bertscore(cand, ref)
    backward = bertscore(ref, cand)
    assert forward.precision == pytest.approx(backward.recall, abs=1e-12)
    assert forward.recall == pytest.approx(backward.precision, abs=1e-12)


def test_bertscore_idf_weighting():
    cfg = SimilarityConfig(idf_weighting=True)
    cand = tok(["a", "b"], [[1.0, 0.0], [0.0, 1.0]])
    ref = tok(["a", "b"], [[1.0, 0.0], [1.0, 0.0]])
    # equal idf weights reduce to the uniform mean
    equal = IdfWeights(weights={"a": 2.0, "b": 2.0}, unseen=2.0)
    weighted = bertscore(cand, ref, cfg, idf=equal)
    uniform = bertscore(cand, ref)
    assert weighted.recall == pytest.approx(uniform.recall, abs=1e-12)

    # weight mass moved onto 'a' pulls precision toward a's best match
    skewed = IdfWeights(weights={"a": 3.0, "b": 1.0}, unseen=1.0)
    got = bertscore(cand, ref, cfg, idf=skewed)
    assert got.precision == pytest.approx(0.75 * 1.0 + 0.25 * 0.0, abs=1e-12)

    with pytest.raises(ValueError):
        bertscore(cand, ref, cfg, idf=None)


def test_bertscore_idf_plain_mapping_and_zero_mass():
    cfg = SimilarityConfig(idf_weighting=True)
    cand = tok(["a"], [[1.0, 0.0]])
    ref = tok(["a"], [[1.0, 0.0]])
    # a plain dict works; tokens missing from it weigh zero
    got = bertscore(cand, ref, cfg, idf={"a": 1.0})
    assert got.f1 == pytest.approx(1.0, abs=1e-12)
    # all-zero mass falls back to uniform instead of dividing by zero
    got = bertscore(cand, ref, cfg, idf={})
    assert got.f1 == pytest.approx(1.0, abs=1e-12)


def test_bertscore_rescale_then_clamp():
    cand = tok(["x"], [[1.0, 0.0]])
    ref = tok(["x", "y"], [[1.0, 0.0], [-1.0, 0.0]])
    cfg = SimilarityConfig(rescale_baseline=0.5)
    raw = bertscore(cand, ref)
    assert raw.precision == pytest.approx(1.0, abs=1e-12)
    assert raw.recall == pytest.approx(0.0, abs=1e-12)

    rescaled = bertscore(cand, ref, cfg)
    assert rescaled.precision == pytest.approx(1.0, abs=1e-12)
    assert rescaled.recall == pytest.approx(-1.0, abs=1e-12)

    clamped = bertscore(cand, ref, SimilarityConfig(rescale_baseline=0.5,
                                                    clamp_negative=True))
    assert clamped.recall == 0.0

    with pytest.raises(ValueError):
        SimilarityConfig(rescale_baseline=1.0)
    with pytest.raises(ValueError):
        SimilarityConfig(rescale_baseline=-0.1)


def test_bertscore_sum_matching():
    cand = tok(["x"], [[1.0, 0.0]])
    ref = tok(["u", "v"], [[1.0, 0.0], [0.0, 1.0]])
    got = bertscore(cand, ref, matching="sum")
    # candidate token's mean cosine over both reference tokens
    assert got.precision == pytest.approx(0.5, abs=1e-12)
    with pytest.raises(ValueError):
        bertscore(cand, ref, matching="hungarian")


def test_bertscore_errors():
    good = tok(["a"], [[1.0, 0.0]])
    with pytest.raises(ValueError, match="no tokens"):
        bertscore(tok([], np.zeros((0, 2))), good)
    with pytest.raises(ValueError, match="dim"):
        bertscore(good, tok(["a"], [[1.0, 0.0, 0.0]]))
    with pytest.raises(ValueError, match="degenerate"):
        bertscore(tok(["a"], [[0.0, 0.0]]), good)
    mismatched = TokenEmbeddingSet(KEY, ("a", "b"),
                                   np.ones((3, 2), dtype=np.float32))
    with pytest.raises(ValueError):
        bertscore(mismatched, good)


def oracle_bertscore(cand_rows, ref_rows, cand_weights, ref_weights):
    def norm(row):
        scale = math.sqrt(sum(v * v for v in row))
        return [v / scale for v in row]

    cand_rows = [norm(r) for r in cand_rows]
    ref_rows = [norm(r) for r in ref_rows]

    def best(row, pool):
        return max(sum(a * b for a, b in zip(row, other)) for other in pool)

    p_num = sum(w * best(row, ref_rows) for w, row in zip(cand_weights, cand_rows))
    r_num = sum(w * best(row, cand_rows) for w, row in zip(ref_weights, ref_rows))
    precision = p_num / sum(cand_weights)
    recall = r_num / sum(ref_weights)
    denom = precision + recall
    f1 = 2 * precision * recall / denom if denom > 0 else 0.0
    return precision, recall, f1


def test_bertscore_random_cases_match_oracle():
    rng = np.random.default_rng(41)
    for _ in range(150):
        nc, nr, dim = rng.integers(1, 5), rng.integers(1, 5), rng.integers(2, 4)
        cand_rows = rng.normal(size=(nc, dim))
        ref_rows = rng.normal(size=(nr, dim))
        cand = tok([f"c{i}" for i in range(nc)], cand_rows)
        ref = tok([f"r{i}" for i in range(nr)], ref_rows)
        # the scorer sees float32 payloads; the oracle must too
        cand_rows = cand.vectors.astype(float).tolist()
        ref_rows = ref.vectors.astype(float).tolist()

        got = bertscore(cand, ref)
        want = oracle_bertscore(cand_rows, ref_rows, [1.0] * nc, [1.0] * nr)
        assert got.precision == pytest.approx(want[0], abs=1e-9)
        assert got.recall == pytest.approx(want[1], abs=1e-9)
        assert got.f1 == pytest.approx(want[2], abs=1e-9)

        weights = {t: float(w) for t, w in
                   zip(list(cand.tokens) + list(ref.tokens),
                       rng.uniform(0.1, 2.0, size=nc + nr))}
        got = bertscore(cand, ref, SimilarityConfig(idf_weighting=True), idf=weights)
        want = oracle_bertscore(cand_rows, ref_rows,
                                [weights[t] for t in cand.tokens],
                                [weights[t] for t in ref.tokens])
        assert got.f1 == pytest.approx(want[2], abs=1e-9)


def test_report_cosine_pinned():
    a = ReportEmbedding(KEY, np.array([1.0, 0.0], dtype=np.float32))
    b = ReportEmbedding(KEY, np.array([1.0, 1.0], dtype=np.float32))
    assert report_cosine(a, b) == pytest.approx(1 / math.sqrt(2), abs=1e-7)
    assert report_cosine(a, a) == 1.0

    opposite = ReportEmbedding(KEY, np.array([-2.0, 0.0], dtype=np.float32))
    assert report_cosine(a, opposite) == pytest.approx(-1.0, abs=1e-12)


def test_report_cosine_errors():
    a = ReportEmbedding(KEY, np.array([1.0, 0.0], dtype=np.float32))
    with pytest.raises(ValueError, match="dim"):
        report_cosine(a, ReportEmbedding(KEY, np.ones(3, dtype=np.float32)))
    with pytest.raises(ValueError, match="degenerate"):
        report_cosine(a, ReportEmbedding(KEY, np.zeros(2, dtype=np.float32)))


def test_report_cosine_stays_in_range():
    rng = np.random.default_rng(43)
    for _ in range(100):
        a = ReportEmbedding(KEY, rng.normal(size=6).astype(np.float32) + 1e-3)
        b = ReportEmbedding(KEY, rng.normal(size=6).astype(np.float32) + 1e-3)
        assert -1.0 <= report_cosine(a, b) <= 1.0
