"""Agreement statistics and significance tests.

Tie-corrected rank correlation (pooled over candidates or restricted to
within-study blocks), stratified block-bootstrap confidence intervals with
the aligned/misaligned/ns classification, paired sign-flip permutation
tests, and paired bootstrap CIs on mean differences.

All randomness flows through named substreams of one seed and is drawn
up front in a fixed order, so results are byte-identical across runs and
worker counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from radeval import _kernels
from radeval.model import ERROR_CATEGORIES, ErrorAnnotation, REF_SYSTEM, RowKey, ScoreMatrix, SECTIONS
from radeval.rng import substream


class TauResult(NamedTuple):
    tau_b: float
    concordant: int
    discordant: int
    n_pairs: int


def kendall_tau_b(x: Sequence[float], y: Sequence[float]) -> TauResult:
    """Tie-corrected rank correlation over all index pairs.

    tau_b = (C - D) / sqrt((n0 - n1)(n0 - n2)) with n0 = n(n-1)/2 and
    n1/n2 the tied-pair counts in x/y.

    Raises:
        ValueError: fewer than two points, or a zero denominator (all x
            tied or all y tied).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError("x and y must have equal length")
    n = x.size
    if n < 2:
        raise ValueError("need at least two points")
    concordant, discordant, tied_x, tied_y, _ = _kernels.kendall_counts(x, y)
    n0 = n * (n - 1) // 2
    denom = (n0 - tied_x) * (n0 - tied_y)
    if denom <= 0:
        raise ValueError("undefined tau_b")
    tau = (concordant - discordant) / math.sqrt(denom)
    return TauResult(tau, int(concordant), int(discordant), n0)


@dataclass(frozen=True)
class PairedSample:
    """Aligned (score, endpoint) observations, optionally blocked/stratified."""

    x: tuple[float, ...]
    y: tuple[float, ...]
    block_id: tuple[str, ...] | None = None
    stratum: tuple[str, ...] | None = None

    def __post_init__(self):
        n = len(self.x)
        if len(self.y) != n:
            raise ValueError("x and y must have equal length")
        if self.block_id is not None and len(self.block_id) != n:
            raise ValueError("block_id must match sample length")
        if self.stratum is not None:
            if len(self.stratum) != n:
                raise ValueError("stratum must match sample length")
            for s in self.stratum:
                if s not in SECTIONS:
                    raise ValueError(f"stratum must be one of {SECTIONS}, got {s!r}")

    def __len__(self) -> int:
        return len(self.x)


CLASSIFICATIONS = ("aligned", "misaligned", "ns")


def classify(ci_low: float, ci_high: float) -> str:
    """aligned: CI entirely below 0; misaligned: entirely above; else ns."""
    if ci_high < 0.0:
        return "aligned"
    if ci_low > 0.0:
        return "misaligned"
    return "ns"


@dataclass(frozen=True)
class AgreementResult:
    tau_b: float
    ci_low: float | None
    ci_high: float | None
    n: int
    n_pairs: int
    n_blocks: int | None = None
    classification: str | None = None
    dropped_blocks: tuple[str, ...] = ()
    skipped_resamples: int = 0

    def __post_init__(self):
        if self.ci_low is not None and self.ci_high is not None \
                and self.ci_low > self.ci_high:
            raise ValueError("ci_low must not exceed ci_high")


ENDPOINT_KINDS = ("total_significant", "total_insignificant", "category_significant")


@dataclass(frozen=True)
class Endpoint:
    """Selects one error-count column and one section scope from annotations."""

    kind: str = "total_significant"
    category: str | None = None
    section: str = "all"

    def __post_init__(self):
        if self.kind not in ENDPOINT_KINDS:
            raise ValueError(f"kind must be one of {ENDPOINT_KINDS}")
        if self.kind == "category_significant":
            if self.category not in ERROR_CATEGORIES:
                raise ValueError(
                    f"category must be one of {ERROR_CATEGORIES}, got {self.category!r}")
        elif self.category is not None:
            raise ValueError("category is only valid with kind=category_significant")
        if self.section not in ("all",) + SECTIONS:
            raise ValueError(f"section must be 'all' or one of {SECTIONS}")

    def value(self, annotation: ErrorAnnotation) -> float:
        if self.kind == "total_significant":
            return float(annotation.total_significant)
        if self.kind == "total_insignificant":
            return float(annotation.total_insignificant)
        return float(annotation.counts[self.category]["significant"])

    def label(self) -> str:
        base = self.category if self.kind == "category_significant" else self.kind
        return f"{base}/{self.section}"


def build_paired_sample(
    matrix: ScoreMatrix,
    annotations: Iterable[ErrorAnnotation],
    metric: str,
    endpoint: Endpoint,
) -> tuple[PairedSample, dict]:
    """Join one score column with one annotation endpoint.

    Candidates missing either side are dropped and listed in the audit dict;
    blocks are studies (one per section), strata are sections.
    """
    if metric not in matrix.columns:
        raise ValueError(f"unknown metric column {metric!r}")
    by_key: dict[tuple[str, str, str], ErrorAnnotation] = {}
    for ann in annotations:
        by_key[(ann.study_id, ann.system_id, ann.section)] = ann

    xs: list[float] = []
    ys: list[float] = []
    blocks: list[str] = []
    strata: list[str] = []
    missing_score: list[str] = []
    missing_annotation: list[str] = []
    for key in matrix.row_keys:
        if not key.study_id or key.system_id == REF_SYSTEM:
            continue  # corpus-aggregate or reference rows are not candidates
        if endpoint.section != "all" and key.section != endpoint.section:
            continue
        name = f"{key.study_id}/{key.system_id}/{key.section}"
        ann = by_key.get((key.study_id, key.system_id, key.section))
        score = matrix.get(key, metric)
        if score is None:
            missing_score.append(name)
            continue
        if ann is None:
            missing_annotation.append(name)
            continue
        xs.append(score)
        ys.append(endpoint.value(ann))
        blocks.append(f"{key.study_id}/{key.section}")
        strata.append(key.section)

    sample = PairedSample(x=tuple(xs), y=tuple(ys),
                          block_id=tuple(blocks), stratum=tuple(strata))
    audit = {
        "n_used": len(sample),
        "missing_score": missing_score,
        "missing_annotation": missing_annotation,
    }
    return sample, audit


def pooled_tau(sample: PairedSample) -> AgreementResult:
    """tau_b over all candidates jointly, ignoring block structure."""
    result = kendall_tau_b(sample.x, sample.y)
    return AgreementResult(
        tau_b=result.tau_b, ci_low=None, ci_high=None,
        n=len(sample), n_pairs=result.n_pairs)


def _block_indices(sample: PairedSample) -> dict[str, list[int]]:
    if sample.block_id is None:
        raise ValueError("sample has no block ids")
    groups: dict[str, list[int]] = {}
    for i, block in enumerate(sample.block_id):
        groups.setdefault(block, []).append(i)
    return groups


#: per-block accumulator layout: C, D, n1 (x ties), n2 (y ties), n0 (pairs)
_COUNT_FIELDS = 5


def _block_count_table(
    sample: PairedSample,
    groups: Mapping[str, list[int]],
) -> tuple[list[str], np.ndarray, list[str]]:
    """Per-block pair-count vectors plus the list of dropped block names.

    Blocks of size < 2 and blocks that are constant in both variables
    contribute no comparable pair and are dropped. Other blocks keep their
    full count vector; tie-only blocks still shape the denominator.
    """
    x = np.asarray(sample.x, dtype=np.float64)
    y = np.asarray(sample.y, dtype=np.float64)
    names: list[str] = []
    rows: list[tuple[int, int, int, int, int]] = []
    dropped: list[str] = []
    for block in groups:
        idx = groups[block]
        k = len(idx)
        if k < 2:
            dropped.append(block)
            continue
        bx = x[idx]
        by = y[idx]
        if np.all(bx == bx[0]) and np.all(by == by[0]):
            dropped.append(block)
            continue
        c, d, t1, t2, _ = _kernels.kendall_counts(bx, by)
        rows.append((c, d, t1, t2, k * (k - 1) // 2))
        names.append(block)
    table = np.array(rows, dtype=np.int64).reshape(len(rows), _COUNT_FIELDS)
    return names, table, dropped


def _tau_from_sums(sums: np.ndarray) -> float:
    c, d, t1, t2, n0 = (int(v) for v in sums)
    denom = (n0 - t1) * (n0 - t2)
    if denom <= 0:
        raise ValueError("undefined tau_b")
    return (c - d) / math.sqrt(denom)


def blocked_tau(sample: PairedSample) -> AgreementResult:
    """tau_b from pair counts accumulated over within-block pairs only."""
    groups = _block_indices(sample)
    names, table, dropped = _block_count_table(sample, groups)
    if not names:
        raise ValueError("no retained blocks")
    sums = table.sum(axis=0)
    tau = _tau_from_sums(sums)
    n = sum(len(groups[b]) for b in names)
    return AgreementResult(
        tau_b=tau, ci_low=None, ci_high=None,
        n=n, n_pairs=int(sums[4]), n_blocks=len(names),
        dropped_blocks=tuple(dropped))


BOOTSTRAP_STATISTICS = ("blocked", "pooled")


def _strata_of_blocks(sample: PairedSample,
                      groups: Mapping[str, list[int]]) -> dict[str, list[str]]:
    """stratum name -> block names, in first-appearance order."""
    if sample.stratum is None:
        return {"all": list(groups)}
    out: dict[str, list[str]] = {}
    for block, idx in groups.items():
        strata = {sample.stratum[i] for i in idx}
        if len(strata) > 1:
            raise ValueError(f"block {block!r} spans strata {sorted(strata)}")
        out.setdefault(next(iter(strata)), []).append(block)
    return out


def block_bootstrap_ci(
    sample: PairedSample,
    statistic: str = "blocked",
    resamples: int = 1000,
    level: float = 0.95,
    seed: int = 0,
) -> AgreementResult:
    """Percentile CI for tau_b by resampling blocks within section strata.

    Each resample draws, independently per stratum, as many blocks (with
    replacement) as the stratum holds, then recomputes the chosen statistic.
    Resamples with an undefined tau_b are skipped and counted.

    Raises:
        ValueError: more than half of the resamples undefined ("unstable
            statistic"), unknown statistic name, or degenerate inputs.
    """
    if statistic not in BOOTSTRAP_STATISTICS:
        raise ValueError(f"statistic must be one of {BOOTSTRAP_STATISTICS}")
    if resamples < 1:
        raise ValueError("resamples must be positive")
    if not (0.0 < level < 1.0):
        raise ValueError("level must be in (0, 1)")

    point = blocked_tau(sample) if statistic == "blocked" else pooled_tau(sample)

    groups = _block_indices(sample)
    strata = _strata_of_blocks(sample, groups)
    block_names = [b for stratum in sorted(strata) for b in strata[stratum]]
    counts = [len(strata[s]) for s in sorted(strata)]

    # All randomness is drawn here, in one fixed-order pass, before any
    # evaluation; the draw matrix maps positions to indices into block_names.
    rng = substream(seed, "block_bootstrap", statistic)
    draw_columns = []
    offset = 0
    for m in counts:
        draw_columns.append(offset + rng.integers(0, m, size=(resamples, m)))
        offset += m
    draws = np.concatenate(draw_columns, axis=1)

    skipped = 0
    if statistic == "blocked":
        name_to_row = {}
        table_names, table, _ = _block_count_table(sample, groups)
        for i, name in enumerate(table_names):
            name_to_row[name] = i
        # Row per block in draw order; dropped blocks contribute zeros.
        rows = np.zeros((len(block_names), _COUNT_FIELDS), dtype=np.int64)
        for i, name in enumerate(block_names):
            if name in name_to_row:
                rows[i] = table[name_to_row[name]]
        sums = rows[draws].sum(axis=1)  # (resamples, 5)
        numer = sums[:, 0] - sums[:, 1]
        factor1 = sums[:, 4] - sums[:, 2]
        factor2 = sums[:, 4] - sums[:, 3]
        valid = (factor1 > 0) & (factor2 > 0)
        skipped = int(resamples - valid.sum())
        kept = int(valid.sum())
        taus = numer[valid] / np.sqrt(factor1[valid] * factor2[valid])
    else:
        x = np.asarray(sample.x, dtype=np.float64)
        y = np.asarray(sample.y, dtype=np.float64)
        member_idx = [np.asarray(groups[name], dtype=np.intp) for name in block_names]
        values = []
        for r in range(resamples):
            chosen = np.concatenate([member_idx[j] for j in draws[r]])
            rx = x[chosen]
            ry = y[chosen]
            c, d, t1, t2, _ = _kernels.kendall_counts(rx, ry)
            n0 = rx.size * (rx.size - 1) // 2
            denom = (n0 - t1) * (n0 - t2)
            if denom <= 0:
                skipped += 1
                continue
            values.append((c - d) / math.sqrt(denom))
        kept = len(values)
        taus = np.asarray(values, dtype=np.float64)

    if skipped * 2 > resamples:
        raise ValueError("unstable statistic")
    if kept == 0:
        raise ValueError("unstable statistic")

    alpha = (1.0 - level) / 2.0
    ci_low = float(np.quantile(taus, alpha))
    ci_high = float(np.quantile(taus, 1.0 - alpha))
    return AgreementResult(
        tau_b=point.tau_b,
        ci_low=ci_low,
        ci_high=ci_high,
        n=point.n,
        n_pairs=point.n_pairs,
        n_blocks=point.n_blocks,
        classification=classify(ci_low, ci_high),
        dropped_blocks=point.dropped_blocks,
        skipped_resamples=skipped,
    )


class PermutationResult(NamedTuple):
    p_value: float
    observed: float
    iterations: int


def permutation_test(
    scores_a: Sequence[float],
    scores_b: Sequence[float],
    iterations: int = 10000,
    seed: int = 0,
) -> PermutationResult:
    """Paired two-sided sign-flip test on the mean difference.

    Each iteration flips every pair with probability 1/2;
    p = (#{|mean diff*| >= |observed|} + 1) / (iterations + 1).

    Raises:
        ValueError: fewer than two pairs or mismatched lengths.
    """
    a = np.asarray(scores_a, dtype=np.float64)
    b = np.asarray(scores_b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("paired samples must have equal length")
    n = a.size
    if n < 2:
        raise ValueError("need at least two pairs")
    if iterations < 1:
        raise ValueError("iterations must be positive")
    diffs = a - b
    observed_sum = float(diffs.sum())
    # Tiny relative slack so sign patterns reproducing the observed sum are
    # always counted despite summation-order rounding.
    threshold = abs(observed_sum) * (1.0 - 1e-12)

    rng = substream(seed, "permutation")
    count = 0
    chunk = max(1, 2_000_000 // n)
    done = 0
    while done < iterations:
        size = min(chunk, iterations - done)
        signs = rng.integers(0, 2, size=(size, n)) * 2 - 1
        sums = signs @ diffs
        count += int(np.count_nonzero(np.abs(sums) >= threshold))
        done += size
    p = (count + 1) / (iterations + 1)
    return PermutationResult(p_value=p, observed=observed_sum / n, iterations=iterations)


class BootstrapDiffResult(NamedTuple):
    mean_diff: float
    ci_low: float
    ci_high: float


def bootstrap_diff_ci(
    scores_a: Sequence[float],
    scores_b: Sequence[float],
    resamples: int = 1000,
    level: float = 0.95,
    seed: int = 0,
) -> BootstrapDiffResult:
    """Percentile CI for mean(a) - mean(b), resampling paired studies."""
    a = np.asarray(scores_a, dtype=np.float64)
    b = np.asarray(scores_b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("paired samples must have equal length")
    n = a.size
    if n < 2:
        raise ValueError("need at least two pairs")
    if not (0.0 < level < 1.0):
        raise ValueError("level must be in (0, 1)")
    diffs = a - b
    rng = substream(seed, "bootstrap_diff")
    idx = rng.integers(0, n, size=(resamples, n))
    means = diffs[idx].mean(axis=1)
    alpha = (1.0 - level) / 2.0
    return BootstrapDiffResult(
        mean_diff=float(diffs.mean()),
        ci_low=float(np.quantile(means, alpha)),
        ci_high=float(np.quantile(means, 1.0 - alpha)),
    )
