"""Deterministic evaluation engine for radiology report generation.

Scores candidate reports against references with lexical, embedding-based,
and clinically structured metrics; quantifies metric-expert agreement with
tie-corrected rank correlation and block-bootstrap confidence intervals;
compares systems with paired permutation/bootstrap tests; and runs a seeded
report-retrieval protocol. Neural model outputs (embeddings, labels, graphs)
enter as sidecar files; nothing here loads a model.
"""

__version__ = "0.1.0"
