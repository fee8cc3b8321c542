"""Export run description and validation."""

from __future__ import annotations

import os
from dataclasses import dataclass

from radeval_export.errors import SpecError

KINDS = ("token", "report", "labels")
POOLINGS = ("cls", "mean")


@dataclass(frozen=True)
class ExportSpec:
    """Everything that determines an export byte-for-byte.

    `inputs` are report files in the engine's studies/candidates formats;
    records keep their input order in the output. `layer` indexes the
    encoder's hidden-state stack (0 = embedding layer, -1 = last layer).
    `pooling` applies to report-kind exports, `threshold` to labels-kind
    ones.
    """

    model: str
    kind: str
    inputs: tuple[str, ...]
    output: str
    pooling: str = "mean"
    layer: int = -1
    batch_size: int = 8
    threshold: float = 0.5

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SpecError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.pooling not in POOLINGS:
            raise SpecError(f"pooling must be one of {POOLINGS}, got {self.pooling!r}")
        if self.batch_size < 1:
            raise SpecError("batch_size must be >= 1")
        if not self.inputs:
            raise SpecError("at least one input file is required")
        if not self.output:
            raise SpecError("an output path is required")
        if not (0.0 < self.threshold < 1.0):
            raise SpecError("threshold must be in (0, 1)")
        for path in self.inputs:
            if not os.path.isfile(path):
                raise SpecError(f"input file not found: {path}")
