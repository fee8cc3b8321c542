"""Sidecar producer for the radeval evaluation engine.

Runs a local pretrained encoder or labeler over report files and writes
radeval's sidecar formats (token/report embedding files, label files).
The package performs no scoring and shares no code with the engine; the
file formats and the `radeval validate` command are the whole contract.
"""

from radeval_export.errors import ExportError, SpecError
from radeval_export.export import export
from radeval_export.spec import ExportSpec

__all__ = ["ExportError", "ExportSpec", "SpecError", "export"]
