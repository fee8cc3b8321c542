class SpecError(ValueError):
    """Invalid export spec or command-line arguments (exit code 2)."""


class ExportError(RuntimeError):
    """Input, model, or encoding failure during an export run (exit code 1)."""
