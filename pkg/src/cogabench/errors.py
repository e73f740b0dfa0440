"""Shared exception types."""


class ConfigurationError(ValueError):
    """Invalid or inconsistent configuration values."""


class ProtocolError(RuntimeError):
    """A subprocess or chat endpoint violated the expected wire format."""


class ScriptExecutionError(RuntimeError):
    """An affordance script crashed, timed out, or returned bad output.

    Carries enough context for a critique loop to show the model what
    went wrong.
    """

    def __init__(self, message: str, stdout: str = "", stderr: str = ""):
        super().__init__(message)
        self.stdout = stdout
        self.stderr = stderr

    def detail(self) -> str:
        parts = [str(self)]
        if self.stdout.strip():
            parts.append("--- stdout ---\n" + self.stdout.strip())
        if self.stderr.strip():
            parts.append("--- stderr ---\n" + self.stderr.strip())
        return "\n".join(parts)


class DataError(ValueError):
    """Malformed stored data (demos, checkpoints, fixtures, registries)."""


class GenerationError(RuntimeError):
    """The script-generation pipeline could not produce a usable candidate."""


class TrainingError(RuntimeError):
    """Training could not proceed (bad shapes, exploding loss, empty buffer)."""


class ReportError(RuntimeError):
    """Report generation failed (missing runs, inconsistent CSVs)."""
