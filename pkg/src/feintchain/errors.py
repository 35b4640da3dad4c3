"""Exception types shared across the package."""
from __future__ import annotations


class FeintChainError(Exception):
    """Base class for errors raised by this package."""


class ParseError(FeintChainError, ValueError):
    """A fast-alert line could not be parsed.

    Carries the byte offset into the line where parsing failed and a short
    reason naming the malformed component.
    """

    def __init__(self, reason: str, offset: int, line_no: int | None = None):
        self.reason = reason
        self.offset = offset
        self.line_no = line_no
        where = f"line {line_no}, " if line_no is not None else ""
        super().__init__(f"{reason} ({where}byte offset {offset})")


class SchemaError(FeintChainError, ValueError):
    """A CSV file does not match the expected flow schema."""


class FormatError(FeintChainError, ValueError):
    """A persisted artifact is corrupt or has an unsupported version."""


class TrainingError(FeintChainError, RuntimeError):
    """Training produced a non-finite loss."""


class ConvergenceError(FeintChainError, RuntimeError):
    """The SMO optimizer hit its iteration cap before reaching tolerance."""


class ConfigError(FeintChainError, ValueError):
    """Pipeline configuration is invalid; collects every violation."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__(
            "invalid configuration:\n" + "\n".join(f"  - {v}" for v in self.violations)
        )


class PrerequisiteError(FeintChainError, RuntimeError):
    """A pipeline command was run before the commands producing its inputs."""

    def __init__(self, command: str, missing: list[str]):
        self.command = command
        self.missing = list(missing)
        super().__init__(
            f"`{command}` is missing prerequisite artifacts; "
            f"run {', '.join(f'`{m}`' for m in self.missing)} first"
        )
