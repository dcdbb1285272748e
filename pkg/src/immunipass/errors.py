"""Exception hierarchy and the verdict value shared by the verifying operations."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any


class PassportError(Exception):
    """Base class for every error raised by this package."""


class InvalidBody(PassportError):
    pass


class NonCanonicalValue(PassportError):
    pass


class MalformedDid(PassportError):
    pass


class InvalidKey(PassportError):
    pass


class NotFound(PassportError):
    pass


class ResolutionFailure(PassportError):
    pass


class RegistryError(PassportError):
    pass


class InsufficientQuorum(RegistryError):
    pass


class InvalidEntry(RegistryError):
    pass


class StaleVersion(RegistryError):
    pass


class MalformedChain(RegistryError):
    pass


class DecryptionFailure(PassportError):
    pass


class MissingCredential(PassportError):
    pass


class InvalidChallenge(PassportError):
    pass


class ScriptParseError(PassportError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class ActionFailure(PassportError):
    def __init__(self, index: int, message: str):
        self.index = index
        super().__init__(f"action {index}: {message}")


@dataclass(frozen=True)
class Verdict:
    """Accept or reject, with a machine-readable reason on rejection.

    ``height`` is set by chain verification to the first offending block.
    ``display`` carries the claim view a verifier would render after
    accepting a credential.
    """

    accepted: bool
    reason: str | None = None
    detail: str = ""
    height: int | None = None
    display: dict[str, Any] = field(default_factory=dict, compare=False)

    @classmethod
    def accept(cls, **kwargs: Any) -> "Verdict":
        return cls(True, **kwargs)

    @classmethod
    def reject(cls, reason: str, detail: str = "", **kwargs: Any) -> "Verdict":
        return cls(False, reason, detail, **kwargs)

    def __bool__(self) -> bool:
        return self.accepted

    def __str__(self) -> str:
        if self.accepted:
            return "Accept"
        where = f" at block {self.height}" if self.height is not None else ""
        return f"Reject({self.reason}){where}"
