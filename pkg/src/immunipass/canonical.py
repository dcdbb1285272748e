"""Deterministic canonical text profile used for every signed or hashed document.

The profile is JSON restricted to objects, arrays, strings, booleans and
integers; keys sorted by code point, no insignificant whitespace, strings in
Unicode NFC, emitted as UTF-8. Dates, timestamps and octets have one fixed
literal form each (see the ``format_*`` helpers). A decoder only accepts text
that re-encodes to the identical bytes, so parse/encode round-trips are exact.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import unicodedata
from datetime import date, datetime, timezone
from typing import Any, Callable

from .errors import NonCanonicalValue

DIGEST_SIZE = 32

_DATE_RE = re.compile(r"\d{4}-\d{2}-\d{2}\Z")
_DATETIME_RE = re.compile(r"\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}Z\Z")
_HEX_RE = re.compile(r"(?:[0-9a-f]{2})*\Z")


def digest(*parts: bytes) -> bytes:
    """SHA-256 over the concatenation of ``parts``."""
    h = hashlib.sha256()
    for part in parts:
        h.update(part)
    return h.digest()


def _check(obj: Any, path: str = "$") -> None:
    if isinstance(obj, dict):
        for key, value in obj.items():
            if not isinstance(key, str):
                raise NonCanonicalValue(f"{path}: non-string key {key!r}")
            _check(key, path)
            _check(value, f"{path}.{key}")
    elif isinstance(obj, (list, tuple)):
        for i, value in enumerate(obj):
            _check(value, f"{path}[{i}]")
    elif isinstance(obj, str):
        if unicodedata.normalize("NFC", obj) != obj:
            raise NonCanonicalValue(f"{path}: string is not NFC normalized")
    elif isinstance(obj, bool) or isinstance(obj, int):
        pass
    else:
        raise NonCanonicalValue(f"{path}: unsupported value type {type(obj).__name__}")


def encode(obj: Any) -> bytes:
    _check(obj)
    return encode_unchecked(obj)


def encode_unchecked(obj: Any) -> bytes:
    """:func:`encode` without the NFC/type walk, for hot loops over pre-checked templates."""
    return json.dumps(
        obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False
    ).encode("utf-8")


def dumps(obj: Any) -> str:
    return encode(obj).decode("utf-8")


def _no_duplicates(pairs: list[tuple[str, Any]]) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for key, value in pairs:
        if key in out:
            raise NonCanonicalValue(f"duplicate key {key!r}")
        out[key] = value
    return out


def _no_float(text: str) -> Any:
    raise NonCanonicalValue(f"non-integer number {text}")


def decode(data: bytes | str) -> Any:
    """Parse canonical text; anything that would not re-encode identically is rejected."""
    raw = data.encode("utf-8") if isinstance(data, str) else bytes(data)
    try:
        obj = json.loads(
            raw.decode("utf-8"),
            object_pairs_hook=_no_duplicates,
            parse_float=_no_float,
            parse_constant=_no_float,
        )
    except UnicodeDecodeError as exc:
        raise NonCanonicalValue(f"not UTF-8: {exc}") from None
    except json.JSONDecodeError as exc:
        raise NonCanonicalValue(f"not canonical text: {exc}") from None
    if obj is None or encode(obj) != raw:
        raise NonCanonicalValue("text is not in canonical form")
    return obj


def format_date(value: date) -> str:
    if isinstance(value, datetime):
        raise NonCanonicalValue("expected a calendar date, got a timestamp")
    return value.isoformat()


def parse_date(text: str) -> date:
    if not isinstance(text, str) or not _DATE_RE.match(text):
        raise NonCanonicalValue(f"malformed date {text!r}")
    try:
        return date.fromisoformat(text)
    except ValueError as exc:
        raise NonCanonicalValue(f"malformed date {text!r}: {exc}") from None


def format_datetime(value: datetime) -> str:
    if value.tzinfo is None or value.utcoffset() != timezone.utc.utcoffset(None):
        raise NonCanonicalValue(f"timestamp {value!r} is not UTC")
    if value.microsecond:
        raise NonCanonicalValue(f"timestamp {value!r} has sub-second precision")
    return value.strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_datetime(text: str) -> datetime:
    if not isinstance(text, str) or not _DATETIME_RE.match(text):
        raise NonCanonicalValue(f"malformed timestamp {text!r}")
    try:
        return datetime.strptime(text, "%Y-%m-%dT%H:%M:%SZ").replace(tzinfo=timezone.utc)
    except ValueError as exc:
        raise NonCanonicalValue(f"malformed timestamp {text!r}: {exc}") from None


def utc(year: int, month: int, day: int, hour: int = 0, minute: int = 0, second: int = 0) -> datetime:
    return datetime(year, month, day, hour, minute, second, tzinfo=timezone.utc)


def to_hex(data: bytes) -> str:
    return bytes(data).hex()


def from_hex(text: str, size: int | None = None) -> bytes:
    if not isinstance(text, str) or not _HEX_RE.match(text):
        raise NonCanonicalValue(f"malformed hex octets {text!r:.40}")
    out = bytes.fromhex(text)
    if size is not None and len(out) != size:
        raise NonCanonicalValue(f"expected {size} octets, got {len(out)}")
    return out


Entropy = Callable[[int], bytes]


def system_entropy(n: int) -> bytes:
    return os.urandom(n)


class SeededEntropy:
    """Deterministic byte stream for reproducible runs.

    SHA-256 in counter mode over the seed. Only for simulations where two
    runs with the same seed must produce byte-identical artifacts; live use
    should pass :func:`system_entropy`.
    """

    def __init__(self, seed: int | bytes | str):
        if isinstance(seed, int):
            seed = seed.to_bytes(16, "big", signed=True)
        elif isinstance(seed, str):
            seed = seed.encode("utf-8")
        self._key = digest(b"immunipass-drbg", seed)
        self._counter = 0

    def __call__(self, n: int) -> bytes:
        out = bytearray()
        while len(out) < n:
            out += digest(self._key, self._counter.to_bytes(8, "big"))
            self._counter += 1
        return bytes(out[:n])
