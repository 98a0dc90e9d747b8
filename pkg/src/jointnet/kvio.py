"""Line-oriented ``key = value`` text: the one config/report syntax used by
config files, checkpoint headers, and metric reports.

Rules: one pair per line, ``#`` starts a comment, blank lines are ignored,
duplicate keys are an error. Writers emit ``key = value`` with single
spaces so identical inputs serialize to identical bytes.
"""

from __future__ import annotations

from typing import Iterable

from .errors import ConfigError


def parse_kv(text: str, source: str = "config") -> dict[str, str]:
    """Parse, preserving first-seen key order; errors carry line numbers."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"{source}:{lineno}: missing key before '='")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key '{key}'")
        values[key] = value
    return values


def format_kv(pairs: Iterable[tuple[str, object]]) -> str:
    return "".join(f"{key} = {value}\n" for key, value in pairs)
