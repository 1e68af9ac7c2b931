"""Flat key-value configuration files for the experiment runner.

Grammar: one ``key = value`` pair per line; blank lines and lines starting
with ``#`` are ignored, as is anything after an inline ``#``.  List-valued
keys take comma-separated entries.
"""
from __future__ import annotations

from .errors import InvalidConfigError


def parse_config(text: str) -> dict[str, list[str]]:
    """Parse config text into raw string lists keyed by option name."""
    out: dict[str, list[str]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise InvalidConfigError(f"line {lineno}: empty key")
        items = [v.strip() for v in value.split(",")]
        if any(not v for v in items):
            raise InvalidConfigError(f"line {lineno}: empty value in {raw!r}")
        out[key] = items
    return out


def load_config(path: str) -> dict[str, list[str]]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())
