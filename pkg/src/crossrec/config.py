"""Flat key-value run configuration files.

Schema: one `key = value` assignment per line, `#` starts a comment, blank
lines ignored. Values parse as bool (`true`/`false`), int, float,
comma-separated list of scalars, or plain string, in that order. Keys are
dotted lowercase. Command-line flags override file values; the effective
config is echoed back into the run directory, and its digest is what makes
runs comparable and resumable.
"""

from __future__ import annotations

import hashlib
from pathlib import Path


def parse_value(token: str):
    token = token.strip()
    if "," in token:
        return [parse_value(part) for part in token.split(",")]
    lowered = token.lower()
    if lowered == "true":
        return True
    if lowered == "false":
        return False
    try:
        return int(token)
    except ValueError:
        pass
    try:
        return float(token)
    except ValueError:
        pass
    return token


def format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ",".join(format_value(v) for v in value)
    return str(value)


def load_config_file(path) -> dict:
    path = Path(path)
    out: dict = {}
    with path.open("r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            key = key.strip()
            if not key:
                raise ValueError(f"{path}:{lineno}: empty key")
            out[key] = parse_value(value)
    return out


def dump_config(config: dict) -> str:
    lines = [f"{key} = {format_value(config[key])}" for key in sorted(config)]
    return "\n".join(lines) + "\n"


def save_config_file(path, config: dict) -> None:
    Path(path).write_text(dump_config(config), encoding="utf-8")


def config_digest(config: dict) -> str:
    """Stable digest of the canonical serialization."""
    return hashlib.sha256(dump_config(config).encode("utf-8")).hexdigest()[:16]
