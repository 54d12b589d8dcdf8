"""Deterministic CSV/JSON writers with provenance headers."""

from __future__ import annotations

import hashlib
import json
from importlib import resources
from pathlib import Path

from . import __version__


def fmt(x) -> str:
    """Shortest round-tripping text for a float; keeps files byte-stable."""
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    return repr(float(x))


def digest(obj) -> str:
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def header_lines(meta: dict) -> list[str]:
    meta = {"code_version": __version__, **meta}
    return [f"# {k}: {json.dumps(meta[k], sort_keys=True, default=str)}" for k in sorted(meta)]


def write_csv(path, columns, rows, meta: dict | None = None) -> Path:
    path = Path(path)
    lines = header_lines(meta or {})
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_csv(path):
    """Return ``(meta, columns, rows)`` from a file written by :func:`write_csv`."""
    meta, cols, rows = {}, None, []
    for line in Path(path).read_text().splitlines():
        if line.startswith("# "):
            key, _, val = line[2:].partition(": ")
            meta[key] = json.loads(val)
        elif cols is None:
            cols = line.split(",")
        elif line:
            rows.append([float(v) for v in line.split(",")])
    return meta, cols, rows


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=str) + "\n")
    return path


def load_schema(name: str) -> dict:
    text = resources.files("mobility_ldp").joinpath("data", "schemas", name).read_text()
    return json.loads(text)


def validate_json(obj, schema_name: str) -> None:
    import jsonschema

    jsonschema.validate(obj, load_schema(schema_name))
