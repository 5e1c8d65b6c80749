"""Trace export/import in a self-describing JSON document.

Layout::

    {"format": "capifsim-traces", "version": 1,
     "traces": [{"traceId": "...", "spans": [<span record>, ...]}, ...]}
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable

from ..errors import CapifSimError
from .span import SchemaViolation, Span, Trace

EXPORT_FORMAT = "capifsim-traces"
EXPORT_VERSION = 1


class IoFailure(CapifSimError, OSError):
    """The export file could not be written or read back."""


def traces_document(traces: Iterable[Trace]) -> dict:
    return {
        "format": EXPORT_FORMAT,
        "version": EXPORT_VERSION,
        "traces": [t.to_dict() for t in traces],
    }


def export_traces(traces: Iterable[Trace], destination: str | Path) -> Path:
    path = Path(destination)
    text = json.dumps(traces_document(traces), indent=1, sort_keys=True) + "\n"
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return path


def import_traces(source: str | Path) -> list[Trace]:
    path = Path(source)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise IoFailure(f"{path} is not JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != EXPORT_FORMAT:
        raise IoFailure(f"{path} is not a {EXPORT_FORMAT} document")
    out = []
    for entry in doc.get("traces", []):
        try:
            spans = [Span.from_dict(s) for s in entry["spans"]]
        except (KeyError, TypeError, SchemaViolation) as exc:
            raise IoFailure(f"{path}: bad trace entry: {exc}") from exc
        out.append(Trace(entry["traceId"], spans))
    return out
