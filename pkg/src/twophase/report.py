"""Render lists of flat records as aligned text, CSV or JSON."""

from __future__ import annotations

import csv
import io
import json
import math
from typing import Sequence

FORMATS = ("text", "csv", "json")


def _cell(value, digits: int) -> str:
    if value is None:
        return "n/a"
    if isinstance(value, bool):
        return "yes" if value else ""
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return f"{value:.{digits}f}"
    return str(value)


def render_text(records: Sequence[dict], digits: int = 4) -> str:
    if not records:
        return ""
    cols = list(records[0])
    cells = [[_cell(r[c], digits) for c in cols] for r in records]
    widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(cols)]
    numeric = [all(isinstance(r[c], (int, float)) or r[c] is None for r in records) for c in cols]

    def line(items):
        parts = [s.rjust(w) if num else s.ljust(w) for s, w, num in zip(items, widths, numeric)]
        return "  ".join(parts).rstrip()

    out = [line(cols), line("-" * w for w in widths)]
    out.extend(line(row) for row in cells)
    return "\n".join(out) + "\n"


def render_csv(records: Sequence[dict]) -> str:
    if not records:
        return ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(records[0]), lineterminator="\n")
    w.writeheader()
    for r in records:
        w.writerow({k: ("" if v is None else repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def render_json(payload) -> str:
    return json.dumps(payload, indent=2, allow_nan=True) + "\n"


def render(records: Sequence[dict], fmt: str, meta: dict | None = None) -> str:
    if fmt == "text":
        return render_text(records)
    if fmt == "csv":
        return render_csv(records)
    if fmt == "json":
        return render_json({**(meta or {}), "rows": list(records)})
    raise ValueError(f"unknown format {fmt!r}; choose from {', '.join(FORMATS)}")
