"""Verification reports: flat rows plus run metadata, rendered as JSON or text."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

# columns shown by the text renderer, in order
_COLUMNS = ["suite", "name", "params", "measured", "expected", "bound", "ratio", "rounds", "max_ulp", "source", "ok"]

# row keys that vary from run to run
TIMING_KEYS = ("seconds",)


@dataclass
class Report:
    meta: Dict[str, Any] = field(default_factory=dict)
    rows: List[Dict[str, Any]] = field(default_factory=list)

    def add(self, suite: str, name: str, ok: bool, source: str, **cols) -> Dict[str, Any]:
        row = {"suite": suite, "name": name, "ok": bool(ok), "source": source}
        row.update({k: _plain(v) for k, v in cols.items()})
        self.rows.append(row)
        return row

    def extend(self, other: "Report") -> None:
        self.rows.extend(other.rows)

    @property
    def ok(self) -> bool:
        return all(r["ok"] for r in self.rows)

    @property
    def failures(self) -> List[Dict[str, Any]]:
        return [r for r in self.rows if not r["ok"]]

    def to_dict(self, timing: bool = True) -> dict:
        rows = self.rows if timing else [{k: v for k, v in r.items() if k not in TIMING_KEYS} for r in self.rows]
        return {"meta": self.meta, "rows": rows, "verdict": "pass" if self.ok else "fail"}

    def to_json(self, timing: bool = True) -> str:
        return json.dumps(self.to_dict(timing), indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        cols = [c for c in _COLUMNS if any(c in r for r in self.rows)]
        extra = sorted({k for r in self.rows for k in r} - set(_COLUMNS))
        cols += extra
        table = [cols] + [[_fmt(r.get(c)) for c in cols] for r in self.rows]
        widths = [max(len(row[i]) for row in table) for i in range(len(cols))]
        lines = ["  ".join(f"{k}={v}" for k, v in sorted(self.meta.items()))]
        for i, row in enumerate(table):
            lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
            if i == 0:
                lines.append("  ".join("-" * w for w in widths))
        lines.append(f"verdict: {'PASS' if self.ok else 'FAIL'} ({len(self.rows) - len(self.failures)}/{len(self.rows)} rows ok)")
        return "\n".join(lines) + "\n"

    def render(self, fmt: str) -> str:
        if fmt == "json":
            return self.to_json()
        if fmt == "text":
            return self.to_text()
        raise ValueError(f"unknown report format {fmt!r}")


def _plain(v):
    # numpy scalars -> python, so json.dumps works
    if hasattr(v, "item") and not isinstance(v, (list, dict, str)):
        v = v.item()
    if isinstance(v, float):
        return round(v, 6)
    return v


def _fmt(v: Optional[Any]) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "ok" if v else "FAIL"
    if isinstance(v, float):
        return f"{v:.4g}"
    if isinstance(v, dict):
        return ",".join(f"{k}={x}" for k, x in v.items())
    return str(v)
