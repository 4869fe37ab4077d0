"""Self-describing report files in CSV or JSON.

CSV layout::

    # header {"tool": ..., "config": {...}}
    # timestamp 2026-10-17T12:00:00+00:00
    n,functional,value,abs_error,nodes,converged[,truth]
    ...
    # footer {"limits": {...}, "checks": [...]}

Row numbers are written with 17 significant digits so they parse back to the
same doubles.  The timestamp has a line (CSV) or key (JSON) of its own and
is the only part that changes between identical runs.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .. import __version__

COLUMNS = ("n", "functional", "value", "abs_error", "nodes", "converged")
TOOL = "weakdet"


def fmt(x: float) -> str:
    return "%.17g" % x


@dataclass
class Report:
    command: str
    config: dict
    rows: list[dict] = field(default_factory=list)
    limits: dict = field(default_factory=dict)
    checks: list[dict] = field(default_factory=list)
    timestamp: str | None = None

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def add_row(self, n, functional, value, abs_error, nodes, converged, truth=None):
        row = {"n": int(n), "functional": str(functional), "value": float(value),
               "abs_error": float(abs_error), "nodes": int(nodes),
               "converged": bool(converged)}
        if truth is not None:
            row["truth"] = float(truth)
        self.rows.append(row)

    def header(self) -> dict:
        return {"tool": TOOL, "version": __version__, "command": self.command,
                "config": self.config}

    def footer(self) -> dict:
        return {"limits": self.limits, "checks": self.checks}

    def stamp(self) -> "Report":
        self.timestamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
        return self

    # ---------------------------------------------------------------- output

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("# header " + _dumps(self.header()) + "\n")
        buf.write(f"# timestamp {self.timestamp or ''}\n")
        cols = list(COLUMNS) + (["truth"] if any("truth" in r for r in self.rows) else [])
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(cols)
        for row in self.rows:
            out = []
            for col in cols:
                val = row.get(col)
                if col in ("value", "abs_error", "truth"):
                    out.append("" if val is None else fmt(val))
                elif col == "converged":
                    out.append("true" if val else "false")
                else:
                    out.append(val)
            writer.writerow(out)
        buf.write("# footer " + _dumps(self.footer()) + "\n")
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {"header": self.header(), "timestamp": self.timestamp,
               "rows": self.rows, "footer": self.footer()}
        return _dumps(doc, indent=2) + "\n"

    def dumps(self, fmt_name: str) -> str:
        if fmt_name == "csv":
            return self.to_csv()
        if fmt_name == "json":
            return self.to_json()
        raise ValueError(f"unknown report format {fmt_name!r}")

    def write(self, path, fmt_name: str | None = None) -> Path:
        path = Path(path)
        fmt_name = fmt_name or ("json" if path.suffix == ".json" else "csv")
        path.write_text(self.dumps(fmt_name))
        return path

    def summary(self) -> str:
        lines = [f"{TOOL} {self.command}: {len(self.rows)} rows"]
        for name, fit in self.limits.items():
            lines.append(f"  limit {name}: {fit['limit']:.10g} (fit residual {fit['residual']:.3g})")
        for chk in self.checks:
            mark = "PASS" if chk["passed"] else "FAIL"
            lines.append(f"  [{mark}] {chk['name']}: {chk.get('detail', '')}")
        return "\n".join(lines)


def _finite(obj):
    """JSON has no inf/nan; encode them as strings."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


def _dumps(obj, indent=None) -> str:
    return json.dumps(_finite(obj), indent=indent, sort_keys=True, allow_nan=False)


def _from_header(report_kwargs, header):
    if header.get("tool") != TOOL:
        raise ValueError("not a weakdet report")
    report_kwargs["command"] = header["command"]
    report_kwargs["config"] = header["config"]


def parse_csv(text: str) -> Report:
    kw: dict = {"rows": []}
    data_lines = []
    for line in text.splitlines():
        if line.startswith("# header "):
            _from_header(kw, json.loads(line[len("# header "):]))
        elif line.startswith("# timestamp"):
            kw["timestamp"] = line[len("# timestamp"):].strip() or None
        elif line.startswith("# footer "):
            foot = json.loads(line[len("# footer "):])
            kw["limits"] = foot.get("limits", {})
            kw["checks"] = foot.get("checks", [])
        elif line.startswith("#") or not line.strip():
            continue
        else:
            data_lines.append(line)
    if "command" not in kw:
        raise ValueError("report has no header line")
    for rec in csv.DictReader(data_lines):
        row = {"n": int(rec["n"]), "functional": rec["functional"],
               "value": float(rec["value"]), "abs_error": float(rec["abs_error"]),
               "nodes": int(rec["nodes"]), "converged": rec["converged"] == "true"}
        if rec.get("truth"):
            row["truth"] = float(rec["truth"])
        kw["rows"].append(row)
    return Report(**kw)


def parse_json(text: str) -> Report:
    doc = json.loads(text)
    kw: dict = {}
    _from_header(kw, doc["header"])
    foot = doc.get("footer", {})
    return Report(rows=doc.get("rows", []), limits=foot.get("limits", {}),
                  checks=foot.get("checks", []), timestamp=doc.get("timestamp"), **kw)


def read(path) -> Report:
    text = Path(path).read_text()
    return parse_json(text) if text.lstrip().startswith("{") else parse_csv(text)


def strip_timestamp(text: str) -> str:
    """Report text with the timestamp blanked, for regression comparisons."""
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        doc["timestamp"] = None
        return _dumps(doc, indent=2) + "\n"
    return "\n".join("# timestamp" if ln.startswith("# timestamp") else ln
                     for ln in text.splitlines()) + "\n"
