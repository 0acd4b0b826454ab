"""Report objects and their JSON / text renderings.

JSON output is deterministic: keys are sorted, floats use the shortest
representation that round-trips, and infinite values become ``null`` with an
``"infinite": true`` flag next to them.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from capq import __version__
from capq.config import SCHEMA_VERSION

TOOL_NAME = "capq"


def clean(obj):
    """Recursively convert to JSON-safe builtins; non-finite floats become None."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else None
    return obj


def infinite_keys(mapping):
    return sorted(k for k, v in mapping.items()
                  if isinstance(v, (float, np.floating)) and math.isinf(v))


def index_entry(name, label, value, components=None, notes=None, params=None, interval=None):
    """One row of the ``indices`` list."""
    components = dict(components or {})
    value = None if value is None else float(value)
    entry = {
        "name": name,
        "label": label,
        "value": value,
        "infinite": value is not None and math.isinf(value),
        "components": components,
        "notes": list(notes or []),
        "params": dict(params or {}),
    }
    inf_components = infinite_keys(components)
    if inf_components:
        entry["infinite_components"] = inf_components
    if interval is not None:
        entry["interval"] = interval
    return entry


@dataclass
class IndexReport:
    command: str
    config: dict
    indices: list = field(default_factory=list)
    defaults_applied: list = field(default_factory=list)
    seeds: dict = field(default_factory=dict)
    data: dict | None = None
    model: dict | None = None
    sections: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def to_dict(self):
        out = {
            "schema_version": SCHEMA_VERSION,
            "tool": {"name": TOOL_NAME, "version": __version__},
            "command": self.command,
            "input": {"config": self.config, "data": self.data},
            "defaults_applied": list(self.defaults_applied),
            "seeds": dict(self.seeds),
            "model": self.model,
            "indices": self.indices,
            "warnings": list(self.warnings),
        }
        out.update(self.sections)
        return clean(out)


def render_json(report) -> bytes:
    payload = report.to_dict() if isinstance(report, IndexReport) else clean(report)
    return (json.dumps(payload, sort_keys=True, indent=2, allow_nan=False, ensure_ascii=False)
            + "\n").encode("utf-8")


def _fmt(value):
    if value is None:
        return "-"
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def _table(headers, rows):
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(headers)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip(),
             "  ".join("-" * w for w in widths)]
    for row in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
    return lines


def render_text(report) -> bytes:
    d = report.to_dict() if isinstance(report, IndexReport) else clean(report)
    lines = [f"{d['tool']['name']} {d['tool']['version']}  {d['command']}"]
    if d.get("input", {}).get("data"):
        data = d["input"]["data"]
        lines.append(f"data: {data.get('path')}  (n = {data.get('n')})")
    if d.get("model"):
        m = d["model"]
        params = ", ".join(f"{k}={_fmt(v)}" for k, v in sorted((m.get("params") or {}).items()))
        lines.append(f"model: {m.get('family')}({params})")
    lines.append("")

    if d.get("indices"):
        rows = []
        for e in d["indices"]:
            value = "inf" if e["infinite"] else _fmt(e["value"])
            if e["value"] is None and "c1" in e["components"]:
                c = e["components"]
                value = f"({_fmt(c['c1'])}, {_fmt(c['c2'])}, {c['c3']})"
            iv = e.get("interval")
            ci = f"[{_fmt(iv['lower'])}, {_fmt(iv['upper'])}]" if iv else ""
            rows.append([e["label"], value, ci])
        lines.extend(_table(["index", "value", "interval"], rows))
        lines.append("")

    for key, title in (("fits", "fits"), ("pipeline", "pipeline fits")):
        section = d.get(key)
        if isinstance(section, dict):
            section = section.get("fits")
        if section:
            cols = [c for c in ("structural", "family", "ks", "critical", "adequate", "error")
                    if any(c in f for f in section)]
            rows = [[_fmt(f.get(c)) if f.get(c) is not None else "" for c in cols] for f in section]
            lines.append(f"{title}:")
            lines.extend(_table(["N" if c == "structural" else c for c in cols], rows))
            lines.append("")

    if d.get("oracle"):
        o = d["oracle"]
        lines.append("oracle:")
        for k in sorted(o):
            lines.append(f"  {k}: {_fmt(o[k])}")
        lines.append("")

    notes = []
    for e in d.get("indices", []):
        notes.extend(f"{e['label']}: {n}" for n in e["notes"])
    if notes:
        lines.append("notes:")
        lines.extend(f"  - {n}" for n in notes)
    if d.get("defaults_applied"):
        lines.append("defaults applied:")
        lines.extend(f"  - {n}" for n in d["defaults_applied"])
    if d.get("warnings"):
        lines.append("warnings:")
        lines.extend(f"  - {n}" for n in d["warnings"])
    return ("\n".join(lines).rstrip() + "\n").encode("utf-8")


def render_report(report, fmt="json") -> bytes:
    if fmt == "json":
        return render_json(report)
    if fmt == "text":
        return render_text(report)
    raise ValueError(f"unknown format {fmt!r}")
