"""JSON and CSV reports of check records."""
import csv
import io
import json

import numpy as np

FIELDS = ("id", "anchor", "value", "tol", "pass", "seconds")


def _plain(obj):
    """Recursively convert numpy scalars and non-string keys for JSON."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return _plain(obj.item())
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    return obj


def build_report(suite, command, config, timings=False):
    records = []
    for c in suite.checks:
        rec = c.record()
        if not timings:
            rec["seconds"] = None
        records.append(rec)
    return {"command": command, "config": _plain(config), "records": _plain(records),
            "constants": _plain(suite.constants), "pass": suite.ok}


def render(report, fmt="json"):
    if fmt == "json":
        return json.dumps(report, indent=2) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=FIELDS, lineterminator="\n")
        w.writeheader()
        for rec in report["records"]:
            w.writerow({k: rec[k] for k in FIELDS})
        return buf.getvalue()
    raise ValueError(f"unknown report format {fmt!r}")


def write_report(report, path, fmt="json"):
    text = render(report, fmt)
    if path in (None, "-"):
        import sys
        sys.stdout.write(text)
        return
    with open(path, "w", newline="") as fh:
        fh.write(text)
