import json
from pathlib import Path

from lmeos.errors import MetricsError

from .scoring import relative_gain

COLUMNS = ("P", "R", "F0.5", "F0.5-gain")


def report_row(name, report, baseline_f=None):
    """One report line; the gain is taken from two-decimal F values, as printed."""
    row = {"name": name, **report.to_dict()}
    if baseline_f is not None:
        row["baseline_f05"] = round(baseline_f, 2)
        row["gain"] = round(relative_gain(row["f05"], round(baseline_f, 2)), 1)
    return row


def render_table(rows, label="model"):
    """Aligned plain-text table of report rows (P, R, F0.5 and the gain if present)."""
    header = [label, *COLUMNS]
    body = []
    for row in rows:
        gain = f"{row['gain']:.1f}%" if row.get("gain") is not None else ""
        body.append([row["name"], f"{row['precision']:.2f}", f"{row['recall']:.2f}",
                     f"{row['f05']:.2f}", gain])
    widths = [max(len(line[k]) for line in [header, *body]) for k in range(len(header))]
    lines = []
    for line in [header, *body]:
        cells = [line[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(line[1:], widths[1:])]
        lines.append("  ".join(cells).rstrip())
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def read_baseline(value):
    """``--baseline`` is either an F value or the path of a JSON report with ``f05``."""
    try:
        return float(value)
    except ValueError:
        pass
    path = Path(value)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise MetricsError(f"Baseline {value} is neither a number nor a file",
                           code="PATH_NOT_FOUND") from e
    except (OSError, json.JSONDecodeError) as e:
        raise MetricsError(f"Cannot read baseline report {path}: {e}",
                           code="BAD_REFERENCE") from e
    try:
        return float(payload["f05"])
    except (KeyError, TypeError, ValueError) as e:
        raise MetricsError(f"Baseline report {path} has no f05 value",
                           code="BAD_REFERENCE") from e
