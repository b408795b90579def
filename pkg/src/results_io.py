"""
CSV / JSON result files.

CSV layout: one `# config_hash=... experiment=... seed=...` comment line,
then the header row and one line per result row. Numbers are written with
12 significant digits.
"""

import csv
import io
import json
import logging
import math
from pathlib import Path
from typing import Dict, List, Union

from .experiments import ExperimentResult, ResultRow

logger = logging.getLogger(__name__)

COLUMNS = ["experiment", "seed", "trial", "axis1", "axis2", "metric_name", "value"]
FORMATS = ("csv", "json")


class ResultsIOError(RuntimeError):
    pass


def format_number(value: Union[float, int, str]) -> str:
    if isinstance(value, str):
        return value
    return format(float(value), ".12g")


def _json_value(value: float):
    # JSON has no NaN; a missing crossover becomes null
    return None if math.isnan(value) else float(format_number(value))


def render_csv(result: ExperimentResult) -> str:
    buf = io.StringIO()
    buf.write(f"# config_hash={result.config_hash} experiment={result.experiment} seed={result.seed}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in result.rows:
        writer.writerow([
            result.experiment,
            result.seed,
            row.trial,
            format_number(row.axis1),
            row.axis2,
            row.metric_name,
            format_number(row.value),
        ])
    return buf.getvalue()


def render_json(result: ExperimentResult) -> str:
    doc = {
        "experiment": result.experiment,
        "seed": result.seed,
        "config_hash": result.config_hash,
        "axis1_name": result.axis1_name,
        "axis2_name": result.axis2_name,
        "columns": COLUMNS,
        "rows": [
            {
                "experiment": result.experiment,
                "seed": result.seed,
                "trial": row.trial,
                "axis1": format_number(row.axis1),
                "axis2": row.axis2,
                "metric_name": row.metric_name,
                "value": _json_value(row.value),
            }
            for row in result.rows
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def emit_results(result: ExperimentResult, fmt: str = "csv", path=None) -> str:
    """
    Render `result` as csv or json; writes to `path` when given.

    Returns the rendered text.
    """
    if fmt not in FORMATS:
        raise ValueError(f"unknown result format {fmt!r}, expected one of {FORMATS}")
    text = render_csv(result) if fmt == "csv" else render_json(result)
    if path is not None:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            # newline="" keeps byte-identical output across platforms
            with path.open("w", encoding="utf-8", newline="") as f:
                f.write(text)
        except OSError as e:
            raise ResultsIOError(f"cannot write results to {path}: {e}") from e
        logger.info(f"[Results] wrote {len(result.rows)} rows to {path}")
    return text


def parse_results_csv(text: str) -> Dict:
    """
    Parse emitted CSV back into {"config_hash", "experiment", "rows"};
    row values come back as floats.
    """
    header: Dict[str, str] = {}
    body: List[str] = []
    for line in text.splitlines():
        if line.startswith("#"):
            for token in line[1:].split():
                key, _, value = token.partition("=")
                header[key] = value
        elif line.strip():
            body.append(line)

    reader = csv.DictReader(io.StringIO("\n".join(body)))
    missing = set(COLUMNS) - set(reader.fieldnames or [])
    if missing:
        raise ResultsIOError(f"results CSV must include headers: {sorted(missing)}")

    rows = []
    for r in reader:
        rows.append({
            "experiment": r["experiment"],
            "seed": int(r["seed"]),
            "trial": r["trial"],
            "axis1": r["axis1"],
            "axis2": r["axis2"],
            "metric_name": r["metric_name"],
            "value": float(r["value"]),
        })
    return {"config_hash": header.get("config_hash"), "experiment": header.get("experiment"), "rows": rows}


def read_results_csv(path) -> Dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ResultsIOError(f"cannot read results from {path}: {e}") from e
    return parse_results_csv(text)


def rows_as_records(rows: List[ResultRow]) -> List[Dict]:
    """Plain dicts for table display."""
    return [
        {"trial": r.trial, "axis1": r.axis1, "axis2": r.axis2, "metric": r.metric_name, "value": r.value}
        for r in rows
    ]
