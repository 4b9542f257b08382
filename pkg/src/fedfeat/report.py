"""Run reports (JSON) and cross-run summaries.

Reports hold no timings and no feature values unless asked for, so two runs
with the same inputs and seed serialise to identical bytes.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Sequence

from .baselines import ModelEvaluator
from .dataset import Table
from .errors import DataError
from .fednet import ledger_summary
from .learners.base import BaseModelKind


def run_report(config: dict, result, include_values: bool = False) -> dict:
    """Build the JSON-ready report of an FLFE or baseline run."""
    summary = ledger_summary(result.ledger, result.loops)
    doc = {
        "config": config,
        "loops": result.loops,
        "loop_records": [r.to_dict() for r in result.records],
        "feature_store": [s.lineage(include_values) for s in result.feature_store],
        "ledger": summary.to_dict(),
    }
    local = getattr(result, "local_features", None)
    if local:
        doc["local_features"] = [f.lineage() for f in local]
    if getattr(result, "improvements", None):
        doc["improvements"] = result.improvements
    return doc


def dumps(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def write_json(doc: dict, path: str | Path) -> None:
    Path(path).write_text(dumps(doc), encoding="utf-8")


def load_report(path: str | Path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise DataError(f"missing run report {path}") from exc


def f1_before_after(
    table: Table,
    lineage: Sequence[dict],
    test_model: BaseModelKind | None = None,
    folds: int = 10,
    seed: int = 0,
) -> tuple[float, float]:
    """Test-model f1 on the original numeric features, then with stored features joined centrally."""
    ev = ModelEvaluator({n: table.column(n).values for n in table.numeric_names}, table.label,
                        test_model, folds=folds, seed=seed)
    for item in lineage:
        ev.register(item["name"], item["kind"], *item["parents"])
    bench = ev.score(ev.original_names)
    if not lineage:
        return bench, bench
    return bench, ev.score(ev.original_names + [item["name"] for item in lineage])


def summarize(reports: Sequence[dict], table: Table, test_model: BaseModelKind | None = None,
              folds: int = 10, seed: int = 0) -> dict:
    runs = []
    for rep in reports:
        bench, post = f1_before_after(table, rep["feature_store"], test_model, folds, seed)
        runs.append({
            "mode": rep["config"].get("mode", "flfe"),
            "loops": rep["loops"],
            "bench_f1": bench,
            "post_f1": post,
            "added_features": len(rep["feature_store"]),
            "total_bytes": rep["ledger"]["total"],
            "bytes_per_category": rep["ledger"]["per_category"],
            "cumulative_bytes": rep["ledger"]["cumulative"],
        })
    return {"dataset": table.name, "test_model": (test_model or BaseModelKind()).to_dict(), "runs": runs}


def series_csv(summary: dict) -> str:
    """Long-format cumulative bytes: one row per (mode, loop)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["mode", "loop", "cumulative_bytes"])
    for run in summary["runs"]:
        for i, v in enumerate(run["cumulative_bytes"], start=1):
            w.writerow([run["mode"], i, v])
    return buf.getvalue()
