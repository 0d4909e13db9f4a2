"""CSV and JSON persistence of experiment records.

Record files hold only deterministic columns so that reruns with the same
seed are byte-identical; wall-clock times go to a separate timings file.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict
from pathlib import Path
from typing import Sequence

from .experiments import CellSummary, ResultRecord

RECORD_COLUMNS = (
    "master_seed", "n", "p", "growth_exponent", "setting_label", "case_label", "replicate_id",
    "seed", "true_model_prob", "map_hit", "max_incorrect_odds", "null_odds", "psrf",
    "engine_used", "excluded",
)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_records_csv(records: Sequence[ResultRecord], path, master_seed: int) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_COLUMNS)
        for rec in records:
            row = asdict(rec)
            row["master_seed"] = master_seed
            w.writerow([_fmt(row[c]) for c in RECORD_COLUMNS])


def read_records_csv(path) -> list[ResultRecord]:
    out = []
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(ResultRecord(
                n=int(row["n"]), p=int(row["p"]), growth_exponent=float(row["growth_exponent"]),
                setting_label=row["setting_label"], case_label=row["case_label"],
                replicate_id=int(row["replicate_id"]), seed=int(row["seed"]),
                true_model_prob=float(row["true_model_prob"]), map_hit=row["map_hit"] == "1",
                max_incorrect_odds=float(row["max_incorrect_odds"]),
                null_odds=float(row["null_odds"]),
                psrf=float(row["psrf"]) if row["psrf"] else None,
                engine_used=row["engine_used"], excluded=row["excluded"] == "1"))
    return out


def write_timings_csv(records: Sequence[ResultRecord], path, master_seed: int) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["master_seed", "n", "p", "growth_exponent", "setting_label", "case_label",
                    "replicate_id", "wall_time"])
        for r in records:
            w.writerow([master_seed, r.n, r.p, repr(r.growth_exponent), r.setting_label,
                        r.case_label, r.replicate_id, repr(r.wall_time)])


def _clean(x):
    return None if isinstance(x, float) and not math.isfinite(x) else x


def summary_dict(summaries: Sequence[CellSummary], master_seed: int, experiment: str) -> dict:
    cells = {}
    for s in summaries:
        cells[s.key] = dict(n=s.n, p=s.p, growth_exponent=s.growth_exponent, case=s.case_label,
                            setting=s.setting_label, mean=_clean(s.mean), std=_clean(s.std),
                            count=s.count, excluded=s.excluded)
    return {"experiment": experiment, "master_seed": master_seed, "cells": cells}


def write_summary_json(summaries: Sequence[CellSummary], path, master_seed: int, experiment: str) -> None:
    Path(path).write_text(json.dumps(summary_dict(summaries, master_seed, experiment), indent=2) + "\n")


def write_experiment(out_dir, records: Sequence[ResultRecord], summaries: Sequence[CellSummary],
                     master_seed: int, experiment: str) -> dict[str, Path]:
    """Write ``records.csv``, ``summary.json`` and ``timings.csv`` under ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"records": out / "records.csv", "summary": out / "summary.json",
             "timings": out / "timings.csv"}
    write_records_csv(records, paths["records"], master_seed)
    write_summary_json(summaries, paths["summary"], master_seed, experiment)
    write_timings_csv(records, paths["timings"], master_seed)
    return paths
