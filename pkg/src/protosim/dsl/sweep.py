"""Grid sweeps over a script template (``$name`` placeholders)."""
from __future__ import annotations

import csv
import io
import os
import re
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from string import Template

from ..dynamics.ladder import SWEEP_COLUMNS
from ..params import validate_bragg_regime
from .parser import parse_script
from .runner import run_script

EXTRA_COLUMNS = ("transfer_probability", "closed_form_transfer", "status", "passed")


def _uses(template: str, var: str) -> bool:
    return re.search(r"\$(?:%s\b|\{%s\})" % (re.escape(var), re.escape(var)), template) is not None


def _point(args) -> dict:
    template, var, value, base_dir = args
    text = Template(template).substitute({var: value})
    report = run_script(parse_script(text, base_dir), base_dir=base_dir)
    row = {var: value}
    if report.oracle:
        o = report.oracle[-1]
        row.update({k: o[k] for k in SWEEP_COLUMNS})
        row.update({k: o[k] for k in EXTRA_COLUMNS if k in o})
    else:
        regime = report.metrics.get("regime") or validate_bragg_regime(_params_of(report))
        row["delta_over_omega_r"] = regime["delta_over_omega_r"]
        row["status"] = regime["status"]
    row["passed"] = report.passed
    return row


def _params_of(report):
    from ..params import PhysicalParams

    p = {k: v for k, v in report.params.items() if k != "name"}
    return PhysicalParams(**p)


def sweep(template: str, var: str, grid, workers: int | None = None, base_dir=None) -> list:
    """One run per grid value; rows come back in grid order."""
    grid = [str(g).strip() for g in grid]
    if not grid:
        raise ValueError("sweep grid is empty")
    if not _uses(template, var):
        raise ValueError(f"variable ${var} does not appear in the template")
    base_dir = str(base_dir) if base_dir is not None else None
    jobs = [(template, var, g, base_dir) for g in grid]
    workers = workers if workers is not None else min(len(jobs), os.cpu_count() or 1)
    if workers <= 1 or len(jobs) == 1:
        return [_point(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_point, jobs))


def rows_to_csv(rows: list, var: str) -> str:
    cols = [var] + list(SWEEP_COLUMNS) + list(EXTRA_COLUMNS)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({c: _fmt(r.get(c, "")) for c in cols})
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def parse_grid(text: str) -> list:
    return [g for g in (s.strip() for s in text.split(",")) if g]


def write_csv(path, text: str):
    Path(path).write_text(text, encoding="utf-8")
