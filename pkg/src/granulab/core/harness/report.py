"""Writing experiment results as plot-ready CSV and JSON aggregates."""
import logging
from pathlib import Path
from typing import Any, Sequence, Union

from granulab.core.data.utils.io import read_json, write_csv, write_json
from granulab.core.models.experiment import EvalReport
from granulab.core.schemas.artifacts import EvalReportSchema

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def _cell(value: Any) -> Any:
    return '' if value is None else value


def write_report(report: EvalReport, out_dir: PathLike, stem: str) -> list[Path]:
    """Write a report as per-case CSV rows and a JSON document with aggregates.

    Returns:
        The CSV and JSON paths.
    """
    out_dir = Path(out_dir)
    names = report.param_names
    header = [*(f'{n}_true' for n in names), *(f'{n}_star' for n in names),
              *(f'{n}_error' for n in names), 'l2']
    rows = ([*r.theta_true, *r.theta_star, *r.errors, _cell(r.l2)] for r in report.rows)
    csv_path = out_dir / f'{stem}.csv'
    json_path = out_dir / f'{stem}.json'
    write_csv(csv_path, header, rows)
    write_json(json_path, EvalReportSchema().dump(report))
    return [csv_path, json_path]


def read_report(fp: PathLike) -> EvalReport:
    """Read a report JSON written by :func:`write_report`."""
    return EvalReportSchema().load(read_json(fp))


def write_table(fp: PathLike, rows: Sequence[dict[str, Any]]) -> Path:
    """Write dictionaries sharing the same keys as CSV rows."""
    fp = Path(fp)
    header = list(rows[0]) if rows else []
    write_csv(fp, header, ([_cell(row[k]) for k in header] for row in rows))
    return fp


def write_heatmap(fp: PathLike, target: str, grid: Sequence[float],
                  curves: Sequence[Sequence[Any]]) -> Path:
    """Write posterior marginal curves: one row per noise cell and true value."""
    fp = Path(fp)
    header = ['kind', 'sigma', f'{target}_true', *(f'{target}={float(g)!r}' for g in grid)]
    write_csv(fp, header, curves)
    return fp
