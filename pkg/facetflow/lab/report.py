from __future__ import annotations
import typing as ty
import csv
import json
import logging
from pathlib import Path
import attrs
import numpy as np

logger = logging.getLogger("facetflow")

STATUSES = ("pass", "fail", "inconclusive")

REPORT_CSV = "report.csv"
REPORT_JSON = "report.json"
REPORT_COLUMNS = ("check", "run_ids", "status", "pass", "worst_margin", "C", "alpha")


def jsonable(value: ty.Any) -> ty.Any:
    """Converts numpy scalars/arrays and tuples to JSON types, non-finite floats to
    their string form"""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if np.isfinite(value) else str(value)
    return value


@attrs.define(kw_only=True, frozen=True)
class DiagnosticsReport:
    """Outcome of one regularity check

    Parameters
    ----------
    check : str
        identifier of the check
    run_ids : tuple[str, ...]
        the runs the check was evaluated on
    params : dict
        the inputs of the check (exponents, cylinder, tolerances)
    margins : dict
        named margins; negative values flag violations
    fitted : dict
        fitted constants, "C" and "alpha" where the check fits them
    status : str
        "pass", "fail" or "inconclusive"
    located : dict
        where the worst violation occurred, if anywhere
    """

    check: str
    run_ids: ty.Tuple[str, ...] = attrs.field(converter=tuple, factory=tuple)
    params: ty.Dict[str, ty.Any] = attrs.field(factory=dict)
    margins: ty.Dict[str, ty.Any] = attrs.field(factory=dict)
    fitted: ty.Dict[str, ty.Optional[float]] = attrs.field(factory=dict)
    status: str = attrs.field(default="pass")
    located: ty.Dict[str, ty.Any] = attrs.field(factory=dict)

    @status.validator
    def _check_status(self, attribute, value):
        if value not in STATUSES:
            raise ValueError(f"status must be one of {STATUSES} (got '{value}')")

    @classmethod
    def judged(cls, passed: bool, **kwargs) -> DiagnosticsReport:
        return cls(status="pass" if passed else "fail", **kwargs)

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    @property
    def worst_margin(self) -> ty.Optional[float]:
        scalars = [
            float(v)
            for v in self.margins.values()
            if np.ndim(v) == 0 and not isinstance(v, (str, bool)) and np.isfinite(v)
        ]
        return min(scalars) if scalars else None

    def to_dict(self) -> ty.Dict[str, ty.Any]:
        return jsonable(
            {
                "check": self.check,
                "run_ids": self.run_ids,
                "params": self.params,
                "margins": self.margins,
                "fitted": {
                    "C": self.fitted.get("C"),
                    "alpha": self.fitted.get("alpha"),
                },
                "pass": self.passed,
                "status": self.status,
                "located": self.located,
            }
        )

    def csv_row(self) -> ty.Dict[str, str]:
        def fmt(value):
            return "" if value is None else f"{value:.17g}"

        return {
            "check": self.check,
            "run_ids": ";".join(self.run_ids),
            "status": self.status,
            "pass": str(self.passed).lower(),
            "worst_margin": fmt(self.worst_margin),
            "C": fmt(self.fitted.get("C")),
            "alpha": fmt(self.fitted.get("alpha")),
        }


def write_reports(
    reports: ty.Sequence[DiagnosticsReport], directory: Path
) -> ty.Tuple[Path, Path]:
    """Writes `report.csv` (one row per check) and `report.json` into `directory`

    Returns
    -------
    tuple[Path, Path]
        paths of the CSV and the JSON file
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    csv_path = directory / REPORT_CSV
    with open(csv_path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=REPORT_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for report in reports:
            writer.writerow(report.csv_row())
    json_path = directory / REPORT_JSON
    json_path.write_text(
        json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True) + "\n"
    )
    logger.info(f"wrote {len(reports)} reports to {directory}")
    return csv_path, json_path
