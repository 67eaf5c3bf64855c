"""
Module containing the evaluation report and its CSV / JSON emission.

CSV files carry the fixed method columns with 6 significant digits. JSON
files carry everything (diagnostics, extra tables, the resolved config and
the hyperparameters) with round-trip float formatting.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["method", "estimate", "wc_objective", "lower_bound", "mse", "bias_sq", "variance"]
FLOAT_FORMAT = "%.6g"


@dataclass
class MethodRow:
    """One method's results. Unknown quantities stay None."""

    method: str
    estimate: Optional[float] = None
    wc_objective: Optional[float] = None
    lower_bound: Optional[float] = None
    mse: Optional[float] = None
    bias_sq: Optional[float] = None
    variance: Optional[float] = None
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        values = {c: getattr(self, c) for c in CSV_COLUMNS}
        values["diagnostics"] = self.diagnostics
        return values


@dataclass
class EvalReport:
    """
    :param mode: CLI mode that produced the report.
    :param rows: Per-method rows.
    :param tables: Extra tables written as `<mode>-<name>.csv` and embedded in the JSON.
    :param config: Resolved configuration (dotted keys).
    :param hyperparameters: Hyperparameters used, by variant (fitted ones are flagged).
    :param timing: Wall times in seconds.
    :param include_timing: Whether timing goes into the JSON.
    """

    mode: str
    rows: List[MethodRow] = field(default_factory=list)
    tables: Dict[str, pd.DataFrame] = field(default_factory=dict)
    config: Dict[str, str] = field(default_factory=dict)
    hyperparameters: Dict[str, Any] = field(default_factory=dict)
    timing: Dict[str, float] = field(default_factory=dict)
    include_timing: bool = False

    def row(self, method: str) -> MethodRow:
        for row in self.rows:
            if row.method == method:
                return row
        raise KeyError(method)

    def to_dict(self) -> Dict[str, Any]:
        report = {
            "mode": self.mode,
            "config": self.config,
            "hyperparameters": self.hyperparameters,
            "methods": [row.to_dict() for row in self.rows],
            "tables": {name: table.to_dict(orient="records") for name, table in self.tables.items()},
        }
        if self.include_timing:
            report["timing"] = self.timing
        return report


def _plain(value: Any) -> Any:
    """Convert numpy values to JSON-native ones; non-finite floats become null."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, Path):
        return str(value)
    return value


def emit_report(report: EvalReport, fmt: str, path: Path) -> Path:
    """
    Write the report in one format.

    :param report: Report to write.
    :param fmt: csv or json.
    :param path: Output file. For csv, extra tables go next to it as `<stem>-<name>.csv`.
    :return: The written path.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        records = [{c: getattr(row, c) for c in CSV_COLUMNS} for row in report.rows]
        df = pd.DataFrame(records, columns=CSV_COLUMNS)
        df.to_csv(path, index=False, float_format=FLOAT_FORMAT)
        for name, table in report.tables.items():
            table_path = path.with_name(f"{path.stem}-{name}.csv")
            table.to_csv(table_path, index=False, float_format=FLOAT_FORMAT)
            logger.debug("Wrote table %s to %s", name, table_path)
    elif fmt == "json":
        text = json.dumps(_plain(report.to_dict()), indent=2, sort_keys=True, allow_nan=False)
        path.write_text(text + "\n", encoding="utf-8")
    else:
        raise NotImplementedError(f"Report format {fmt} not implemented")
    logger.info("Wrote %s report to %s", fmt, path)
    return path
