"""Output files for experiment runs: CSV tables, resolved config, gnuplot data."""
import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import pandas as pd

from ..core.types import RUN_COLUMNS, AggregateRow, RunRecord
from .experiment import ExperimentConfig, aggregate_frame, aggregate_metrics, with_derived_columns

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


class UnknownMetricError(KeyError):
    """Raised when a plot metric is neither a runs.csv column nor a derived column"""
    pass


class RunPublisher:
    def __init__(self, output_dir):
        """Initialize the publisher.

        Args:
            output_dir: Directory receiving runs.csv, aggregate.csv, config.json and plot files;
                created if absent.
        """
        self.output_dir = Path(output_dir)
        self._ensure_directories()

    def _ensure_directories(self):
        try:
            self.output_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise OSError(e.errno, f"Cannot create output directory: {e.strerror}", str(self.output_dir)) from None

    def _write_text(self, name: str, content: str) -> Path:
        path = self.output_dir / name
        try:
            with open(path, "w", newline="\n") as f:
                f.write(content)
        except OSError as e:
            raise OSError(e.errno, f"Cannot write output file: {e.strerror}", str(path)) from None
        logger.info(f"Wrote {path}")
        return path

    def publish(
        self,
        records: Sequence[RunRecord],
        aggregates: Sequence[AggregateRow],
        config: Optional[ExperimentConfig] = None,
    ) -> Dict[str, object]:
        """Write every output file for one experiment.

        Args:
            records: Run records in (n, rep) order
            aggregates: Aggregate rows from the same records
            config: Resolved config, written verbatim to config.json

        Returns:
            Dict of written paths
        """
        result: Dict[str, object] = {"status": "published"}
        result["runs"] = str(self._write_text("runs.csv", runs_to_csv(records)))
        result["aggregate"] = str(
            self._write_text("aggregate.csv", aggregate_frame(aggregates).to_csv(index=False, float_format=FLOAT_FORMAT))
        )
        if config is not None:
            payload = json.dumps(config.model_dump(mode="json"), indent=2) + "\n"
            result["config"] = str(self._write_text("config.json", payload))

        plots: List[str] = []
        if records:
            runs = with_derived_columns(runs_frame(records))
            for metric in aggregate_metrics(runs):
                table = plot_table(runs, metric)
                plots.append(str(self._write_text(f"plot_{metric}.dat", format_plot_table(table, metric))))
        result["plots"] = plots
        return result


def runs_frame(records: Sequence[RunRecord]) -> pd.DataFrame:
    columns = list(RUN_COLUMNS)
    if records and "qaic_ll" in records[0]:
        columns.append("qaic_ll")
    return pd.DataFrame(list(records), columns=columns)


def runs_to_csv(records: Sequence[RunRecord]) -> str:
    """runs.csv content with the fixed column order"""
    return runs_frame(records).to_csv(index=False, float_format=FLOAT_FORMAT)


def write_outputs(
    records: Sequence[RunRecord],
    aggregates: Sequence[AggregateRow],
    output_dir,
    config: Optional[ExperimentConfig] = None,
) -> Dict[str, object]:
    return RunPublisher(output_dir).publish(records, aggregates, config)


def read_runs(path) -> pd.DataFrame:
    """Load runs.csv.

    Raises:
        ValueError: if the file is empty or lacks the fixed columns
    """
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except pd.errors.EmptyDataError:
        raise ValueError(f"{path} is empty") from None
    missing = [c for c in RUN_COLUMNS if c not in frame.columns]
    if missing:
        raise ValueError(f"{path} is missing columns: {', '.join(missing)}")
    if frame.empty:
        raise ValueError(f"{path} has no run records")
    return frame


def plot_table(runs: pd.DataFrame, metric: str, overlay: Optional[float] = None) -> pd.DataFrame:
    """Per-n mean and standard error of ``metric``; ``overlay`` adds a c_over_n = overlay / n column.

    Raises:
        UnknownMetricError: if the metric is not a stored or derived column
    """
    if runs.empty:
        raise ValueError("No run records to tabulate")
    if metric not in runs.columns:
        runs = with_derived_columns(runs)
    if metric not in runs.columns or metric in ("model_id", "n", "rep", "seed"):
        raise UnknownMetricError(f"Unknown metric {metric!r}")

    grouped = runs.groupby("n", sort=True)[metric]
    counts = grouped.count()
    std = grouped.std(ddof=1).where(counts > 1, 0.0)
    table = pd.DataFrame(
        {
            "n": counts.index.astype(int),
            "mean": grouped.mean().to_numpy(),
            "stderr": (std / counts.pow(0.5)).to_numpy(),
        }
    )
    if overlay is not None:
        table["c_over_n"] = overlay / table["n"]
    return table


def format_plot_table(table: pd.DataFrame, metric: str) -> str:
    """Whitespace-separated columns with a '#' header line, readable by gnuplot"""
    lines = [f"# {metric}: " + " ".join(table.columns)]
    for row in table.itertuples(index=False):
        cells = [str(int(row[0]))] + [FLOAT_FORMAT % value for value in row[1:]]
        lines.append(" ".join(cells))
    return "\n".join(lines) + "\n"
