"""
Record type definitions shared by the experiment harness and its outputs
"""

from typing import Dict, List, Tuple, TypedDict

# Column order of runs.csv; qaic_ll is appended only when requested.
RUN_COLUMNS: Tuple[str, ...] = (
    "model_id",
    "n",
    "rep",
    "seed",
    "g_n_q",
    "t_n_q",
    "c_n_q",
    "qwaic",
    "g_n",
    "t_n",
    "waic",
    "acceptance_rate",
    "wall_time_ms",
)

CRITERIA_METRICS: Tuple[str, ...] = (
    "g_n_q",
    "t_n_q",
    "c_n_q",
    "qwaic",
    "g_n",
    "t_n",
    "waic",
)

# Columns computed from runs.csv rather than stored in it.
DERIVED_METRICS: Dict[str, str] = {
    "qwaic_gap": "g_n_q - qwaic",
    "waic_gap": "g_n - waic",
    "n_c_n_q": "n * c_n_q",
}


class RunRecord(TypedDict, total=False):
    model_id: str
    n: int
    rep: int
    seed: int
    g_n_q: float
    t_n_q: float
    c_n_q: float
    qwaic: float
    g_n: float
    t_n: float
    waic: float
    acceptance_rate: float
    wall_time_ms: float
    qaic_ll: float


class MetricSummary(TypedDict):
    mean: float
    std: float
    stderr: float


class AggregateRow(TypedDict):
    n: int
    repetitions: int
    metrics: Dict[str, MetricSummary]


class ChainDiagnostics(TypedDict):
    acceptance_rate: float
    burn_in_acceptance: float
    step_scale: List[float]
