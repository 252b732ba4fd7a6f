"""
Reproducible experiment harness: for every (n, rep) draw a fresh dataset,
run the posterior chain and record all criteria.

Each repetition owns a random stream seeded from (master_seed, n, rep), so
results do not depend on the number of workers or their schedule.
"""

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from itertools import repeat
from pathlib import Path
from typing import List, Literal, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ..core.config import settings
from ..core.types import CRITERIA_METRICS, DERIVED_METRICS, AggregateRow, MetricSummary, RunRecord
from ..core.utils import format_elapsed, resolve_thread_count
from ..inference.criteria import evaluate_criteria
from ..inference.models import ParametricModel, UnknownModelError, get_model, true_state
from ..inference.posterior import MhConfig, run_mh
from ..quantum.quantum_core import as_density_matrix
from ..quantum.shadows import PauliShadowScheme, sample_outcomes

logger = logging.getLogger(__name__)

DEFAULT_N_GRID = [2000, 4000, 6000, 8000]


class ConfigError(ValueError):
    """Raised when an experiment config file cannot be read or validated"""
    pass


class ExperimentError(RuntimeError):
    """Raised when a repetition fails; carries the (n, rep) it belongs to"""

    def __init__(self, message: str, n: Optional[int] = None, rep: Optional[int] = None):
        super().__init__(message, n, rep)
        self.message = message
        self.n = n
        self.rep = rep

    def __str__(self) -> str:
        return self.message


class TrueStateSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["model_point", "matrix"] = "model_point"
    theta: Optional[List[float]] = None
    real: Optional[List[List[float]]] = None
    imag: Optional[List[List[float]]] = None

    @model_validator(mode="after")
    def _fields_match_kind(self):
        if self.kind == "matrix":
            if self.real is None:
                raise ValueError("true_state.real is required when kind is 'matrix'")
            if self.theta is not None:
                raise ValueError("true_state.theta only applies to kind 'model_point'")
            rho = self.matrix()
            as_density_matrix(rho)
        elif self.real is not None or self.imag is not None:
            raise ValueError("true_state.real/imag only apply to kind 'matrix'")
        return self

    def matrix(self) -> np.ndarray:
        real = np.asarray(self.real, dtype=float)
        imag = np.zeros_like(real) if self.imag is None else np.asarray(self.imag, dtype=float)
        if real.shape != imag.shape:
            raise ValueError(f"true_state.real {real.shape} and imag {imag.shape} differ in shape")
        return real + 1j * imag

    def resolve(self, model: ParametricModel) -> np.ndarray:
        """Density matrix of the data-generating state for ``model``"""
        if self.kind == "matrix":
            rho = as_density_matrix(self.matrix())
            if rho.shape != (model.hilbert_dim, model.hilbert_dim):
                raise ValueError(f"true_state matrix is {rho.shape}, model acts on dimension {model.hilbert_dim}")
            return rho
        return true_state(model, self.theta)


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", protected_namespaces=())

    model_id: str
    master_seed: int
    true_state: TrueStateSpec = Field(default_factory=TrueStateSpec)
    n_grid: List[int] = Field(default_factory=lambda: list(DEFAULT_N_GRID))
    repetitions: int = 100
    mh: MhConfig = Field(default_factory=MhConfig)
    output_dir: str = "results"
    compute_qaic: bool = False
    record_wall_time: bool = False
    eigen_floor: float = Field(default_factory=lambda: settings.eigen_floor)

    @field_validator("model_id")
    @classmethod
    def _registered_model(cls, value: str) -> str:
        try:
            get_model(value)
        except UnknownModelError as e:
            raise ValueError(e.args[0]) from None
        return value

    @field_validator("master_seed")
    @classmethod
    def _seed_fits_64_bits(cls, value: int) -> int:
        if not 0 <= value < 2 ** 64:
            raise ValueError("master_seed must be an unsigned 64-bit integer")
        return value

    @field_validator("n_grid")
    @classmethod
    def _ascending_grid(cls, value: List[int]) -> List[int]:
        if not value:
            raise ValueError("n_grid must not be empty")
        if any(n < 1 for n in value):
            raise ValueError("n_grid entries must be positive")
        if any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError("n_grid must be strictly ascending")
        return value

    @field_validator("repetitions")
    @classmethod
    def _at_least_one(cls, value: int) -> int:
        if value < 1:
            raise ValueError("repetitions must be at least 1")
        return value

    @field_validator("eigen_floor")
    @classmethod
    def _positive_floor(cls, value: float) -> float:
        if not value > 0:
            raise ValueError("eigen_floor must be positive")
        return value

    @model_validator(mode="after")
    def _state_fits_model(self):
        model = get_model(self.model_id)
        if self.true_state.kind == "model_point" and self.true_state.theta is not None:
            if not model.domain.contains(self.true_state.theta):
                raise ValueError(f"true_state.theta lies outside the {self.model_id} domain")
        if self.true_state.kind == "matrix" and self.true_state.matrix().shape != (model.hilbert_dim,) * 2:
            raise ValueError(f"true_state matrix must be {model.hilbert_dim}x{model.hilbert_dim}")
        return self


def _format_validation_error(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        location = ".".join(str(p) for p in item["loc"]) or "config"
        parts.append(f"{location}: {item['msg']}")
    return "; ".join(parts)


def parse_experiment_config(data) -> ExperimentConfig:
    """Validate an already-parsed mapping"""
    if not isinstance(data, dict):
        raise ConfigError("Experiment config must be a mapping of fields")
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(_format_validation_error(e)) from None


def load_experiment_config(path) -> ExperimentConfig:
    """Read and validate a YAML experiment config.

    Raises:
        ConfigError: for unreadable files, bad YAML or invalid fields
    """
    path = Path(path)
    try:
        with open(path) as f:
            data = yaml.safe_load(f)
    except OSError as e:
        raise ConfigError(f"Cannot read config {path}: {e.strerror}") from None
    except yaml.YAMLError as e:
        raise ConfigError(f"Invalid YAML in {path}: {e}") from None
    return parse_experiment_config(data if data is not None else {})


def derive_child_seed(master_seed: int, n: int, rep_index: int) -> int:
    """Stateless 64-bit seed for one repetition, hashed from the packed triple"""
    sequence = np.random.SeedSequence([int(master_seed), int(n), int(rep_index)])
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def scheme_for(model: ParametricModel) -> PauliShadowScheme:
    n_qubits = int(round(math.log2(model.hilbert_dim)))
    if 2 ** n_qubits != model.hilbert_dim:
        raise ValueError(f"Hilbert dimension {model.hilbert_dim} is not a power of two")
    return PauliShadowScheme.build(n_qubits)


def run_repetition(config: ExperimentConfig, n: int, rep: int) -> RunRecord:
    """Data, chain and criteria for one (n, rep)

    Raises:
        ExperimentError: wrapping any failure, with n and rep attached
    """
    seed = derive_child_seed(config.master_seed, n, rep)
    try:
        model = get_model(config.model_id)
        scheme = scheme_for(model)
        rho = config.true_state.resolve(model)
        rng = np.random.default_rng(seed)

        start = time.perf_counter()
        outcomes = sample_outcomes(rho, scheme, n, rng)
        samples = run_mh(model, outcomes, scheme.povm, config.mh, rng, config.eigen_floor)
        report = evaluate_criteria(
            model, samples, outcomes, scheme, rho,
            with_qaic=config.compute_qaic,
            eigen_floor=config.eigen_floor,
        )
        elapsed = time.perf_counter() - start
    except Exception as e:
        raise ExperimentError(f"{config.model_id} n={n} rep={rep} failed: {type(e).__name__}: {e}", n, rep) from e

    record = RunRecord(
        model_id=config.model_id,
        n=n,
        rep=rep,
        seed=seed,
        g_n_q=report.g_n_q,
        t_n_q=report.t_n_q,
        c_n_q=report.c_n_q,
        qwaic=report.qwaic,
        g_n=report.g_n,
        t_n=report.t_n,
        waic=report.waic,
        acceptance_rate=samples.acceptance_rate,
        wall_time_ms=elapsed * 1000.0 if config.record_wall_time else 0.0,
    )
    if config.compute_qaic:
        record["qaic_ll"] = report.qaic_ll
    return record


def _run_task(config: ExperimentConfig, n: int, rep: int) -> RunRecord:
    return run_repetition(config, n, rep)


def run_experiment(config: ExperimentConfig, threads: Optional[int] = None) -> Tuple[List[RunRecord], List[AggregateRow]]:
    """Run every (n, rep) of the config and aggregate per n.

    Args:
        config: Validated experiment config
        threads: Worker processes (default QSING_THREADS)

    Returns:
        Records in (n, rep) order and one aggregate row per n
    """
    workers = resolve_thread_count(threads)
    tasks = [(n, rep) for n in config.n_grid for rep in range(config.repetitions)]
    logger.info(
        f"Running {config.model_id}: {len(config.n_grid)} sample sizes x {config.repetitions} repetitions "
        f"on {workers} worker(s)"
    )

    ns = [n for n, _ in tasks]
    reps = [rep for _, rep in tasks]
    started = time.perf_counter()
    records: List[RunRecord] = []
    if workers == 1:
        results = map(_run_task, repeat(config), ns, reps)
        records = _collect(results, config, started)
    else:
        chunksize = max(1, len(tasks) // (workers * 4))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = _collect(pool.map(_run_task, repeat(config), ns, reps, chunksize=chunksize), config, started)

    return records, aggregate(records)


def _collect(results, config: ExperimentConfig, started: float) -> List[RunRecord]:
    records = []
    for record in results:
        records.append(record)
        if record["rep"] == config.repetitions - 1:
            logger.info(f"n={record['n']}: {config.repetitions} repetitions done ({format_elapsed(time.perf_counter() - started)})")
    return records


def with_derived_columns(frame: pd.DataFrame) -> pd.DataFrame:
    """Copy of a runs table with qwaic_gap, waic_gap and n_c_n_q added"""
    frame = frame.copy()
    frame["qwaic_gap"] = frame["g_n_q"] - frame["qwaic"]
    frame["waic_gap"] = frame["g_n"] - frame["waic"]
    frame["n_c_n_q"] = frame["n"] * frame["c_n_q"]
    return frame


def aggregate_metrics(frame: pd.DataFrame) -> List[str]:
    metrics = list(CRITERIA_METRICS)
    if "qaic_ll" in frame.columns:
        metrics.append("qaic_ll")
    metrics.append("acceptance_rate")
    metrics.extend(DERIVED_METRICS)
    return metrics


def _summary(values: pd.Series) -> MetricSummary:
    count = int(values.count())
    mean = float(values.mean())
    std = float(values.std(ddof=1)) if count > 1 else 0.0
    return MetricSummary(mean=mean, std=std, stderr=std / math.sqrt(count) if count else math.nan)


def aggregate(records: Sequence[RunRecord]) -> List[AggregateRow]:
    """Per-n mean, sample standard deviation and standard error of every metric"""
    if not records:
        return []
    frame = with_derived_columns(pd.DataFrame(list(records)))
    metrics = aggregate_metrics(frame)
    rows: List[AggregateRow] = []
    for n, group in frame.sort_values(["n", "rep"]).groupby("n", sort=True):
        rows.append(
            AggregateRow(
                n=int(n),
                repetitions=len(group),
                metrics={metric: _summary(group[metric]) for metric in metrics},
            )
        )
    return rows


def aggregate_frame(aggregates: Sequence[AggregateRow]) -> pd.DataFrame:
    """Flatten aggregate rows to columns n, repetitions, <metric>_mean, <metric>_std, <metric>_stderr"""
    rows = []
    for row in aggregates:
        flat = {"n": row["n"], "repetitions": row["repetitions"]}
        for metric, summary in row["metrics"].items():
            for key in ("mean", "std", "stderr"):
                flat[f"{metric}_{key}"] = summary[key]
        rows.append(flat)
    return pd.DataFrame(rows)


def scaling_exponent(ns, values) -> float:
    """Least-squares slope of log(values) against log(n)"""
    ns = np.asarray(ns, dtype=float)
    values = np.asarray(values, dtype=float)
    if ns.shape != values.shape or ns.size < 2:
        raise ValueError("Need at least two (n, value) pairs of equal length")
    if np.any(ns <= 0) or np.any(values <= 0):
        raise ValueError("Log-log regression needs positive n and values")
    slope, _ = np.polyfit(np.log(ns), np.log(values), 1)
    return float(slope)
