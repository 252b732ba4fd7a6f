"""
Command-line surface: run, theory, models, check-shadows, plot-data.

Exit codes: 0 success, 1 usage or input error, 2 runtime or numeric error.
Results go to stdout; logs and error messages go to stderr.
"""

import argparse
import json
import logging
import sys
from typing import List, Optional, Sequence

import numpy as np
from dotenv import load_dotenv

from .core import __version__
from .core.config import setup_logging
from .core.utils import resolve_thread_count
from .inference.models import UnknownModelError, get_model, list_models
from .inference.theory import theory_summary
from .quantum.shadows import PauliShadowScheme, check_unbiasedness
from .utils.experiment import ConfigError, aggregate_frame, load_experiment_config, run_experiment
from .utils.run_publisher import UnknownMetricError, format_plot_table, plot_table, read_runs, write_outputs

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2

SHADOW_TOLERANCE = 1e-12
SUMMARY_METRICS = ("g_n_q", "qwaic", "qwaic_gap", "c_n_q", "n_c_n_q", "waic_gap", "acceptance_rate")


class UsageError(Exception):
    """Raised for bad arguments or unusable input files"""
    pass


class QsingArgumentParser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors exit with status 1"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_scheme(n_qubits: int) -> PauliShadowScheme:
    return PauliShadowScheme.build(n_qubits)


def _parse_theta(text: Optional[str]) -> Optional[List[float]]:
    if text is None:
        return None
    try:
        return [float(part) for part in text.split(",")]
    except ValueError:
        raise UsageError(f"--theta must be a comma-separated list of numbers, got {text!r}") from None


def cmd_run(args) -> int:
    try:
        config = load_experiment_config(args.config)
    except ConfigError as e:
        raise UsageError(str(e)) from None
    if args.out:
        config = config.model_copy(update={"output_dir": args.out})
    try:
        threads = resolve_thread_count(args.threads)
    except ValueError as e:
        raise UsageError(str(e)) from None

    records, aggregates = run_experiment(config, threads=threads)
    paths = write_outputs(records, aggregates, config.output_dir, config)
    logger.info(f"Results written to {config.output_dir} ({len(paths['plots'])} plot files)")

    table = aggregate_frame(aggregates)
    columns = ["n", "repetitions"] + [f"{m}_mean" for m in SUMMARY_METRICS] + ["qwaic_gap_stderr"]
    print(table[[c for c in columns if c in table.columns]].to_string(index=False))
    return EXIT_OK


def cmd_theory(args) -> int:
    theta = _parse_theta(args.theta)
    try:
        model = get_model(args.model)
    except UnknownModelError as e:
        raise UsageError(e.args[0]) from None
    if theta is not None:
        if len(theta) != model.dim_param:
            raise UsageError(f"--theta needs {model.dim_param} values for {model.model_id}, got {len(theta)}")
        if not model.domain.contains(theta):
            raise UsageError(f"--theta {theta} lies outside the {model.model_id} domain")
    if args.fd_step is not None and args.fd_step <= 0:
        raise UsageError("--fd-step must be positive")

    summary = theory_summary(args.model, theta=theta, fd_step=args.fd_step)
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def cmd_models(args) -> int:
    for model_id in list_models():
        model = get_model(model_id)
        print(f"{model_id}\td={model.dim_param}\tdim={model.hilbert_dim}\t{model.description}")
    return EXIT_OK


def cmd_check_shadows(args) -> int:
    if args.states < 1 or args.qubits < 1:
        raise UsageError("--states and --qubits must be positive")
    scheme = build_scheme(args.qubits)
    error = check_unbiasedness(scheme, args.states, np.random.default_rng(args.seed))
    if error <= SHADOW_TOLERANCE:
        print(f"max error {error:.3e} < 1e-12 over {args.states} state(s)")
        return EXIT_OK
    print(f"max error {error:.3e} exceeds 1e-12 over {args.states} state(s)", file=sys.stderr)
    return EXIT_RUNTIME


def cmd_plot_data(args) -> int:
    overlay = None
    if args.overlay is not None:
        kind, value = args.overlay
        if kind != "c_over_n":
            raise UsageError(f"Unknown overlay {kind!r}; supported: c_over_n")
        try:
            overlay = float(value)
        except ValueError:
            raise UsageError(f"Overlay value must be a number, got {value!r}") from None
    try:
        runs = read_runs(args.input)
        table = plot_table(runs, args.metric, overlay=overlay)
    except FileNotFoundError:
        raise UsageError(f"No such file: {args.input}") from None
    except (ValueError, UnknownMetricError) as e:
        raise UsageError(e.args[0]) from None

    text = format_plot_table(table, args.metric)
    if args.out:
        with open(args.out, "w", newline="\n") as f:
            f.write(text)
        logger.info(f"Wrote {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = QsingArgumentParser(prog="qsing", description="Bayesian quantum state estimation experiments")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=None, help="Logging level (default QSING_LOG_LEVEL or INFO)")
    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=QsingArgumentParser)

    run = subparsers.add_parser("run", help="Run a repeated experiment from a YAML config")
    run.add_argument("--config", required=True, help="Experiment config (YAML)")
    run.add_argument("--out", default=None, help="Output directory (default: output_dir from the config)")
    run.add_argument("--threads", type=int, default=None, help="Worker processes (default QSING_THREADS)")
    run.set_defaults(handler=cmd_run)

    theory = subparsers.add_parser("theory", help="Fisher matrices and coefficients at the optimal parameter")
    theory.add_argument("--model", required=True, help="Model id (see 'qsing models')")
    theory.add_argument("--theta", default=None, help="Comma-separated parameter (default: registered theta0)")
    theory.add_argument("--fd-step", type=float, default=None, help="Finite-difference step (default 1e-4 x width)")
    theory.set_defaults(handler=cmd_theory)

    models = subparsers.add_parser("models", help="List registered models")
    models.set_defaults(handler=cmd_models)

    shadows = subparsers.add_parser("check-shadows", help="Exact unbiasedness check of the shadow snapshots")
    shadows.add_argument("--states", type=int, default=20, help="Random states to check (default 20)")
    shadows.add_argument("--seed", type=int, default=0, help="Seed for the random states")
    shadows.add_argument("--qubits", type=int, default=1, help="Number of qubits (default 1)")
    shadows.set_defaults(handler=cmd_check_shadows)

    plot = subparsers.add_parser("plot-data", help="Per-n mean/stderr table of one metric from runs.csv")
    plot.add_argument("--in", dest="input", required=True, help="runs.csv from a previous run")
    plot.add_argument("--metric", required=True, help="Column of runs.csv or qwaic_gap, waic_gap, n_c_n_q")
    plot.add_argument("--out", default=None, help="Output file (default: stdout)")
    plot.add_argument(
        "--overlay", nargs=2, metavar=("KIND", "VALUE"), default=None,
        help="Reference column; 'c_over_n VALUE' adds VALUE/n",
    )
    plot.set_defaults(handler=cmd_plot_data)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    load_dotenv()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        setup_logging(args.log_level)
    except ValueError as e:
        parser.error(f"--log-level: {e}")

    try:
        return args.handler(args)
    except UsageError as e:
        print(f"qsing {args.command}: {e}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as e:
        logger.debug("Command failed", exc_info=True)
        print(f"qsing {args.command}: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME
