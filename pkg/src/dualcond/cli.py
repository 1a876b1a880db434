from __future__ import annotations

import logging
import sys
from importlib.metadata import PackageNotFoundError, version as package_version
from pathlib import Path

from .bench import bench_conditioning, summarize as summarize_bench
from .config import ExperimentConfig, apply_overrides, load_config
from .data import (
    Dataset,
    StreamClassification,
    generate_banana,
    generate_constrained_problem,
    grid_to_dict,
    load_csv,
)
from .diagnostics import DiagnosticFormatter, hint_for_error as _hint_for_error, style as _style
from .driver import fit_dataset, run_bo, run_streaming
from .errors import ConfigError, NumericalError
from .model import state_to_dict
from .options import CLIOptions, parse_options
from .render import elbo_trace_rows, history_rows, write_csv, write_json

PACKAGE_NAME = "dualcond"
CLI_NAME = "dualcond"

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _package_version() -> str:
    try:
        return package_version(PACKAGE_NAME)
    except PackageNotFoundError:
        return "dev"


VERSION = _package_version()
HELP_TEXT = (
    f"{CLI_NAME} v{VERSION} - sparse variational GPs with dual conditioning\n"
    "\n"
    "usage:\n"
    f"  {CLI_NAME} COMMAND [--config PATH] [--seed N] [--out DIR] [--batch-size K] [--iterations N]\n"
    f"  {' ' * len(CLI_NAME)}         [--color MODE] [--verbose]\n"
    "\n"
    "commands:\n"
    "  fit                 fit a model to a dataset; writes model.json and elbo_trace.csv\n"
    "  stream              fit the first batch, condition on the rest; writes per-batch models,\n"
    "                      probability grids and stream_summary.json\n"
    "  bo                  batch Bayesian optimization on a constrained problem; writes\n"
    "                      bo_history.json and bo_history.csv\n"
    "  bench-conditioning  time one-step conditioning against the size of the new data\n"
    "\n"
    "options:\n"
    "  --config PATH       experiment config (json); every key is optional\n"
    "  --seed N            random seed (overrides the config)\n"
    "  --out DIR           output directory (overrides DUALCOND_OUTPUT_DIR and the config)\n"
    "  --batch-size K      points per BO iteration (1 gives the sequential baseline)\n"
    "  --iterations N      number of BO iterations\n"
    "  --color MODE        diagnostics color: auto, always, never\n"
    "  -v, --verbose       print progress messages on stderr\n"
    "  -V, --version       print version\n"
    "  -h, --help          show this help\n"
    "\n"
    "exit codes:\n"
    "  0 ok, 2 config or input error, 3 numerical error, 1 anything else"
)


def _print_error(exc: Exception, color_mode: str = "auto") -> None:
    print(_style(f"E: {exc}", color="red", stream=sys.stderr, color_mode=color_mode), file=sys.stderr)
    hint = _hint_for_error(str(exc))
    if hint:
        print(_style(f"hint: {hint}", color="yellow", stream=sys.stderr, color_mode=color_mode), file=sys.stderr)


def _install_logging(options: CLIOptions) -> logging.Handler:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(DiagnosticFormatter(sys.stderr, options.color_mode))
    root = logging.getLogger(PACKAGE_NAME)
    root.addHandler(handler)
    root.setLevel(logging.INFO if options.verbose else logging.WARNING)
    root.propagate = False
    return handler


def _output_dir(config: ExperimentConfig) -> Path:
    path = Path(config.output_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_dataset(config: ExperimentConfig) -> Dataset:
    problem = config.problem
    if problem.name in (None, "banana"):
        return generate_banana(problem.n_per_batch, problem.n_batches, config.seed).concatenate()
    if problem.name == "csv":
        return load_csv(problem.path)
    raise ConfigError(f"problem.name: {problem.name} is not a dataset; use banana or csv")


def _load_stream(config: ExperimentConfig) -> StreamClassification:
    problem = config.problem
    if problem.name in (None, "banana"):
        return StreamClassification.banana(problem.n_per_batch, problem.n_batches, config.seed)
    if problem.name == "csv":
        return StreamClassification.from_csv(problem.path, problem.batch_size)
    raise ConfigError(f"problem.name: {problem.name} is not a stream; use banana or csv")


def cmd_fit(config: ExperimentConfig) -> int:
    data = _load_dataset(config)
    result = fit_dataset(data, config)
    out = _output_dir(config)
    write_json(out / "model.json", state_to_dict(result.state))
    write_csv(out / "elbo_trace.csv", ["iter", "elbo"], elbo_trace_rows(result.elbo_trace))
    final = result.elbo_trace[-1] if result.elbo_trace else float("nan")
    print(
        f"fit: n={data.n} m={result.state.m} iterations={result.iterations} "
        f"converged={str(result.converged).lower()} elbo={final:.6g}"
    )
    return EXIT_OK


def cmd_stream(config: ExperimentConfig) -> int:
    problem = _load_stream(config)
    result = run_streaming(problem, config)
    out = _output_dir(config)
    for index, state in enumerate(result.states, start=1):
        write_json(out / f"model_batch{index}.json", state_to_dict(state))
        if len(result.xs):
            write_json(out / f"grid_batch{index}.json", grid_to_dict(result.xs, result.ys, result.batch_probs[index - 1]))
    write_json(out / "model_offline.json", state_to_dict(result.offline))
    if len(result.xs):
        write_json(out / "grid_offline.json", grid_to_dict(result.xs, result.ys, result.offline_probs))
    summary = {"problem": problem.name, "seed": config.seed, **result.summary()}
    write_json(out / "stream_summary.json", summary)
    print(f"stream: batches={len(result.states)} mean_abs_gap={result.gap:.6g}")
    return EXIT_OK


def cmd_bo(config: ExperimentConfig) -> int:
    problem_config = config.problem
    name = problem_config.name or "noisy-branin-disk"
    if name != "noisy-branin-disk":
        raise ConfigError(f"problem.name: {name} is not an optimization problem; use noisy-branin-disk")
    problem = generate_constrained_problem(name, config.seed, problem_config.noise_sd, problem_config.flip_prob)
    history = run_bo(problem, config)
    out = _output_dir(config)
    write_json(out / "bo_history.json", history.to_dict())
    write_csv(out / "bo_history.csv", ["iter", "incumbent", "batch_best", "wall_ms"], history_rows(history))
    print(f"bo: iterations={len(history.iterations)} incumbent={history.final_incumbent}")
    if history.error is not None:
        raise RuntimeError(f"bo run aborted at {history.error}")
    return EXIT_OK


def cmd_bench_conditioning(config: ExperimentConfig) -> int:
    rows = bench_conditioning(config.bench, config.model, config.seed)
    out = _output_dir(config)
    write_csv(
        out / "bench_conditioning.csv",
        ["likelihood", "n_new", "median_ms"],
        [(row.likelihood, str(row.n_new), row.median_ms) for row in rows],
    )
    summary = summarize_bench(rows, config.bench)
    write_json(out / "bench_summary.json", summary)
    for kind, stats in summary["likelihoods"].items():
        ratio = "n/a" if stats["ratio"] is None else f"{stats['ratio']:.3g}"
        print(f"bench: {kind} ratio={ratio} (ideal {stats['ideal_ratio']:.3g})")
    return EXIT_OK


COMMAND_HANDLERS = {
    "fit": cmd_fit,
    "stream": cmd_stream,
    "bo": cmd_bo,
    "bench-conditioning": cmd_bench_conditioning,
}


def run(argv: list[str] | None = None) -> int:
    args = sys.argv[1:] if argv is None else argv

    try:
        options = parse_options(args, help_text=HELP_TEXT)
    except SystemExit:
        return EXIT_OK
    except ValueError as exc:
        _print_error(exc)
        return EXIT_CONFIG

    if options.show_version:
        print(f"{CLI_NAME} v{VERSION}")
        return EXIT_OK
    if options.command is None:
        _print_error(ValueError("missing command"), options.color_mode)
        print(HELP_TEXT, file=sys.stderr)
        return EXIT_CONFIG

    handler = _install_logging(options)
    try:
        config = apply_overrides(
            load_config(options.config_path),
            seed=options.seed,
            out=options.out,
            batch_size=options.batch_size,
            iterations=options.iterations,
        )
        return COMMAND_HANDLERS[options.command](config)
    except NumericalError as exc:
        _print_error(exc, options.color_mode)
        return EXIT_NUMERICAL
    except (ValueError, OSError) as exc:
        # ConfigError and ParseError are ValueErrors
        _print_error(exc, options.color_mode)
        return EXIT_CONFIG
    except Exception as exc:
        _print_error(exc, options.color_mode)
        return EXIT_FAILURE
    finally:
        root = logging.getLogger(PACKAGE_NAME)
        root.removeHandler(handler)
        root.propagate = True
