from __future__ import annotations

import json
import os
import types
import typing
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .acquisition import ACQUISITION_KINDS
from .errors import ConfigError
from .kernels import KERNEL_KINDS
from .likelihoods import LIKELIHOOD_KINDS
from .model import RHO_SCHEDULES

OUTPUT_DIR_ENV = "DUALCOND_OUTPUT_DIR"
PROBLEM_KINDS = ("banana", "csv", "noisy-branin-disk")
INCUMBENT_RULES = ("observed", "posterior_mean")


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigError(message)


@dataclass(frozen=True)
class ModelConfig:
    kernel: str = "Matern52"
    variance: float = 1.0
    lengthscales: tuple[float, ...] | None = None
    likelihood: str | None = None
    noise_variance: float = 0.1
    num_inducing: int = 25
    jitter: float = 1e-6

    def __post_init__(self):
        _require(self.kernel in KERNEL_KINDS, f"model.kernel: unknown kernel kind {self.kernel!r}")
        _require(
            self.likelihood is None or self.likelihood in LIKELIHOOD_KINDS,
            f"model.likelihood: unknown likelihood kind {self.likelihood!r}",
        )
        _require(self.variance > 0, "model.variance must be positive")
        _require(self.noise_variance > 0, "model.noise_variance must be positive")
        _require(self.num_inducing >= 1, "model.num_inducing must be at least 1")
        _require(self.jitter > 0, "model.jitter must be positive")
        if self.lengthscales is not None:
            _require(
                len(self.lengthscales) >= 1 and all(ls > 0 for ls in self.lengthscales),
                "model.lengthscales must be a nonempty list of positive numbers",
            )

    def lengthscales_for(self, dim: int) -> tuple[float, ...]:
        if self.lengthscales is None:
            return (1.0,) * dim
        if len(self.lengthscales) == 1:
            return self.lengthscales * dim
        _require(
            len(self.lengthscales) == dim,
            f"model.lengthscales has {len(self.lengthscales)} entries, data has {dim} dimensions",
        )
        return self.lengthscales


@dataclass(frozen=True)
class FitConfig:
    max_iters: int = 100
    rho: float = 0.5
    schedule: str = "constant"
    decay: float = 0.0
    tol: float = 1e-6
    hyper_max_evals: int = 100

    def __post_init__(self):
        _require(self.schedule in RHO_SCHEDULES, f"fit.schedule: unknown schedule {self.schedule!r}")
        _require(0 < self.rho <= 1, "fit.rho must be in (0, 1]")
        _require(self.max_iters >= 1, "fit.max_iters must be at least 1")
        _require(self.tol > 0, "fit.tol must be positive")
        _require(self.decay >= 0, "fit.decay must be non-negative")
        _require(self.hyper_max_evals >= 0, "fit.hyper_max_evals must be non-negative")


@dataclass(frozen=True)
class AcquisitionConfig:
    kind: str = "ProductEISuccess"
    budget: int = 20
    incumbent: str = "observed"

    def __post_init__(self):
        _require(self.kind in ACQUISITION_KINDS, f"acquisition.kind: unknown acquisition {self.kind!r}")
        _require(self.incumbent in INCUMBENT_RULES, f"acquisition.incumbent: unknown rule {self.incumbent!r}")
        _require(self.budget >= 1, "acquisition.budget must be at least 1")


@dataclass(frozen=True)
class BOConfig:
    batch_size: int = 5
    iterations: int = 10
    init_size: int | None = None
    hyper_max_evals: int = 30
    update_inducing: bool = True

    def __post_init__(self):
        _require(self.batch_size >= 1, "bo.batch_size must be at least 1")
        _require(self.iterations >= 0, "bo.iterations must be non-negative")
        _require(self.init_size is None or self.init_size >= 2, "bo.init_size must be at least 2")
        _require(self.hyper_max_evals >= 0, "bo.hyper_max_evals must be non-negative")

    def init_size_for(self, dim: int) -> int:
        return self.init_size if self.init_size is not None else 3 * dim


@dataclass(frozen=True)
class ProblemConfig:
    name: str | None = None
    path: str | None = None
    noise_sd: float = 5.0
    flip_prob: float = 0.05
    n_per_batch: int = 100
    n_batches: int = 4
    batch_size: int = 100

    def __post_init__(self):
        _require(self.name is None or self.name in PROBLEM_KINDS, f"problem.name: unknown problem {self.name!r}")
        _require(self.name != "csv" or self.path is not None, "problem.path is required for csv problems")
        _require(self.noise_sd >= 0, "problem.noise_sd must be non-negative")
        _require(0 <= self.flip_prob <= 1, "problem.flip_prob must be in [0, 1]")
        _require(self.n_per_batch >= 10, "problem.n_per_batch must be at least 10")
        _require(self.n_batches >= 1, "problem.n_batches must be at least 1")
        _require(self.batch_size >= 1, "problem.batch_size must be at least 1")


@dataclass(frozen=True)
class StreamConfig:
    grid_resolution: int = 50
    learn_hyperparameters: bool = True

    def __post_init__(self):
        _require(self.grid_resolution >= 2, "stream.grid_resolution must be at least 2")


@dataclass(frozen=True)
class BenchConfig:
    sizes: tuple[int, ...] = (1000, 2000, 4000)
    num_inducing: int = 50
    repeats: int = 5

    def __post_init__(self):
        _require(len(self.sizes) >= 2 and all(n >= 1 for n in self.sizes), "bench.sizes needs two positive sizes")
        _require(self.num_inducing >= 1, "bench.num_inducing must be at least 1")
        _require(self.repeats >= 1, "bench.repeats must be at least 1")


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    fit: FitConfig = field(default_factory=FitConfig)
    acquisition: AcquisitionConfig = field(default_factory=AcquisitionConfig)
    bo: BOConfig = field(default_factory=BOConfig)
    problem: ProblemConfig = field(default_factory=ProblemConfig)
    stream: StreamConfig = field(default_factory=StreamConfig)
    bench: BenchConfig = field(default_factory=BenchConfig)
    seed: int = 0
    output_dir: str = "results"

    def __post_init__(self):
        _require(self.seed >= 0, "seed must be non-negative")

    def to_dict(self) -> dict:
        def plain(obj):
            if hasattr(obj, "__dataclass_fields__"):
                return {f.name: plain(getattr(obj, f.name)) for f in fields(obj)}
            if isinstance(obj, tuple):
                return list(obj)
            return obj

        return plain(self)


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _coerce(key: str, value, hint):
    origin = typing.get_origin(hint)
    if origin in (typing.Union, types.UnionType):
        options = typing.get_args(hint)
        if value is None and type(None) in options:
            return None
        (inner,) = [opt for opt in options if opt is not type(None)]
        return _coerce(key, value, inner)
    if origin is tuple:
        (item, _) = typing.get_args(hint)
        if not isinstance(value, list):
            raise ConfigError(f"{key}: expected a list, got {type(value).__name__}")
        return tuple(_coerce(f"{key}[{i}]", v, item) for i, v in enumerate(value))
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{key}: expected true or false, got {value!r}")
        return value
    if hint is int:
        if not isinstance(value, int) or isinstance(value, bool):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        return value
    if hint is float:
        if not _is_number(value):
            raise ConfigError(f"{key}: expected a number, got {value!r}")
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(f"{key}: expected a string, got {value!r}")
        return value
    if isinstance(hint, type) and hasattr(hint, "__dataclass_fields__"):
        return _build(hint, value, prefix=f"{key}.")
    raise ConfigError(f"{key}: unsupported field type")


def _build(cls, payload, *, prefix: str = ""):
    if not isinstance(payload, dict):
        raise ConfigError(f"{prefix.rstrip('.') or 'config'}: expected an object")
    hints = typing.get_type_hints(cls)
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(payload) - known)
    if unknown:
        raise ConfigError(f"unknown config key: {prefix}{unknown[0]}")
    kwargs = {name: _coerce(f"{prefix}{name}", value, hints[name]) for name, value in payload.items()}
    return cls(**kwargs)


def parse_config(payload: dict) -> ExperimentConfig:
    return _build(ExperimentConfig, payload)


def load_config(path: str | Path | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from exc
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid json: {exc.msg} (line {exc.lineno})") from exc
    return parse_config(payload)


def apply_overrides(
    config: ExperimentConfig,
    *,
    seed: int | None = None,
    out: str | None = None,
    batch_size: int | None = None,
    iterations: int | None = None,
    env: typing.Mapping[str, str] | None = None,
) -> ExperimentConfig:
    """Flag values win over the environment, which wins over the config file."""
    env = os.environ if env is None else env
    output_dir = out or env.get(OUTPUT_DIR_ENV) or config.output_dir
    bo = config.bo
    if batch_size is not None:
        bo = replace(bo, batch_size=batch_size)
    if iterations is not None:
        bo = replace(bo, iterations=iterations)
    return replace(config, seed=config.seed if seed is None else seed, output_dir=output_dir, bo=bo)
