from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.cluster.vq import ClusterError, kmeans2
from scipy.optimize import minimize

from .acquisition import AcquisitionSpec, Surrogates
from .config import ExperimentConfig, FitConfig, ModelConfig
from .data import ConstrainedProblem, Dataset, StreamClassification, grid_points
from .errors import ConfigError, NumericalError, ProblemEvaluationError
from .fantasy import FantasyBatch, fantasize_batch
from .kernels import Kernel
from .likelihoods import Bernoulli, Gaussian, Likelihood
from .model import DualState, FitResult, dual_condition, elbo, fit, predict, predict_y, rho_schedule
from .space import sobol_design

logger = logging.getLogger(__name__)

LLOYD_ITERATIONS = 25
KMEANS_RESTARTS = 5
LOG_PARAM_RANGE = (float(np.log(1e-4)), float(np.log(1e4)))


def select_inducing(X, m: int, seed: int = 0) -> np.ndarray:
    """k-means centroids over X, seeded from m distinct data points."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] == 0:
        raise ValueError("cannot select inducing points from empty data")
    if m < 1:
        raise ValueError(f"number of inducing points must be at least 1 (got {m})")
    unique = np.unique(X, axis=0)
    if m > unique.shape[0]:
        logger.warning(
            "asked for %d inducing points but data has %d distinct inputs; using %d",
            m,
            unique.shape[0],
            unique.shape[0],
        )
        m = unique.shape[0]
    if m == unique.shape[0]:
        return unique
    rng = np.random.default_rng(seed)
    for _ in range(KMEANS_RESTARTS):
        init = unique[rng.choice(unique.shape[0], size=m, replace=False)]
        try:
            centroids, _ = kmeans2(X, init, iter=LLOYD_ITERATIONS, minit="matrix", missing="raise")
        except ClusterError:
            continue
        return centroids
    logger.warning(
        "k-means left a cluster empty in %d restarts; using %d data points as inducing inputs", KMEANS_RESTARTS, m
    )
    return init


def build_kernel(model: ModelConfig, dim: int, lengthscales=None) -> Kernel:
    return Kernel.create(model.kernel, model.variance, lengthscales or model.lengthscales_for(dim))


def build_likelihood(model: ModelConfig, domain: str) -> Likelihood:
    kind = model.likelihood or ("Bernoulli" if domain == "binary" else "Gaussian")
    if kind == "Bernoulli":
        if domain != "binary":
            raise ConfigError("model.likelihood: Bernoulli needs binary labels in {0, 1}")
        return Bernoulli()
    return Gaussian(model.noise_variance)


def _fit(state: DualState, data: Dataset, config: FitConfig, *, track_elbo: bool = False) -> FitResult:
    schedule = rho_schedule(config.schedule, config.rho, config.decay)
    return fit(state, data, config.max_iters, schedule, config.tol, track_elbo=track_elbo)


def refit(state: DualState, data: Dataset, config: FitConfig, *, track_elbo: bool = False) -> FitResult:
    """Fit dual parameters from scratch at the state's Z, kernel and likelihood."""
    fresh = DualState.fresh(state.Z, state.kernel, state.likelihood, state.jitter)
    return _fit(fresh, data, config, track_elbo=track_elbo)


def _pack(state: DualState) -> np.ndarray:
    theta = [state.kernel.variance, *state.kernel.lengthscales]
    if isinstance(state.likelihood, Gaussian):
        theta.append(state.likelihood.noise_variance)
    return np.log(theta)


def _unpack(theta: np.ndarray, state: DualState) -> tuple[Kernel, Likelihood]:
    values = np.exp(np.clip(theta, *LOG_PARAM_RANGE))
    dim = state.kernel.dim
    kernel = state.kernel.with_params(values[0], values[1 : 1 + dim])
    likelihood = Gaussian(values[-1]) if isinstance(state.likelihood, Gaussian) else state.likelihood
    return kernel, likelihood


def update_hyperparameters(
    state: DualState, data: Dataset, config: FitConfig, max_evals: int | None = None
) -> DualState:
    """Nelder-Mead on the ELBO over log kernel variance, lengthscales and Gaussian noise.

    Every evaluation refits the dual parameters from scratch. The incoming
    hyperparameters are kept unless a candidate strictly improves the ELBO.
    """
    if data.n == 0:
        raise ValueError("data must be nonempty")
    max_evals = config.hyper_max_evals if max_evals is None else max_evals
    if max_evals == 0:
        return state

    incoming = refit(state, data, config).state
    best = {"state": incoming, "elbo": elbo(incoming, data)}
    start = best["elbo"]

    def negative_elbo(theta):
        kernel, likelihood = _unpack(theta, state)
        try:
            candidate = refit(DualState.fresh(state.Z, kernel, likelihood, state.jitter), data, config).state
            value = elbo(candidate, data)
        except NumericalError:
            return np.inf
        if not np.isfinite(value):
            return np.inf
        if value > best["elbo"]:
            best.update(state=candidate, elbo=value)
        return -value

    minimize(
        negative_elbo,
        _pack(state),
        method="Nelder-Mead",
        options={"maxfev": max_evals, "xatol": 1e-3, "fatol": 1e-6},
    )
    logger.info("hyperparameter search: elbo %.6g -> %.6g", start, best["elbo"])
    return best["state"]


def update_inducing(state: DualState, data: Dataset, m: int, config: FitConfig, seed: int = 0) -> DualState:
    """Re-select Z by k-means over all inputs and refit from scratch at the new Z."""
    Z = select_inducing(data.X, m, seed)
    return refit(DualState.fresh(Z, state.kernel, state.likelihood, state.jitter), data, config).state


def fit_dataset(data: Dataset, config: ExperimentConfig, seed: int | None = None) -> FitResult:
    """Inducing selection, optional hyperparameter search, then a traced fit."""
    seed = config.seed if seed is None else seed
    Z = select_inducing(data.X, config.model.num_inducing, seed)
    state = DualState.fresh(
        Z, build_kernel(config.model, data.dim), build_likelihood(config.model, data.domain), config.model.jitter
    )
    state = update_hyperparameters(state, data, config.fit)
    return refit(state, data, config.fit, track_elbo=True)


@dataclass(frozen=True)
class Standardizer:
    mean: float = 0.0
    scale: float = 1.0

    @classmethod
    def fit(cls, y) -> Standardizer:
        y = np.asarray(y, dtype=float)
        scale = float(np.std(y))
        return cls(float(np.mean(y)), scale if scale > 0.0 else 1.0)

    def forward(self, y):
        return (np.asarray(y, dtype=float) - self.mean) / self.scale

    def inverse(self, z):
        return np.asarray(z, dtype=float) * self.scale + self.mean


def best_feasible(y, success) -> float | None:
    feasible = np.asarray(success) == 1.0
    if not np.any(feasible):
        return None
    return float(np.max(np.asarray(y)[feasible]))


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    points: np.ndarray
    observed_y: np.ndarray
    observed_success: np.ndarray
    incumbent: float | None
    batch_best: float | None
    elbo_reg: float | None
    elbo_clf: float | None
    wall_ms: dict[str, float]
    batch: FantasyBatch | None = None

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "points": self.points.tolist(),
            "observed_y": self.observed_y.tolist(),
            "observed_success": [int(s) for s in self.observed_success],
            "incumbent": self.incumbent,
            "batch_best": self.batch_best,
            "elbo_reg": self.elbo_reg,
            "elbo_clf": self.elbo_clf,
            "wall_ms": dict(self.wall_ms),
            "fantasy": self.batch.to_dict() if self.batch is not None else None,
        }


@dataclass
class BOHistory:
    problem: dict
    seed: int
    batch_size: int
    records: list[IterationRecord] = field(default_factory=list)
    error: str | None = None

    @property
    def initial(self) -> IterationRecord:
        return self.records[0]

    @property
    def iterations(self) -> list[IterationRecord]:
        return self.records[1:]

    def incumbents(self) -> list[float | None]:
        return [r.incumbent for r in self.records]

    @property
    def final_incumbent(self) -> float | None:
        return self.records[-1].incumbent if self.records else None

    def to_dict(self) -> dict:
        return {
            "problem": self.problem,
            "seed": self.seed,
            "batch_size": self.batch_size,
            "error": self.error,
            "iterations": [r.to_dict() for r in self.records],
        }


def _sub_seed(*entropy: int) -> int:
    return int(np.random.SeedSequence(list(entropy)).generate_state(1)[0])


def _eval_seeds(seed: int, iteration: int, count: int) -> np.ndarray:
    return np.array([_sub_seed(seed, iteration, j) for j in range(count)])


def _elapsed_ms(start: float) -> float:
    return 1000.0 * (time.perf_counter() - start)


class _Surrogates:
    """Builds and refreshes the regression/classification pair used by run_bo."""

    def __init__(self, config: ExperimentConfig, problem: ConstrainedProblem):
        spec = AcquisitionSpec(config.acquisition.kind)
        self.config = config
        self.use_regression = spec.uses_regression
        self.use_classification = spec.uses_classification
        width = np.asarray(problem.bounds.upper) - np.asarray(problem.bounds.lower)
        if config.model.lengthscales is None:
            self.lengthscales = tuple(0.2 * width)
        else:
            self.lengthscales = config.model.lengthscales_for(problem.dim)
        self.models = Surrogates()
        self.scaler = Standardizer()

    def _initial(self, Z, likelihood: Likelihood) -> DualState:
        kernel = build_kernel(self.config.model, Z.shape[1], self.lengthscales)
        return DualState.fresh(Z, kernel, likelihood, self.config.model.jitter)

    def _refresh_one(self, previous: DualState | None, data: Dataset, likelihood: Likelihood, seed: int):
        fit_config = self.config.fit
        m = self.config.model.num_inducing
        if previous is None:
            state = self._initial(select_inducing(data.X, m, seed), likelihood)
        elif self.config.bo.update_inducing:
            state = update_inducing(previous, data, m, fit_config, seed)
        else:
            state = previous
        state = update_hyperparameters(state, data, fit_config, self.config.bo.hyper_max_evals)
        return refit(state, data, fit_config).state

    def refresh(self, X, y, success, seed: int) -> tuple[float | None, float | None]:
        self.scaler = Standardizer.fit(y)
        regression = classification = None
        elbo_reg = elbo_clf = None
        if self.use_regression:
            data = Dataset(X, self.scaler.forward(y), "real")
            regression = self._refresh_one(
                self.models.regression, data, Gaussian(self.config.model.noise_variance), seed
            )
            elbo_reg = elbo(regression, data)
        if self.use_classification:
            data = Dataset(X, success, "binary")
            classification = self._refresh_one(self.models.classification, data, Bernoulli(), seed)
            elbo_clf = elbo(classification, data)
        self.models = Surrogates(regression, classification)
        return elbo_reg, elbo_clf

    def acquisition_incumbent(self, X, y, success) -> float:
        """Incumbent in standardized units; the worst observation when nothing is feasible."""
        feasible = np.asarray(success) == 1.0
        if self.config.acquisition.incumbent == "posterior_mean" and self.models.regression is not None:
            mean = predict(self.models.regression, X[feasible] if np.any(feasible) else X).mean
            return float(np.max(mean))
        best = best_feasible(y, success)
        return float(self.scaler.forward(np.min(y) if best is None else best))


def run_bo(problem: ConstrainedProblem, config: ExperimentConfig, seed: int | None = None) -> BOHistory:
    seed = config.seed if seed is None else seed
    bo, acquisition = config.bo, config.acquisition
    init_size = bo.init_size_for(problem.dim)
    if init_size < 2:
        raise ConfigError("bo.init_size must be at least 2")
    history = BOHistory(problem.to_dict(), seed, bo.batch_size)
    surrogates = _Surrogates(config, problem)

    start = time.perf_counter()
    X = sobol_design(problem.bounds, init_size, seed)
    y, success = problem.evaluate(X, _eval_seeds(seed, 0, init_size))
    evaluate_ms = _elapsed_ms(start)
    start = time.perf_counter()
    elbo_reg, elbo_clf = surrogates.refresh(X, y, success, seed)
    incumbent = best_feasible(y, success)
    history.records.append(
        IterationRecord(
            0, X, y, success, incumbent, incumbent, elbo_reg, elbo_clf,
            {"evaluate": evaluate_ms, "refit": _elapsed_ms(start)},
        )
    )

    for iteration in range(1, bo.iterations + 1):
        wall: dict[str, float] = {}
        start = time.perf_counter()
        spec = AcquisitionSpec(acquisition.kind, surrogates.acquisition_incumbent(X, y, success))
        batch = fantasize_batch(
            surrogates.models, spec, problem.bounds, bo.batch_size, acquisition.budget, _sub_seed(seed, iteration)
        )
        wall["fantasize"] = _elapsed_ms(start)
        if surrogates.use_regression:
            batch = replace(batch, fantasized_values=surrogates.scaler.inverse(batch.fantasized_values))

        start = time.perf_counter()
        try:
            y_new, success_new = problem.evaluate(batch.points, _eval_seeds(seed, iteration, batch.k))
        except ProblemEvaluationError as exc:
            logger.error("iteration %d aborted: %s", iteration, exc)
            history.error = f"iteration {iteration}: {exc}"
            break
        wall["evaluate"] = _elapsed_ms(start)

        X = np.vstack([X, batch.points])
        y = np.concatenate([y, y_new])
        success = np.concatenate([success, success_new])
        start = time.perf_counter()
        elbo_reg, elbo_clf = surrogates.refresh(X, y, success, _sub_seed(seed, iteration, 1))
        wall["refit"] = _elapsed_ms(start)

        incumbent = best_feasible(y, success)
        history.records.append(
            IterationRecord(
                iteration, batch.points, y_new, success_new, incumbent,
                best_feasible(y_new, success_new), elbo_reg, elbo_clf, wall, batch,
            )
        )
        logger.info("iteration %d: incumbent %s", iteration, incumbent)
    return history


@dataclass(frozen=True)
class StreamResult:
    states: tuple[DualState, ...]
    offline: DualState
    xs: np.ndarray
    ys: np.ndarray
    batch_probs: tuple[np.ndarray, ...]
    offline_probs: np.ndarray
    gap: float
    accuracy_stream: float | None
    accuracy_offline: float | None

    @property
    def final(self) -> DualState:
        return self.states[-1]

    def summary(self) -> dict:
        return {
            "batches": len(self.states),
            "grid_shape": [len(self.ys), len(self.xs)],
            "mean_abs_gap": self.gap,
            "accuracy_stream": self.accuracy_stream,
            "accuracy_offline": self.accuracy_offline,
        }


def _accuracy(state: DualState, data: Dataset) -> float | None:
    if data.domain != "binary" or not isinstance(state.likelihood, Bernoulli):
        return None
    p = predict_y(state, data.X)[0]
    return float(np.mean((p >= 0.5) == (data.y == 1.0)))


def run_streaming(problem: StreamClassification, config: ExperimentConfig, seed: int | None = None) -> StreamResult:
    """Fit on the first batch, then condition on each later batch with Z and theta frozen.

    Also fits an offline model on the concatenated stream at the same Z and
    theta, and evaluates both on a grid over the data's bounding box (2-d only;
    otherwise the gap is measured at the training inputs).
    """
    seed = config.seed if seed is None else seed
    batches = problem.stream.batches
    if not batches:
        raise ValueError("stream must contain at least one batch")
    first = batches[0]
    Z = select_inducing(first.X, config.model.num_inducing, seed)
    state = DualState.fresh(
        Z, build_kernel(config.model, first.dim), build_likelihood(config.model, first.domain), config.model.jitter
    )
    if config.stream.learn_hyperparameters:
        state = update_hyperparameters(state, first, config.fit)
    state = refit(state, first, config.fit).state
    states = [state]
    for batch in batches[1:]:
        state = dual_condition(state, batch)
        states.append(state)

    full = problem.stream.concatenate()
    offline = refit(state, full, config.fit).state

    if problem.dim == 2:
        bounds = problem.bounds
        xs, ys, inputs = grid_points(bounds.lower, bounds.upper, config.stream.grid_resolution)
    else:
        xs, ys, inputs = np.empty(0), np.empty(0), full.X
    batch_probs = tuple(predict_y(s, inputs)[0] for s in states)
    offline_probs = predict_y(offline, inputs)[0]
    gap = float(np.mean(np.abs(batch_probs[-1] - offline_probs)))
    return StreamResult(
        tuple(states), offline, xs, ys, batch_probs, offline_probs, gap,
        _accuracy(states[-1], full), _accuracy(offline, full),
    )
