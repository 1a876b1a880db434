from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize
from scipy.stats import norm

from .errors import ConfigError
from .likelihoods import Bernoulli, Gaussian
from .model import DualState, predict, predict_y
from .space import BoxBounds, sobol_design

ACQUISITION_KINDS = ("EI", "SuccessProb", "ProductEISuccess")
MIN_SIGMA = 1e-12
CANDIDATES_PER_BUDGET = 50
LOCAL_STARTS = 5

__all__ = [
    "ACQUISITION_KINDS",
    "AcquisitionSpec",
    "BoxBounds",
    "Surrogates",
    "ei_from_moments",
    "eval_acquisition",
    "expected_improvement",
    "maximize_acquisition",
    "success_probability",
]


@dataclass(frozen=True)
class AcquisitionSpec:
    kind: str
    incumbent: float | None = None
    maximize: bool = True

    def __post_init__(self):
        if self.kind not in ACQUISITION_KINDS:
            raise ConfigError(f"unknown acquisition kind: {self.kind}")
        if self.incumbent is not None:
            incumbent = float(self.incumbent)
            if np.isnan(incumbent):
                raise ValueError("incumbent must not be nan")
            object.__setattr__(self, "incumbent", incumbent)

    @property
    def uses_regression(self) -> bool:
        return self.kind in ("EI", "ProductEISuccess")

    @property
    def uses_classification(self) -> bool:
        return self.kind in ("SuccessProb", "ProductEISuccess")

    def with_incumbent(self, incumbent: float) -> AcquisitionSpec:
        return replace(self, incumbent=incumbent)


@dataclass(frozen=True)
class Surrogates:
    regression: DualState | None = None
    classification: DualState | None = None

    def __post_init__(self):
        if self.regression is not None and not isinstance(self.regression.likelihood, Gaussian):
            raise ConfigError("the regression surrogate needs a Gaussian likelihood")
        if self.classification is not None and not isinstance(self.classification.likelihood, Bernoulli):
            raise ConfigError("the classification surrogate needs a Bernoulli likelihood")

    def states(self) -> tuple[DualState, ...]:
        return tuple(s for s in (self.regression, self.classification) if s is not None)


def ei_from_moments(mean, std, incumbent: float, maximize: bool = True) -> np.ndarray:
    mean = np.asarray(mean, dtype=float)
    std = np.asarray(std, dtype=float)
    improvement = mean - incumbent if maximize else incumbent - mean
    if not np.isfinite(incumbent):
        # nothing can beat +inf; everything beats -inf
        return np.where(np.isneginf(improvement), 0.0, np.inf)
    degenerate = std < MIN_SIGMA
    safe_std = np.where(degenerate, 1.0, std)
    z = improvement / safe_std
    ei = safe_std * (z * norm.cdf(z) + norm.pdf(z))
    return np.where(degenerate, np.maximum(improvement, 0.0), np.maximum(ei, 0.0))


def expected_improvement(reg_state: DualState, X, incumbent: float, maximize: bool = True) -> np.ndarray:
    """Plug-in EI on the latent prediction, one value per row of X."""
    pred = predict(reg_state, X)
    return ei_from_moments(pred.mean, np.sqrt(pred.variance), incumbent, maximize)


def success_probability(clf_state: DualState, X) -> np.ndarray:
    return predict_y(clf_state, X)[0]


def eval_acquisition(spec: AcquisitionSpec, models: Surrogates, X) -> np.ndarray:
    if spec.uses_regression:
        if models.regression is None:
            raise ConfigError(f"{spec.kind} acquisition needs a regression model")
        if spec.incumbent is None:
            raise ConfigError(f"{spec.kind} acquisition needs an incumbent")
    if spec.uses_classification and models.classification is None:
        raise ConfigError(f"{spec.kind} acquisition needs a classification model")

    if spec.kind == "SuccessProb":
        return success_probability(models.classification, X)
    ei = expected_improvement(models.regression, X, spec.incumbent, spec.maximize)
    if spec.kind == "EI":
        return ei
    return ei * success_probability(models.classification, X)


def maximize_acquisition(
    spec: AcquisitionSpec, models: Surrogates, bounds: BoxBounds, budget: int = 20, seed: int = 0
) -> tuple[np.ndarray, float]:
    """Sobol candidate sweep, then Nelder-Mead from the best few candidates.

    Ties in the sweep go to the lowest candidate index; every iterate is
    clipped to the bounds and the returned value is re-evaluated at x*.
    """
    if budget < 1:
        raise ValueError(f"acquisition budget must be at least 1 (got {budget})")
    candidates = sobol_design(bounds, budget * CANDIDATES_PER_BUDGET, seed)
    values = np.nan_to_num(eval_acquisition(spec, models, candidates), nan=-np.inf)
    starts = np.argsort(-values, kind="stable")[:LOCAL_STARTS]

    def negative(x):
        return -float(eval_acquisition(spec, models, bounds.clip(x)[None, :])[0])

    step = 0.05 * (np.asarray(bounds.upper) - np.asarray(bounds.lower))
    best_x, best_value = candidates[starts[0]], float(values[starts[0]])
    for index in starts:
        x0 = candidates[index]
        direction = np.where(x0 + step <= np.asarray(bounds.upper), step, -step)
        simplex = np.vstack([x0, x0 + np.diag(direction)])
        result = minimize(
            negative,
            x0,
            method="Nelder-Mead",
            bounds=list(zip(bounds.lower, bounds.upper)),
            options={"initial_simplex": simplex, "maxfev": 20 * budget, "xatol": 1e-6, "fatol": 1e-12},
        )
        x = bounds.clip(result.x)
        value = float(eval_acquisition(spec, models, x[None, :])[0])
        if value > best_value:
            best_x, best_value = x, value
    return best_x, float(eval_acquisition(spec, models, best_x[None, :])[0])
