from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .acquisition import AcquisitionSpec, Surrogates, maximize_acquisition, success_probability
from .data import Dataset
from .model import clone_state, dual_condition, predict
from .space import BoxBounds

logger = logging.getLogger(__name__)

DUPLICATE_DISTANCE = 1e-9
MAX_RETRIES = 3


@dataclass(frozen=True)
class FantasyBatch:
    points: np.ndarray
    fantasized_values: np.ndarray
    acq_values: np.ndarray
    classification_labels: np.ndarray | None = None
    duplicate_warning: bool = False

    def __post_init__(self):
        if len(self.points) < 1:
            raise ValueError("a fantasy batch holds at least one point")
        if not np.all(np.isfinite(self.acq_values)):
            raise ValueError("acquisition values of a fantasy batch must be finite")

    @property
    def k(self) -> int:
        return len(self.points)

    def to_dict(self) -> dict:
        return {
            "points": np.asarray(self.points).tolist(),
            "fantasized_values": np.asarray(self.fantasized_values).tolist(),
            "acq_values": np.asarray(self.acq_values).tolist(),
            "duplicate_warning": self.duplicate_warning,
        }


def _scaled_distance(bounds: BoxBounds, x, others: list[np.ndarray]) -> float:
    if not others:
        return np.inf
    width = np.asarray(bounds.upper) - np.asarray(bounds.lower)
    return float(np.min(np.linalg.norm((np.vstack(others) - x) / width, axis=1)))


def _pick_seed(seed: int, index: int, retry: int) -> int:
    if index == 0 and retry == 0:
        return seed
    return int(np.random.SeedSequence([seed, index, retry]).generate_state(1)[0])


def fantasize_batch(
    models: Surrogates,
    spec: AcquisitionSpec,
    bounds: BoxBounds,
    k: int,
    budget: int = 20,
    seed: int = 0,
) -> FantasyBatch:
    """Greedy Kriging-Believer batch.

    Each pick maximizes the acquisition, then the cloned surrogates are
    conditioned on their own predictive mean at the pick (thresholded at 0.5
    for the classifier). The caller's states are never touched.
    """
    if k < 1:
        raise ValueError(f"batch size k must be at least 1 (got {k})")
    regression = clone_state(models.regression) if models.regression is not None else None
    classification = clone_state(models.classification) if models.classification is not None else None

    points: list[np.ndarray] = []
    values: list[float] = []
    labels: list[float] = []
    acq_values: list[float] = []
    duplicate = False
    for i in range(k):
        current = Surrogates(regression, classification)
        for retry in range(MAX_RETRIES + 1):
            x, value = maximize_acquisition(spec, current, bounds, budget, _pick_seed(seed, i, retry))
            if _scaled_distance(bounds, x, points) >= DUPLICATE_DISTANCE:
                break
        else:
            duplicate = True
            logger.warning("accepting duplicate batch point %d after %d retries", i, MAX_RETRIES)

        X = x[None, :]
        y_fantasy = np.nan
        if regression is not None:
            y_fantasy = float(predict(regression, X).mean[0])
            regression = dual_condition(regression, Dataset(X, [y_fantasy], "real"))
        if classification is not None:
            label = 1.0 if success_probability(classification, X)[0] >= 0.5 else 0.0
            labels.append(label)
            classification = dual_condition(classification, Dataset(X, [label], "binary"))
            if regression is None:
                y_fantasy = label
        points.append(x)
        values.append(y_fantasy)
        acq_values.append(value)

    return FantasyBatch(
        np.vstack(points),
        np.asarray(values),
        np.asarray(acq_values),
        np.asarray(labels) if classification is not None else None,
        duplicate,
    )
