from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np

from .config import BenchConfig, ModelConfig
from .data import Dataset
from .kernels import Kernel
from .likelihoods import Bernoulli, Gaussian
from .model import DualState, dual_condition
from .space import BoxBounds, sobol_design

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BenchRow:
    likelihood: str
    n_new: int
    median_ms: float


def _stream_data(n: int, domain: str, rng: np.random.Generator) -> Dataset:
    X = rng.uniform(0.0, 1.0, size=(n, 2))
    latent = np.sin(6.0 * X[:, 0]) + np.cos(4.0 * X[:, 1])
    if domain == "binary":
        return Dataset(X, (latent + rng.normal(0.0, 0.3, n) > 0.0).astype(float), "binary")
    return Dataset(X, latent + rng.normal(0.0, 0.1, n), "real")


def time_conditioning(state: DualState, data: Dataset, repeats: int) -> float:
    dual_condition(state, data.subset(slice(0, 1)))
    timings = []
    for _ in range(repeats):
        start = time.perf_counter()
        dual_condition(state, data)
        timings.append(1000.0 * (time.perf_counter() - start))
    return float(np.median(timings))


def bench_conditioning(bench: BenchConfig, model: ModelConfig, seed: int = 0) -> list[BenchRow]:
    rng = np.random.default_rng(seed)
    Z = sobol_design(BoxBounds((0.0, 0.0), (1.0, 1.0)), bench.num_inducing, seed)
    kernel = Kernel.create(model.kernel, 1.0, (0.2, 0.2))
    rows = []
    for likelihood, domain in ((Gaussian(model.noise_variance), "real"), (Bernoulli(), "binary")):
        state = DualState.fresh(Z, kernel, likelihood, model.jitter)
        for n_new in bench.sizes:
            median = time_conditioning(state, _stream_data(n_new, domain, rng), bench.repeats)
            logger.info("%s n_new=%d: %.3f ms", likelihood.kind, n_new, median)
            rows.append(BenchRow(likelihood.kind, n_new, median))
    return rows


def summarize(rows: list[BenchRow], bench: BenchConfig) -> dict:
    """Per likelihood: t(largest)/t(smallest) and a least-squares line through (n_new, ms)."""
    summary = {"num_inducing": bench.num_inducing, "repeats": bench.repeats, "likelihoods": {}}
    for kind in dict.fromkeys(row.likelihood for row in rows):
        subset = sorted((r for r in rows if r.likelihood == kind), key=lambda r: r.n_new)
        n = np.array([r.n_new for r in subset], dtype=float)
        t = np.array([r.median_ms for r in subset])
        slope, intercept = np.polyfit(n, t, 1)
        summary["likelihoods"][kind] = {
            "ratio": float(t[-1] / t[0]) if t[0] > 0 else None,
            "ideal_ratio": float(n[-1] / n[0]),
            "slope_ms_per_point": float(slope),
            "intercept_ms": float(intercept),
        }
    return summary
