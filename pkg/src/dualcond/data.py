from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParseError, ProblemEvaluationError
from .space import BoxBounds

DOMAINS = ("real", "binary")
PROBLEM_NAMES = ("noisy-branin-disk",)


@dataclass(frozen=True, eq=False)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    domain: str = "real"

    def __post_init__(self):
        if self.domain not in DOMAINS:
            raise ValueError(f"unknown data domain: {self.domain}")
        X = np.array(self.X, dtype=float, ndmin=2)
        y = np.array(self.y, dtype=float).reshape(-1)
        if X.size == 0 and X.shape[0] != 0:
            # np.array([], ndmin=2) has shape (1, 0)
            X = X.reshape(0, 0)
        if X.shape[0] != y.shape[0]:
            raise ValueError(f"dataset length mismatch: {X.shape[0]} inputs vs {y.shape[0]} outputs")
        if self.domain == "binary" and not np.all(np.isin(y, (0.0, 1.0))):
            raise ValueError("binary datasets need labels in {0, 1}; the -1/+1 convention is not accepted")
        X.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def append(self, X, y) -> Dataset:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.n == 0:
            return Dataset(X, y, self.domain)
        return Dataset(np.vstack([self.X, X]), np.concatenate([self.y, np.atleast_1d(y)]), self.domain)

    def subset(self, index) -> Dataset:
        return Dataset(self.X[index], self.y[index], self.domain)

    def equals(self, other: Dataset) -> bool:
        return (
            self.domain == other.domain
            and np.array_equal(self.X, other.X)
            and np.array_equal(self.y, other.y)
        )


@dataclass(frozen=True)
class StreamBatches:
    batches: tuple[Dataset, ...]

    def __post_init__(self):
        batches = tuple(self.batches)
        if batches:
            domains = {b.domain for b in batches}
            dims = {b.dim for b in batches}
            if len(domains) > 1 or len(dims) > 1:
                raise ValueError("stream batches must share domain and dimension")
        object.__setattr__(self, "batches", batches)

    def __len__(self) -> int:
        return len(self.batches)

    def __iter__(self):
        return iter(self.batches)

    def concatenate(self) -> Dataset:
        if not self.batches:
            raise ValueError("empty stream")
        first = self.batches[0]
        return Dataset(
            np.vstack([b.X for b in self.batches]),
            np.concatenate([b.y for b in self.batches]),
            first.domain,
        )


def partition_stream(dataset: Dataset, batch_size: int) -> StreamBatches:
    if batch_size < 1:
        raise ValueError(f"batch size must be at least 1 (got {batch_size})")
    starts = range(0, dataset.n, batch_size)
    return StreamBatches(tuple(dataset.subset(slice(s, s + batch_size)) for s in starts))


def generate_banana(n_per_batch: int = 100, n_batches: int = 4, seed: int = 0, noise_sd: float = 0.35) -> StreamBatches:
    """Two crossing crescents in 2-d, standardized and split round-robin into batches.

    Class 0 lies on the upper half of a radius-2 circle centred at (0, -0.5),
    class 1 on the lower half of one centred at (0, +0.5).
    """
    if n_per_batch < 10:
        raise ValueError(f"n_per_batch must be at least 10 (got {n_per_batch})")
    if n_batches < 1:
        raise ValueError(f"n_batches must be at least 1 (got {n_batches})")
    rng = np.random.default_rng(seed)
    n = n_per_batch * n_batches
    labels = rng.permutation(np.arange(n) % 2).astype(float)
    angle = rng.uniform(0.0, np.pi, size=n) + np.pi * labels
    centre_y = np.where(labels == 0.0, -0.5, 0.5)
    X = np.column_stack([2.0 * np.cos(angle), centre_y + 2.0 * np.sin(angle)])
    X = X + rng.normal(0.0, noise_sd, size=X.shape)
    X = (X - X.mean(axis=0)) / X.std(axis=0)
    full = Dataset(X, labels, "binary")
    return StreamBatches(tuple(full.subset(slice(b, None, n_batches)) for b in range(n_batches)))


def branin(X) -> np.ndarray:
    X = np.atleast_2d(X)
    x1, x2 = X[:, 0], X[:, 1]
    b = 5.1 / (4.0 * np.pi**2)
    c = 5.0 / np.pi
    t = 1.0 / (8.0 * np.pi)
    return (x2 - b * x1**2 + c * x1 - 6.0) ** 2 + 10.0 * (1.0 - t) * np.cos(x1) + 10.0


@dataclass(frozen=True)
class ConstrainedProblem:
    """Noisy objective to maximize plus a noisy binary success label."""

    name: str
    bounds: BoxBounds
    noise_sd: float = 5.0
    flip_prob: float = 0.05
    disk_center: tuple[float, float] = (3.0, 7.5)
    disk_radius: float = 4.0
    seed: int = 0

    @property
    def dim(self) -> int:
        return self.bounds.dim

    def objective(self, X) -> np.ndarray:
        return -branin(X)

    def feasible(self, X) -> np.ndarray:
        X = np.atleast_2d(X)
        return np.hypot(X[:, 0] - self.disk_center[0], X[:, 1] - self.disk_center[1]) <= self.disk_radius

    def evaluate(self, X, eval_seeds) -> tuple[np.ndarray, np.ndarray]:
        """Noisy objective and success label; deterministic given (x, eval_seed)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        eval_seeds = np.atleast_1d(eval_seeds)
        if len(eval_seeds) != X.shape[0]:
            raise ValueError("one evaluation seed is needed per point")
        if not np.all(np.isfinite(X)) or not np.all(self.bounds.contains(X)):
            raise ProblemEvaluationError("evaluation points must be finite and inside the problem bounds")
        y = self.objective(X)
        success = self.feasible(X).astype(float)
        for i, eval_seed in enumerate(eval_seeds):
            rng = np.random.default_rng([self.seed, int(eval_seed)])
            y[i] += rng.normal(0.0, self.noise_sd)
            if rng.uniform() < self.flip_prob:
                success[i] = 1.0 - success[i]
        return y, success

    def reference_optimum(self, resolution: int = 601) -> tuple[np.ndarray, float]:
        """Best feasible noiseless objective on a dense grid."""
        g1 = np.linspace(self.bounds.lower[0], self.bounds.upper[0], resolution)
        g2 = np.linspace(self.bounds.lower[1], self.bounds.upper[1], resolution)
        grid = np.column_stack([a.ravel() for a in np.meshgrid(g1, g2)])
        grid = grid[self.feasible(grid)]
        values = self.objective(grid)
        best = int(np.argmax(values))
        return grid[best], float(values[best])

    def to_dict(self) -> dict:
        x_best, f_best = self.reference_optimum()
        return {
            "name": self.name,
            "bounds": self.bounds.to_dict(),
            "noise_sd": self.noise_sd,
            "flip_prob": self.flip_prob,
            "disk_center": list(self.disk_center),
            "disk_radius": self.disk_radius,
            "reference_optimum": {"x": x_best.tolist(), "value": f_best},
        }


def generate_constrained_problem(
    name: str, seed: int = 0, noise_sd: float = 5.0, flip_prob: float = 0.05
) -> ConstrainedProblem:
    if name not in PROBLEM_NAMES:
        raise ValueError(f"unknown problem: {name} (expected one of: {', '.join(PROBLEM_NAMES)})")
    bounds = BoxBounds((-5.0, 0.0), (10.0, 15.0))
    return ConstrainedProblem(name, bounds, noise_sd=noise_sd, flip_prob=flip_prob, seed=seed)


def save_csv(dataset: Dataset, path) -> None:
    header = [f"x{i + 1}" for i in range(dataset.dim)] + ["y"]
    with Path(path).open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for x, y in zip(dataset.X, dataset.y):
            label = str(int(y)) if dataset.domain == "binary" else format(y, ".17g")
            writer.writerow([format(v, ".17g") for v in x] + [label])


def load_csv(path) -> Dataset:
    with Path(path).open(newline="", encoding="utf-8") as handle:
        rows = list(csv.reader(handle))
    if not rows:
        raise ParseError("missing header row", line=1)
    header = [cell.strip() for cell in rows[0]]
    dim = len(header) - 1
    if dim < 1 or header[-1] != "y" or header[:-1] != [f"x{i + 1}" for i in range(dim)]:
        raise ParseError(f"header must be x1,...,xd,y (got {','.join(header)})", line=1)
    values = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != dim + 1:
            raise ParseError(f"expected {dim + 1} cells, found {len(row)}", line=lineno)
        try:
            values.append([float(cell) for cell in row])
        except ValueError:
            bad = next(cell for cell in row if not _is_float(cell))
            raise ParseError(f"non-numeric cell {bad!r}", line=lineno) from None
    data = np.array(values, dtype=float).reshape(-1, dim + 1)
    y = data[:, -1]
    domain = "binary" if y.size and np.all(np.isin(y, (0.0, 1.0))) else "real"
    return Dataset(data[:, :-1], y, domain)


def _is_float(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def grid_points(lower, upper, resolution: int = 50) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    xs = np.linspace(lower[0], upper[0], resolution)
    ys = np.linspace(lower[1], upper[1], resolution)
    gx, gy = np.meshgrid(xs, ys)
    return xs, ys, np.column_stack([gx.ravel(), gy.ravel()])


def grid_to_dict(xs: np.ndarray, ys: np.ndarray, probs: np.ndarray) -> dict:
    """Row-major grid: probs[i * len(xs) + j] is the value at (xs[j], ys[i])."""
    return {
        "shape": [len(ys), len(xs)],
        "xs": xs.tolist(),
        "ys": ys.tolist(),
        "probs": np.asarray(probs, dtype=float).ravel().tolist(),
    }


@dataclass(frozen=True)
class StreamClassification:
    """An ordered stream of batches, either generated or read from a CSV file."""

    name: str
    stream: StreamBatches

    @classmethod
    def banana(cls, n_per_batch: int = 100, n_batches: int = 4, seed: int = 0) -> StreamClassification:
        return cls("banana", generate_banana(n_per_batch, n_batches, seed))

    @classmethod
    def from_csv(cls, path, batch_size: int) -> StreamClassification:
        return cls(Path(path).name, partition_stream(load_csv(path), batch_size))

    @property
    def dim(self) -> int:
        return self.stream.batches[0].dim

    @property
    def bounds(self) -> BoxBounds:
        X = self.stream.concatenate().X
        lower, upper = X.min(axis=0), X.max(axis=0)
        pad = 0.1 * np.maximum(upper - lower, 1e-6)
        return BoxBounds(lower - pad, upper + pad)
