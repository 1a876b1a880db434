from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc


@dataclass(frozen=True)
class BoxBounds:
    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        lower = tuple(float(v) for v in np.atleast_1d(self.lower))
        upper = tuple(float(v) for v in np.atleast_1d(self.upper))
        if len(lower) != len(upper):
            raise ValueError(f"bounds dimension mismatch: {len(lower)} lower vs {len(upper)} upper")
        if not lower:
            raise ValueError("bounds need at least one dimension")
        if any(not (lo < hi) for lo, hi in zip(lower, upper)):
            raise ValueError(f"degenerate bounds: lower {lower} must be < upper {upper} elementwise")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dim(self) -> int:
        return len(self.lower)

    def clip(self, X) -> np.ndarray:
        return np.clip(X, self.lower, self.upper)

    def scale(self, U) -> np.ndarray:
        """Map points from the unit cube into the box."""
        return qmc.scale(np.atleast_2d(U), self.lower, self.upper)

    def contains(self, X) -> np.ndarray:
        X = np.atleast_2d(X)
        return np.all((X >= np.asarray(self.lower)) & (X <= np.asarray(self.upper)), axis=1)

    def to_dict(self) -> dict:
        return {"lower": list(self.lower), "upper": list(self.upper)}


def sobol_design(bounds: BoxBounds, n: int, seed: int) -> np.ndarray:
    """First n points of a scrambled Sobol sequence, scaled into bounds."""
    if n < 1:
        raise ValueError(f"design size must be at least 1 (got {n})")
    sampler = qmc.Sobol(d=bounds.dim, scramble=True, seed=seed)
    exponent = int(np.ceil(np.log2(n))) if n > 1 else 0
    return bounds.scale(sampler.random_base2(exponent)[:n])
