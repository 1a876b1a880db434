from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

KERNEL_KINDS = ("Matern52", "SquaredExponential")
SQRT5 = np.sqrt(5.0)


@dataclass(frozen=True)
class KernelParams:
    variance: float
    lengthscales: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "variance", float(self.variance))
        object.__setattr__(self, "lengthscales", tuple(float(ls) for ls in self.lengthscales))
        if not self.variance > 0.0:
            raise ValueError(f"kernel variance must be positive (got {self.variance})")
        if not self.lengthscales:
            raise ValueError("kernel needs at least one lengthscale")
        if any(not ls > 0.0 for ls in self.lengthscales):
            raise ValueError(f"kernel lengthscales must be positive (got {self.lengthscales})")

    @property
    def dim(self) -> int:
        return len(self.lengthscales)


@dataclass(frozen=True)
class Kernel:
    kind: str
    params: KernelParams

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"unknown kernel kind: {self.kind}")

    @classmethod
    def create(cls, kind: str, variance: float, lengthscales) -> Kernel:
        return cls(kind, KernelParams(variance, tuple(np.atleast_1d(lengthscales))))

    @property
    def variance(self) -> float:
        return self.params.variance

    @property
    def lengthscales(self) -> tuple[float, ...]:
        return self.params.lengthscales

    @property
    def dim(self) -> int:
        return self.params.dim

    def with_params(self, variance: float, lengthscales) -> Kernel:
        return Kernel.create(self.kind, variance, lengthscales)

    def _profile(self, r2: np.ndarray) -> np.ndarray:
        r2 = np.maximum(r2, 0.0)
        if self.kind == "SquaredExponential":
            return self.variance * np.exp(-0.5 * r2)
        r = np.sqrt(r2)
        return self.variance * (1.0 + SQRT5 * r + 5.0 / 3.0 * r2) * np.exp(-SQRT5 * r)

    def _scaled(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.dim:
            raise ValueError(
                f"dimension mismatch: points have {X.shape[1]} columns, kernel has {self.dim} lengthscales"
            )
        return X / np.asarray(self.lengthscales)

    def __call__(self, x, x2) -> float:
        a = np.atleast_1d(np.asarray(x, dtype=float))
        b = np.atleast_1d(np.asarray(x2, dtype=float))
        if a.shape != b.shape:
            raise ValueError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
        return float(self.gram(a[None, :], b[None, :])[0, 0])

    def gram(self, X, X2=None) -> np.ndarray:
        A = self._scaled(X)
        if X2 is None:
            # pairwise squared differences are computed per pair, so the result is exactly symmetric
            return self._profile(cdist(A, A, "sqeuclidean"))
        return self._profile(cdist(A, self._scaled(X2), "sqeuclidean"))

    def diag(self, X) -> np.ndarray:
        return np.full(self._scaled(X).shape[0], self.variance)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "variance": self.variance, "lengthscales": list(self.lengthscales)}

    @classmethod
    def from_dict(cls, payload: dict) -> Kernel:
        return cls.create(payload["kind"], payload["variance"], payload["lengthscales"])


def kernel_eval(kind: str, params: KernelParams, x, x2) -> float:
    return Kernel(kind, params)(x, x2)


def gram(kind: str, params: KernelParams, X, X2=None) -> np.ndarray:
    return Kernel(kind, params).gram(X, X2)
