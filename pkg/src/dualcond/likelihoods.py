from __future__ import annotations

from dataclasses import dataclass
from functools import cache

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.special import log_ndtr, ndtr

LIKELIHOOD_KINDS = ("Gaussian", "Bernoulli")
QUADRATURE_NODES = 100
LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class MarginalMoments:
    """Latent marginal mean and variance, one entry per input."""

    mean: np.ndarray
    variance: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        variance = np.atleast_1d(np.asarray(self.variance, dtype=float))
        if mean.shape != variance.shape:
            raise ValueError(f"moment shapes differ: {mean.shape} vs {variance.shape}")
        if np.any(variance < 0.0):
            raise ValueError("marginal variance must be non-negative")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "variance", variance)


@cache
def gauss_hermite(n: int = QUADRATURE_NODES) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = hermgauss(n)
    weights = weights / np.sqrt(np.pi)
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return nodes, weights


def inverse_mills(z: np.ndarray) -> np.ndarray:
    """phi(z) / Phi(z), evaluated in log space so it stays finite for very negative z."""
    return np.exp(-0.5 * z**2 - 0.5 * LOG_2PI - log_ndtr(z))


@dataclass(frozen=True)
class Gaussian:
    noise_variance: float = 1.0

    kind = "Gaussian"
    domain = "real"

    def __post_init__(self):
        object.__setattr__(self, "noise_variance", float(self.noise_variance))
        if not self.noise_variance > 0.0:
            raise ValueError(f"noise variance must be positive (got {self.noise_variance})")

    def check_labels(self, y) -> np.ndarray:
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if not np.all(np.isfinite(y)):
            raise ValueError("gaussian observations must be finite")
        return y

    def log_prob(self, y, f) -> np.ndarray:
        y = self.check_labels(y)
        return -0.5 * (LOG_2PI + np.log(self.noise_variance)) - 0.5 * (y - f) ** 2 / self.noise_variance

    def expected_log_prob(self, y, moments: MarginalMoments) -> np.ndarray:
        y = self.check_labels(y)
        resid2 = (y - moments.mean) ** 2 + moments.variance
        return -0.5 * (LOG_2PI + np.log(self.noise_variance)) - 0.5 * resid2 / self.noise_variance

    def expectation_grads(self, y, moments: MarginalMoments) -> tuple[np.ndarray, np.ndarray]:
        y = self.check_labels(y)
        d1 = (y - moments.mean) / self.noise_variance
        d2 = np.full_like(d1, -0.5 / self.noise_variance)
        return d1, d2

    def predict_y(self, moments: MarginalMoments) -> tuple[np.ndarray, np.ndarray]:
        return moments.mean, moments.variance + self.noise_variance

    def to_dict(self) -> dict:
        return {"kind": self.kind, "noise_variance": self.noise_variance}


@dataclass(frozen=True)
class Bernoulli:
    link: str = "probit"
    quadrature_nodes: int = QUADRATURE_NODES

    kind = "Bernoulli"
    domain = "binary"

    def __post_init__(self):
        if self.link != "probit":
            raise ValueError(f"unsupported bernoulli link: {self.link} (only probit)")

    def check_labels(self, y) -> np.ndarray:
        y = np.atleast_1d(np.asarray(y, dtype=float))
        bad = ~np.isin(y, (0.0, 1.0))
        if np.any(bad):
            raise ValueError(
                f"bernoulli labels must be 0 or 1 (got {y[bad][0]:g}); the -1/+1 convention is not accepted"
            )
        return y

    def log_prob(self, y, f) -> np.ndarray:
        sign = 2.0 * self.check_labels(y) - 1.0
        return log_ndtr(sign * f)

    def _quadrature(self, y, moments: MarginalMoments):
        sign = 2.0 * self.check_labels(y) - 1.0
        nodes, weights = gauss_hermite(self.quadrature_nodes)
        f = moments.mean[:, None] + np.sqrt(2.0 * moments.variance)[:, None] * nodes[None, :]
        return sign[:, None], f, weights

    def expected_log_prob(self, y, moments: MarginalMoments) -> np.ndarray:
        sign, f, weights = self._quadrature(y, moments)
        return log_ndtr(sign * f) @ weights

    def expectation_grads(self, y, moments: MarginalMoments) -> tuple[np.ndarray, np.ndarray]:
        # Bonnet: dE/dmean = E[dlogp/df]; Price: dE/dvar = E[d2logp/df2] / 2
        sign, f, weights = self._quadrature(y, moments)
        z = sign * f
        ratio = inverse_mills(z)
        d1 = (sign * ratio) @ weights
        d2 = 0.5 * (-ratio * (z + ratio)) @ weights
        return d1, np.minimum(d2, 0.0)

    def predict_y(self, moments: MarginalMoments) -> tuple[np.ndarray, np.ndarray]:
        p = ndtr(moments.mean / np.sqrt(1.0 + moments.variance))
        return p, p * (1.0 - p)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "link": self.link}


Likelihood = Gaussian | Bernoulli


def likelihood_from_dict(payload: dict) -> Likelihood:
    kind = payload.get("kind")
    if kind == "Gaussian":
        return Gaussian(payload["noise_variance"])
    if kind == "Bernoulli":
        return Bernoulli(payload.get("link", "probit"))
    raise ValueError(f"unknown likelihood kind: {kind}")
