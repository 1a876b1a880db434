from __future__ import annotations

import base64
import hashlib
import json
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .data import Dataset
from .kernels import Kernel
from .likelihoods import Gaussian, Likelihood, MarginalMoments, likelihood_from_dict
from .linalg import (
    DEFAULT_JITTER,
    check_psd,
    chol_solve,
    cholesky,
    jitter_cholesky,
    symmetrize,
    tri_solve,
)

logger = logging.getLogger(__name__)

STATE_VERSION = 1
CLAMP_WARN_FRACTION = 0.01
RHO_SCHEDULES = ("constant", "decay")


def _frozen(a, *, ndim: int) -> np.ndarray:
    out = np.array(a, dtype=float, copy=True, ndmin=ndim)
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class DualState:
    """Dual parameters (lambda, Lambda) of q(u) anchored at Z with fixed kernel and likelihood.

    The moments follow from m = V lambda and V = (Kzz^-1 + Lambda)^-1. Every
    operation returns a new state; arrays are read-only.
    """

    lam: np.ndarray
    Lam: np.ndarray
    Z: np.ndarray
    kernel: Kernel
    likelihood: Likelihood
    jitter: float = DEFAULT_JITTER
    kzz_chol: np.ndarray | None = None
    jitter_used: float = field(default=DEFAULT_JITTER)

    def __post_init__(self):
        Z = _frozen(self.Z, ndim=2)
        m = Z.shape[0]
        if m < 1:
            raise ValueError("inducing set needs at least one point")
        if Z.shape[1] != self.kernel.dim:
            raise ValueError(
                f"dimension mismatch: inducing points have {Z.shape[1]} columns, kernel has {self.kernel.dim}"
            )
        lam = _frozen(self.lam, ndim=1)
        Lam = _frozen(self.Lam, ndim=2)
        if lam.shape != (m,) or Lam.shape != (m, m):
            raise ValueError(f"dual parameter shapes {lam.shape}, {Lam.shape} do not match m={m}")
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "Lam", Lam)
        if self.kzz_chol is None:
            L, level = jitter_cholesky(self.kernel.gram(Z), self.jitter)
            object.__setattr__(self, "kzz_chol", _frozen(L, ndim=2))
            object.__setattr__(self, "jitter_used", level)
        elif self.kzz_chol.flags.writeable:
            object.__setattr__(self, "kzz_chol", _frozen(self.kzz_chol, ndim=2))

    @classmethod
    def fresh(cls, Z, kernel: Kernel, likelihood: Likelihood, jitter: float = DEFAULT_JITTER) -> DualState:
        m = np.atleast_2d(Z).shape[0]
        return cls(np.zeros(m), np.zeros((m, m)), Z, kernel, likelihood, jitter)

    @property
    def m(self) -> int:
        return self.Z.shape[0]

    def evolve(self, lam, Lam) -> DualState:
        """Same anchor (Z, kernel, cached factor), new dual parameters."""
        return DualState(
            lam, Lam, self.Z, self.kernel, self.likelihood, self.jitter, self.kzz_chol, self.jitter_used
        )

    def kzz(self) -> np.ndarray:
        L = self.kzz_chol
        return L @ L.T


@dataclass(frozen=True)
class MomentState:
    m_star: np.ndarray
    V_star: np.ndarray
    # chol of B = I + L^T Lambda L, with Kzz = L L^T
    b_chol: np.ndarray


@dataclass(frozen=True)
class Prediction:
    mean: np.ndarray
    variance: np.ndarray
    cov: np.ndarray | None = None
    clamped: int = 0


@dataclass(frozen=True)
class FitResult:
    state: DualState
    converged: bool
    iterations: int
    elbo_trace: tuple[float, ...] = ()


@lru_cache(maxsize=16)
def to_moments(state: DualState) -> MomentState:
    # keyed on identity; states and their arrays are immutable
    L = state.kzz_chol
    B = np.eye(state.m) + L.T @ state.Lam @ L
    LB = cholesky(symmetrize(B))
    W = tri_solve(LB, L.T)
    V = symmetrize(W.T @ W)
    m_star = V @ state.lam
    for a in (m_star, V, LB):
        a.flags.writeable = False
    return MomentState(m_star, V, LB)


def _projection(state: DualState, X) -> tuple[np.ndarray, np.ndarray]:
    """A = Kxz Kzz^-1 with shape (n, m), and P = L^-1 Kzx so that A Kzz A^T = P^T P."""
    P = tri_solve(state.kzz_chol, state.kernel.gram(state.Z, X))
    return tri_solve(state.kzz_chol, P, trans="T").T, P


def _marginals(state: DualState, X, moments: MomentState | None = None):
    moments = moments or to_moments(state)
    A, P = _projection(state, X)
    mean = A @ moments.m_star
    var = state.kernel.diag(X) - np.sum(P**2, axis=0) + np.sum((A @ moments.V_star) * A, axis=1)
    return A, P, mean, var


def _clamp(var: np.ndarray) -> tuple[np.ndarray, int]:
    negative = var < 0.0
    count = int(np.count_nonzero(negative))
    if count and count > CLAMP_WARN_FRACTION * var.size:
        logger.warning("clamped %d of %d negative predictive variances to zero", count, var.size)
    return np.where(negative, 0.0, var), count


def predict(state: DualState, Xtest, full_cov: bool = False) -> Prediction:
    Xtest = np.atleast_2d(np.asarray(Xtest, dtype=float))
    if Xtest.shape[1] != state.Z.shape[1]:
        raise ValueError(
            f"dimension mismatch: test points have {Xtest.shape[1]} columns, model has {state.Z.shape[1]}"
        )
    moments = to_moments(state)
    A, P, mean, var = _marginals(state, Xtest, moments)
    var, clamped = _clamp(var)
    cov = None
    if full_cov:
        cov = symmetrize(state.kernel.gram(Xtest) - P.T @ P + A @ moments.V_star @ A.T)
    return Prediction(mean, var, cov, clamped)


def predict_y(state: DualState, Xtest) -> tuple[np.ndarray, np.ndarray]:
    pred = predict(state, Xtest)
    return state.likelihood.predict_y(MarginalMoments(pred.mean, pred.variance))


def _site_gradients(state: DualState, data: Dataset):
    A, _, mean, var = _marginals(state, data.X)
    var, _ = _clamp(var)
    d1, d2 = state.likelihood.expectation_grads(data.y, MarginalMoments(mean, var))
    g1 = A.T @ (d1 - 2.0 * d2 * mean)
    g2 = -2.0 * (A.T * d2) @ A
    return g1, g2


def _check_data(state: DualState, data: Dataset) -> None:
    if data.n == 0:
        raise ValueError("data must be nonempty")
    if data.dim != state.Z.shape[1]:
        raise ValueError(f"dimension mismatch: data has {data.dim} columns, model has {state.Z.shape[1]}")


def natgrad_step(state: DualState, data: Dataset, rho: float) -> DualState:
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"step size rho must be in [0, 1] (got {rho})")
    _check_data(state, data)
    if rho == 0.0:
        return state
    g1, g2 = _site_gradients(state, data)
    lam = (1.0 - rho) * state.lam + rho * g1
    Lam = symmetrize((1.0 - rho) * state.Lam + rho * g2)
    check_psd(Lam, name="Lambda")
    return state.evolve(lam, Lam)


def rho_schedule(kind: str = "constant", rho: float = 0.5, decay: float = 0.0) -> Callable[[int], float]:
    if kind not in RHO_SCHEDULES:
        raise ValueError(f"unknown rho schedule: {kind}")
    if kind == "constant":
        return lambda t: rho
    return lambda t: rho / (1.0 + decay * t)


def _rel_change(new: np.ndarray, old: np.ndarray) -> float:
    return float(np.linalg.norm(new - old) / (1.0 + np.linalg.norm(new)))


def fit(
    state: DualState,
    data: Dataset,
    max_iters: int = 100,
    schedule: Callable[[int], float] | None = None,
    tol: float = 1e-6,
    *,
    track_elbo: bool = False,
) -> FitResult:
    _check_data(state, data)
    trace: list[float] = []
    if isinstance(state.likelihood, Gaussian):
        state = natgrad_step(state, data, 1.0)
        if track_elbo:
            trace.append(elbo(state, data))
        return FitResult(state, True, 1, tuple(trace))

    schedule = schedule or rho_schedule()
    for t in range(max_iters):
        new = natgrad_step(state, data, schedule(t))
        if track_elbo:
            trace.append(elbo(new, data))
        done = _rel_change(new.lam, state.lam) < tol and _rel_change(new.Lam, state.Lam) < tol
        state = new
        if done:
            return FitResult(state, True, t + 1, tuple(trace))
    logger.info("natural-gradient fit stopped at max_iters=%d without converging", max_iters)
    return FitResult(state, False, max_iters, tuple(trace))


def dual_condition(state: DualState, new_data: Dataset) -> DualState:
    """One-step additive update from new data only, at fixed Z and kernel."""
    _check_data(state, new_data)
    g1, g2 = _site_gradients(state, new_data)
    Lam = symmetrize(state.Lam + g2)
    check_psd(Lam, name="Lambda")
    return state.evolve(state.lam + g1, Lam)


def kl_divergence(state: DualState, moments: MomentState | None = None) -> float:
    """KL(N(m, V) || N(0, Kzz)) using V = L B^-1 L^T."""
    moments = moments or to_moments(state)
    LB = moments.b_chol
    B_inv = chol_solve(LB, np.eye(state.m))
    maha = tri_solve(state.kzz_chol, moments.m_star)
    logdet_ratio = 2.0 * np.sum(np.log(np.diag(LB)))
    return 0.5 * (np.trace(B_inv) + maha @ maha - state.m + logdet_ratio)


def elbo(state: DualState, data: Dataset) -> float:
    _check_data(state, data)
    moments = to_moments(state)
    _, _, mean, var = _marginals(state, data.X, moments)
    var, _ = _clamp(var)
    ell = state.likelihood.expected_log_prob(data.y, MarginalMoments(mean, var))
    return float(np.sum(ell) - kl_divergence(state, moments))


def _copy(a: np.ndarray) -> np.ndarray:
    # keep the memory layout; BLAS takes a different path on C vs Fortran order
    return np.array(a, copy=True, order="K")


def clone_state(state: DualState) -> DualState:
    return DualState(
        _copy(state.lam),
        _copy(state.Lam),
        _copy(state.Z),
        state.kernel,
        state.likelihood,
        state.jitter,
        _copy(state.kzz_chol),
        state.jitter_used,
    )


def states_equal(a: DualState, b: DualState) -> bool:
    return (
        a.kernel == b.kernel
        and a.likelihood == b.likelihood
        and a.jitter == b.jitter
        and a.jitter_used == b.jitter_used
        and np.array_equal(a.Z, b.Z)
        and np.array_equal(a.lam, b.lam)
        and np.array_equal(a.Lam, b.Lam)
        and np.array_equal(a.kzz_chol, b.kzz_chol)
    )


def state_fingerprint(state: DualState) -> str:
    """Hash of everything that must stay fixed while conditioning: Z, kernel, likelihood, jitter."""
    digest = hashlib.sha256()
    digest.update(np.ascontiguousarray(state.Z, dtype="<f8").tobytes())
    header = {"kernel": state.kernel.to_dict(), "likelihood": state.likelihood.to_dict(), "jitter": state.jitter}
    digest.update(json.dumps(header, sort_keys=True).encode("utf-8"))
    return digest.hexdigest()


def _encode(a: np.ndarray) -> dict:
    raw = np.ascontiguousarray(a, dtype="<f8").tobytes()
    return {"shape": list(a.shape), "data": base64.b64encode(raw).decode("ascii")}


def _decode(payload: dict) -> np.ndarray:
    raw = base64.b64decode(payload["data"])
    return np.frombuffer(raw, dtype="<f8").reshape(payload["shape"]).astype(float)


def state_to_dict(state: DualState) -> dict:
    return {
        "version": STATE_VERSION,
        "kernel": state.kernel.to_dict(),
        "likelihood": state.likelihood.to_dict(),
        "jitter": state.jitter,
        "Z": _encode(state.Z),
        "lambda": _encode(state.lam),
        "Lambda": _encode(state.Lam),
    }


def state_from_dict(payload: dict) -> DualState:
    version = payload.get("version")
    if version != STATE_VERSION:
        raise ValueError(f"unsupported state version: {version}")
    return DualState(
        _decode(payload["lambda"]),
        _decode(payload["Lambda"]),
        _decode(payload["Z"]),
        Kernel.from_dict(payload["kernel"]),
        likelihood_from_dict(payload["likelihood"]),
        float(payload.get("jitter", DEFAULT_JITTER)),
    )


def state_to_json(state: DualState) -> str:
    return json.dumps(state_to_dict(state), indent=2)


def state_from_json(text: str) -> DualState:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"invalid state json: {exc}") from exc
    return state_from_dict(payload)
