from __future__ import annotations

import logging

import numpy as np
from scipy import linalg

from .errors import NumericalError

logger = logging.getLogger(__name__)

DEFAULT_JITTER = 1e-6
ESCALATION_LEVELS = (1e-4, 1e-2)


def jitter_ladder(jitter: float = DEFAULT_JITTER) -> tuple[float, ...]:
    return (jitter, *(level for level in ESCALATION_LEVELS if level > jitter))


def jitter_cholesky(K: np.ndarray, jitter: float = DEFAULT_JITTER) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of K + level * mean(diag K) * I.

    Tries each level of the jitter ladder in turn and returns the factor along
    with the level that succeeded.
    """
    K = np.asarray(K, dtype=float)
    scale = float(np.mean(np.diag(K))) if K.size else 1.0
    if not np.isfinite(scale) or scale <= 0.0:
        raise NumericalError("not positive definite: non-positive mean diagonal")
    eye = np.eye(K.shape[0])
    levels = jitter_ladder(jitter)
    for attempt, level in enumerate(levels):
        try:
            L = linalg.cholesky(K + level * scale * eye, lower=True)
        except linalg.LinAlgError:
            continue
        if attempt > 0:
            logger.warning("cholesky needed jitter escalation to %.0e (relative)", level)
        return L, level
    raise NumericalError(
        "cholesky failed after jitter escalation: " + ", ".join(f"{lv:.0e}" for lv in levels),
        jitter_levels=levels,
    )


def cholesky(B: np.ndarray) -> np.ndarray:
    try:
        return linalg.cholesky(B, lower=True)
    except linalg.LinAlgError as exc:
        raise NumericalError(f"matrix not positive definite: {exc}") from exc


def chol_solve(L: np.ndarray, B: np.ndarray) -> np.ndarray:
    return linalg.cho_solve((L, True), B)


def tri_solve(L: np.ndarray, B: np.ndarray, trans: str = "N") -> np.ndarray:
    return linalg.solve_triangular(L, B, lower=True, trans=trans)


def symmetrize(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + A.T)


def check_psd(A: np.ndarray, *, name: str, rtol: float = 1e-8) -> None:
    if A.size == 0:
        return
    smallest = float(np.linalg.eigvalsh(A)[0])
    scale = max(1.0, float(np.max(np.abs(A))))
    if smallest < -rtol * scale:
        raise NumericalError(f"{name} is not positive semi-definite (smallest eigenvalue {smallest:.3e})")
