"""Linear and unscented Kalman filter steps on Gaussian beliefs.

Both steps share the same covariance hygiene: after every update the
covariance is re-symmetrized and its eigenvalues floored at zero, so a
belief emitted by any step satisfies the ``GaussianBelief`` invariants.
The linear step uses the Joseph-form covariance update; the unscented step
uses the scaled sigma-point transform with additive process and
measurement noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IllConditionedError, InvalidInputError

_SYM_TOL = 1e-10
_EIG_FLOOR = -1e-10
_COND_LIMIT = 1e12


def repair_covariance(cov: np.ndarray) -> np.ndarray:
    """Symmetrize and clip tiny negative eigenvalues to zero."""
    cov = 0.5 * (cov + cov.T)
    eigvals, eigvecs = np.linalg.eigh(cov)
    if eigvals[0] >= 0:
        return cov
    eigvals = np.clip(eigvals, 0.0, None)
    return (eigvecs * eigvals) @ eigvecs.T


@dataclass
class GaussianBelief:
    """Mean and covariance of a filter estimate."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        self.mean = np.atleast_1d(np.asarray(self.mean, dtype=np.float64))
        self.cov = np.atleast_2d(np.asarray(self.cov, dtype=np.float64))
        L = self.mean.shape[0]
        if self.cov.shape != (L, L):
            raise InvalidInputError(
                f"covariance shape {self.cov.shape} does not match mean length {L}"
            )
        if np.abs(self.cov - self.cov.T).max() > _SYM_TOL:
            raise InvalidInputError("covariance is not symmetric")
        if np.linalg.eigvalsh(self.cov)[0] < _EIG_FLOOR:
            raise InvalidInputError("covariance has a significantly negative eigenvalue")

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class NoiseConfig:
    """Process and measurement noise variances used by the filters.

    The reduced-state and parameter process variances are per coordinate;
    the measurement variance is per sensor.
    """

    q_state: float = 1e-4
    q_param: float = 1e-5
    r_meas: float = 0.0025

    def __post_init__(self):
        if self.q_state < 0 or self.q_param < 0:
            raise InvalidInputError("process noise variances must be >= 0")
        if self.r_meas <= 0:
            raise InvalidInputError(f"r_meas must be positive, got {self.r_meas}")


@dataclass(frozen=True)
class UkfParams:
    """Scaled sigma-point parameters (alpha, beta, kappa)."""

    alpha: float = 1.0
    beta: float = 2.0
    kappa: float = 0.0

    def __post_init__(self):
        if self.alpha <= 0:
            raise InvalidInputError(f"alpha must be positive, got {self.alpha}")

    def lam(self, L: int) -> float:
        lam = self.alpha ** 2 * (L + self.kappa) - L
        if L + lam <= 0:
            raise InvalidInputError(
                f"sigma-point scaling gives non-positive L + lambda for L={L}"
            )
        return lam


def _observation_matrix(H) -> np.ndarray:
    """Accept a raw matrix or anything exposing a ``matrix`` attribute."""
    return np.atleast_2d(np.asarray(getattr(H, "matrix", H), dtype=np.float64))


def kf_step(belief: GaussianBelief, A: np.ndarray, H, y: np.ndarray,
            noise: NoiseConfig) -> GaussianBelief:
    """One linear predict/update cycle.

    Predict with mean <- A mean, cov <- A cov A^T + q_state I, then update
    against y with gain K = P H^T (H P H^T + r_meas I)^{-1}; the posterior
    covariance uses the Joseph form.
    """
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    Hm = _observation_matrix(H)
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    L = belief.dim
    if A.shape != (L, L) or Hm.shape[1] != L or y.shape[0] != Hm.shape[0]:
        raise InvalidInputError(
            f"dimension mismatch: A {A.shape}, H {Hm.shape}, y {y.shape}, state {L}"
        )
    mean = A @ belief.mean
    cov = A @ belief.cov @ A.T + noise.q_state * np.eye(L)

    S = Hm @ cov @ Hm.T + noise.r_meas * np.eye(Hm.shape[0])
    cond = np.linalg.cond(S)
    if not np.isfinite(cond) or cond > _COND_LIMIT:
        raise IllConditionedError(
            f"innovation covariance numerically singular (cond = {cond:.3e})"
        )
    K = np.linalg.solve(S.T, (cov @ Hm.T).T).T
    mean = mean + K @ (y - Hm @ mean)
    IKH = np.eye(L) - K @ Hm
    cov = IKH @ cov @ IKH.T + noise.r_meas * (K @ K.T)
    return GaussianBelief(mean, repair_covariance(cov))


def sigma_points(mean: np.ndarray, cov: np.ndarray, params: UkfParams,
                 diagnostics: dict | None = None) -> tuple:
    """Scaled sigma points and their mean/covariance weights.

    Returns (points, w_mean, w_cov) with points of shape (2L + 1, L). The
    Cholesky factorization is retried with escalating diagonal jitter after
    PSD flooring; the retry count is reported through ``diagnostics`` and
    exhaustion raises :class:`IllConditionedError`.
    """
    L = mean.shape[0]
    lam = params.lam(L)
    scaled = (L + lam) * repair_covariance(cov)
    jitter = 0.0
    scale = max(np.trace(scaled) / L, 1.0)
    for attempt in range(7):
        try:
            chol = np.linalg.cholesky(scaled + jitter * np.eye(L))
            break
        except np.linalg.LinAlgError:
            if diagnostics is not None:
                diagnostics["cholesky_retries"] = diagnostics.get("cholesky_retries", 0) + 1
            jitter = scale * 10.0 ** (-12 + 2 * attempt)
    else:
        raise IllConditionedError("Cholesky failed after PSD flooring and jitter")
    points = np.vstack([mean, mean + chol.T, mean - chol.T])
    w_mean = np.full(2 * L + 1, 1.0 / (2 * (L + lam)))
    w_cov = w_mean.copy()
    w_mean[0] = lam / (L + lam)
    w_cov[0] = w_mean[0] + (1 - params.alpha ** 2 + params.beta)
    return points, w_mean, w_cov


def _apply_map(fn, points: np.ndarray) -> np.ndarray:
    """Evaluate a map on rows, preferring a single vectorized call."""
    try:
        out = np.asarray(fn(points), dtype=np.float64)
        if out.ndim == 2 and out.shape[0] == points.shape[0]:
            return out
    except Exception:
        pass
    return np.stack([np.atleast_1d(np.asarray(fn(pt), dtype=np.float64))
                     for pt in points])


def ukf_step(belief: GaussianBelief, f, h, y: np.ndarray, noise: NoiseConfig,
             params: UkfParams, q_diag: np.ndarray | None = None,
             r_extra: np.ndarray | None = None,
             diagnostics: dict | None = None) -> GaussianBelief:
    """One unscented predict/update cycle with additive noise.

    ``f`` and ``h`` receive sigma points as rows of a 2-D array (a loop
    over individual vectors is used as fallback). Process noise is
    ``q_diag`` on the diagonal when given, otherwise q_state on every
    coordinate; measurement noise is r_meas per sensor plus the optional
    ``r_extra`` matrix (extra observation uncertainty, e.g. from estimated
    quantities inside the observation map).
    """
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    L = belief.dim
    if q_diag is None:
        Q = noise.q_state * np.eye(L)
    else:
        q_diag = np.asarray(q_diag, dtype=np.float64)
        if q_diag.shape != (L,):
            raise InvalidInputError(f"q_diag must have shape ({L},), got {q_diag.shape}")
        Q = np.diag(q_diag)

    points, w_mean, w_cov = sigma_points(belief.mean, belief.cov, params, diagnostics)
    prop = _apply_map(f, points)
    mean_pred = w_mean @ prop
    dev = prop - mean_pred
    cov_pred = (dev.T * w_cov) @ dev + Q
    cov_pred = repair_covariance(cov_pred)

    # Redraw sigma points from the predicted belief before the measurement
    # transform so the additive process noise is reflected in the spread.
    points, w_mean, w_cov = sigma_points(mean_pred, cov_pred, params, diagnostics)
    obs = _apply_map(h, points)
    y_pred = w_mean @ obs
    dy = obs - y_pred
    if y.shape[0] != y_pred.shape[0]:
        raise InvalidInputError(
            f"measurement length {y.shape[0]} does not match h output {y_pred.shape[0]}"
        )
    S = (dy.T * w_cov) @ dy + noise.r_meas * np.eye(y.shape[0])
    if r_extra is not None:
        r_extra = np.asarray(r_extra, dtype=np.float64)
        if r_extra.shape != S.shape:
            raise InvalidInputError(
                f"r_extra must have shape {S.shape}, got {r_extra.shape}"
            )
        S = S + r_extra
    cond = np.linalg.cond(S)
    if not np.isfinite(cond) or cond > _COND_LIMIT:
        raise IllConditionedError(
            f"innovation covariance numerically singular (cond = {cond:.3e})"
        )
    dx = points - mean_pred
    cross = (dx.T * w_cov) @ dy
    K = np.linalg.solve(S.T, cross.T).T
    mean = mean_pred + K @ (y - y_pred)
    cov = cov_pred - K @ S @ K.T
    return GaussianBelief(mean, repair_covariance(cov))
