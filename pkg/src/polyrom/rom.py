"""POD compression and DMD operator banks for parametric snapshot data.

Construction pipeline: concatenate training trajectories into time-shifted
snapshot matrices, compute a truncated SVD basis, then fit one-step linear
operators in the reduced coordinates. Two operator flavors coexist:

* a single robust operator fit jointly across all training parameters,
* a bank of local operators (one per training parameter) blended into a
  parameter-dependent matrix by softmax weights over parameter distance.

All reduced fits use the economical identities (U^T Y) V Sigma^{-1} and
(U^T Y) pinv(U^T X), which never form an n x n operator.

Model directory layout: ``model.json`` next to raw float64 column-major
binaries (same convention as trajectory files) for U, the singular values,
V, the robust operator, and the stacked local operators.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import Trajectory, read_column_major, write_column_major
from .errors import InvalidInputError

logger = logging.getLogger(__name__)

MODEL_FILE = "model.json"
_ORTHO_TOL = 1e-10


@dataclass
class PodBasis:
    """Truncated SVD factors X ~ U diag(sigma) V^T with rank r.

    U (n, r) and V (N, r) have orthonormal columns; sigma is positive and
    non-increasing. ``spectrum`` optionally keeps the full singular-value
    sequence for energy audits.
    """

    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray
    r: int
    spectrum: np.ndarray | None = None

    def __post_init__(self):
        self.U = np.asarray(self.U, dtype=np.float64)
        self.sigma = np.asarray(self.sigma, dtype=np.float64)
        self.V = np.asarray(self.V, dtype=np.float64)
        if self.U.ndim != 2 or self.V.ndim != 2 or self.U.shape[1] != self.r \
                or self.V.shape[1] != self.r or self.sigma.shape != (self.r,):
            raise InvalidInputError("inconsistent POD factor shapes")
        if np.any(self.sigma <= 0) or np.any(np.diff(self.sigma) > 0):
            raise InvalidInputError(
                "singular values must be positive and non-increasing"
            )
        for name, M in (("U", self.U), ("V", self.V)):
            defect = np.abs(M.T @ M - np.eye(self.r)).max()
            if defect > _ORTHO_TOL:
                raise InvalidInputError(
                    f"{name} columns not orthonormal (defect {defect:.2e})"
                )

    @property
    def n(self) -> int:
        return self.U.shape[0]

    def retained_energy(self) -> float | None:
        """Fraction of squared singular values captured by the first r."""
        if self.spectrum is None:
            return None
        total = float(np.sum(self.spectrum ** 2))
        return float(np.sum(self.sigma ** 2) / total) if total > 0 else None


@dataclass
class ModelBank:
    """Local reduced operators on a training grid plus the robust operator."""

    p_train: np.ndarray
    A_local: np.ndarray
    A_robust: np.ndarray
    epsilon: float = 1e-2
    p_min: float | None = None
    p_max: float | None = None
    local_ranks: list = field(default_factory=list)

    def __post_init__(self):
        self.p_train = np.asarray(self.p_train, dtype=np.float64)
        self.A_local = np.asarray(self.A_local, dtype=np.float64)
        self.A_robust = np.asarray(self.A_robust, dtype=np.float64)
        q = self.p_train.shape[0]
        if q < 1:
            raise InvalidInputError("need at least one training parameter")
        if np.any(np.diff(self.p_train) <= 0):
            raise InvalidInputError("p_train must be strictly increasing")
        r = self.A_robust.shape[0]
        if self.A_robust.shape != (r, r) or self.A_local.shape != (q, r, r):
            raise InvalidInputError(
                f"operator shapes inconsistent: robust {self.A_robust.shape}, "
                f"local {self.A_local.shape}"
            )
        if self.epsilon <= 0:
            raise InvalidInputError(f"epsilon must be positive, got {self.epsilon}")
        if self.p_min is None:
            self.p_min = float(self.p_train[0])
        if self.p_max is None:
            self.p_max = float(self.p_train[-1])
        if self.p_min > self.p_train[0] or self.p_max < self.p_train[-1]:
            raise InvalidInputError(
                f"[p_min, p_max] = [{self.p_min}, {self.p_max}] must cover the "
                f"training grid [{self.p_train[0]}, {self.p_train[-1]}]"
            )

    @property
    def q(self) -> int:
        return self.p_train.shape[0]

    @property
    def r(self) -> int:
        return self.A_robust.shape[0]

    @property
    def delta_p(self) -> float:
        span = self.p_max - self.p_min
        return span if span > 0 else 1.0


def build_snapshot_matrices(trajectories: list) -> tuple:
    """Concatenate per-trajectory shifted pairs into X and Y (n, q*m).

    Column j of Y is the one-step successor of column j of X within the
    same trajectory; no pairs cross trajectory boundaries.
    """
    if not trajectories:
        raise InvalidInputError("need at least one trajectory")
    n = trajectories[0].n
    m = trajectories[0].n_pairs
    for traj in trajectories:
        if traj.n != n or traj.n_pairs != m:
            raise InvalidInputError(
                f"trajectories disagree in shape: expected n={n}, m={m}, "
                f"got n={traj.n}, m={traj.n_pairs}"
            )
    X = np.concatenate([traj.snapshots[:-1] for traj in trajectories], axis=0).T
    Y = np.concatenate([traj.snapshots[1:] for traj in trajectories], axis=0).T
    return X, Y


def numerical_rank(sigma: np.ndarray, shape: tuple) -> int:
    """Rank estimate: singular values above max(dims) * eps * sigma_1."""
    if sigma.size == 0 or sigma[0] == 0:
        return 0
    tol = max(shape) * np.finfo(np.float64).eps * sigma[0]
    return int(np.sum(sigma > tol))


def pod_basis(X: np.ndarray, r: int) -> PodBasis:
    """Leading-r SVD factors of the snapshot matrix."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise InvalidInputError("X must be a 2-D matrix")
    U, sigma, Vt = np.linalg.svd(X, full_matrices=False)
    rank = numerical_rank(sigma, X.shape)
    if not 1 <= r <= rank:
        raise InvalidInputError(
            f"rank r={r} outside [1, numerical rank {rank}] for X of shape {X.shape}"
        )
    return PodBasis(U=U[:, :r], sigma=sigma[:r], V=Vt[:r].T, r=r, spectrum=sigma)


def project(z: np.ndarray, basis: PodBasis) -> np.ndarray:
    """Reduced coordinates x = U^T z (vectorized over leading axes)."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1] != basis.n:
        raise InvalidInputError(
            f"state dimension {z.shape[-1]} does not match basis n={basis.n}"
        )
    return z @ basis.U


def lift(x: np.ndarray, basis: PodBasis) -> np.ndarray:
    """Full-state reconstruction z = U x (vectorized over leading axes)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != basis.r:
        raise InvalidInputError(
            f"reduced dimension {x.shape[-1]} does not match basis r={basis.r}"
        )
    return x @ basis.U.T


def dmd_robust(X: np.ndarray, Y: np.ndarray, basis: PodBasis) -> np.ndarray:
    """Reduced one-step operator U^T Y V Sigma^{-1} fit across all data.

    Equals the projection of the full least-squares operator Y X^+ onto the
    retained subspace when the basis comes from this X.
    """
    Y = np.asarray(Y, dtype=np.float64)
    if Y.shape != (basis.n, basis.V.shape[0]):
        raise InvalidInputError(
            f"Y of shape {Y.shape} not conformable with basis "
            f"({basis.n} x {basis.V.shape[0]})"
        )
    return (basis.U.T @ Y) @ (basis.V / basis.sigma)


def _reduced_fit(traj: Trajectory, basis: PodBasis) -> tuple:
    """Least-squares reduced operator for one trajectory, with data rank."""
    Xr = project(traj.snapshots[:-1], basis).T
    Yr = project(traj.snapshots[1:], basis).T
    rcond = max(Xr.shape) * np.finfo(np.float64).eps
    A = Yr @ np.linalg.pinv(Xr, rcond=rcond)
    rank = numerical_rank(np.linalg.svd(Xr, compute_uv=False), Xr.shape)
    return A, rank


def dmd_local(traj: Trajectory, basis: PodBasis) -> np.ndarray:
    """Reduced one-step operator fit to a single trajectory.

    Solves min_A ||U^T Y_i - A U^T X_i||_F through the pseudoinverse of the
    reduced data, the economical equivalent of projecting Y_i X_i^+.
    Rank-deficient data falls back to the minimum-norm solution.
    """
    if traj.n != basis.n:
        raise InvalidInputError(
            f"trajectory dimension {traj.n} does not match basis n={basis.n}"
        )
    if traj.n_pairs < basis.r:
        logger.warning(
            "trajectory at p=%g has %d pairs < rank %d; local fit may be "
            "underdetermined", traj.p, traj.n_pairs, basis.r,
        )
    A, rank = _reduced_fit(traj, basis)
    if rank < basis.r:
        logger.warning(
            "reduced data for p=%g has rank %d < %d; minimum-norm fit used",
            traj.p, rank, basis.r,
        )
    return A


def build_model_bank(trajectories: list, basis: PodBasis,
                     epsilon: float = 1e-2,
                     p_min: float | None = None,
                     p_max: float | None = None) -> ModelBank:
    """Fit all local operators plus the robust operator from one basis."""
    X, Y = build_snapshot_matrices(trajectories)
    A_robust = dmd_robust(X, Y, basis)
    locals_, ranks = [], []
    for traj in trajectories:
        A, rank = _reduced_fit(traj, basis)
        locals_.append(A)
        ranks.append(rank)
    return ModelBank(
        p_train=[traj.p for traj in trajectories],
        A_local=np.stack(locals_),
        A_robust=A_robust,
        epsilon=epsilon,
        p_min=p_min,
        p_max=p_max,
        local_ranks=ranks,
    )


def weights_batch(p_values: np.ndarray, bank: ModelBank) -> np.ndarray:
    """Softmax blending weights for a batch of parameters; shape (B, q).

    Logits 1 / (epsilon + |p - p_i| / delta_p) grow as p approaches a grid
    point; the softmax is computed with max subtraction since logits reach
    1 / epsilon. Parameters are clamped to [p_min, p_max] first.
    """
    p = np.clip(np.asarray(p_values, dtype=np.float64), bank.p_min, bank.p_max)
    dist = np.abs(p[..., None] - bank.p_train) / bank.delta_p
    logits = 1.0 / (bank.epsilon + dist)
    logits -= logits.max(axis=-1, keepdims=True)
    w = np.exp(logits)
    w /= w.sum(axis=-1, keepdims=True)
    return w


def weights(p: float, bank: ModelBank) -> np.ndarray:
    """Blending weights at a single parameter value; shape (q,)."""
    return weights_batch(np.asarray(float(p)), bank)


def polytopic_matrix_batch(p_values: np.ndarray, bank: ModelBank) -> np.ndarray:
    """Blended operators for a batch of parameters; shape (B, r, r)."""
    w = weights_batch(p_values, bank)
    return np.tensordot(w, bank.A_local, axes=(-1, 0))


def polytopic_matrix(p: float, bank: ModelBank) -> np.ndarray:
    """Convex combination sum_i w_i(p) A_i of the local operators."""
    return polytopic_matrix_batch(np.asarray(float(p)), bank)


# ---------------------------------------------------------------------------
# Model persistence

def save_model(directory, bank: ModelBank, basis: PodBasis) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    # _write_matrix stores rows of its argument as columns, so pass
    # transposes to keep the on-disk matrices column-major as documented.
    write_column_major(directory / "U.bin", basis.U.T)
    write_column_major(directory / "sigma.bin", basis.sigma[None, :])
    write_column_major(directory / "V.bin", basis.V.T)
    write_column_major(directory / "A_robust.bin", bank.A_robust.T)
    blocks = np.concatenate([A.T for A in bank.A_local], axis=0)
    write_column_major(directory / "A_local.bin", blocks)
    meta = {
        "schema_version": 1,
        "n": basis.n,
        "N": basis.V.shape[0],
        "r": basis.r,
        "q": bank.q,
        "p_train": bank.p_train.tolist(),
        "epsilon": bank.epsilon,
        "p_min": bank.p_min,
        "p_max": bank.p_max,
        "local_ranks": list(bank.local_ranks),
        "energy_spectrum": None if basis.spectrum is None else basis.spectrum.tolist(),
        "retained_energy": basis.retained_energy(),
    }
    (directory / MODEL_FILE).write_text(json.dumps(meta, indent=2))
    return directory


def load_model(directory) -> tuple:
    """Load (bank, basis) from a model directory."""
    directory = Path(directory)
    path = directory / MODEL_FILE
    if not path.is_file():
        raise InvalidInputError(f"no {MODEL_FILE} found in {directory}")
    meta = json.loads(path.read_text())
    n, N, r, q = meta["n"], meta["N"], meta["r"], meta["q"]
    U = read_column_major(directory / "U.bin", n, r).T
    sigma = read_column_major(directory / "sigma.bin", r, 1)[0]
    V = read_column_major(directory / "V.bin", N, r).T
    A_robust = read_column_major(directory / "A_robust.bin", r, r).T
    blocks = read_column_major(directory / "A_local.bin", r, q * r)
    A_local = np.stack([blocks[i * r:(i + 1) * r].T for i in range(q)])
    spectrum = meta.get("energy_spectrum")
    basis = PodBasis(
        U=U, sigma=sigma, V=V, r=r,
        spectrum=None if spectrum is None else np.asarray(spectrum),
    )
    bank = ModelBank(
        p_train=meta["p_train"],
        A_local=A_local,
        A_robust=A_robust,
        epsilon=meta["epsilon"],
        p_min=meta["p_min"],
        p_max=meta["p_max"],
        local_ranks=meta.get("local_ranks", []),
    )
    return bank, basis
