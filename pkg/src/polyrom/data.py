"""Trajectory and sensor data types, measurement sampling, and dataset files.

Dataset directory layout
------------------------
A dataset is a directory holding ``manifest.json`` plus one raw binary file
per trajectory. The binary convention, shared by every file format in this
package, is little-endian float64, column-major, ``n`` rows by ``m + 1``
columns (one column per snapshot). Any producer that writes this layout can
be ingested, regardless of how the snapshots were generated.

``manifest.json`` fields::

    schema_version   currently 1
    n                state dimension (rows per snapshot)
    m                number of time-shifted pairs; files hold m + 1 columns
    q                number of trajectories
    dt               snapshot interval, identical across trajectories
    t0               list of first-snapshot times, one per trajectory
    parameters       list of parameter values, one per trajectory
    files            list of binary file names, one per trajectory
    solver           free-form metadata dict from the producing solver
    rng_seeds        seeds used by the producer, or null

Randomness contract
-------------------
All measurement noise is drawn from numpy's Philox (4x64-10) counter-based
bit generator, keyed through ``numpy.random.SeedSequence`` on a tuple of
integers. Identical key tuples reproduce identical streams on any platform.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidInputError

SCHEMA_VERSION = 1
MANIFEST_NAME = "manifest.json"


def make_rng(*key: int) -> np.random.Generator:
    """Counter-based generator (Philox) keyed on a tuple of integers."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(list(key))))


@dataclass
class Trajectory:
    """Time-ordered snapshots of the full-order state for one parameter.

    ``snapshots`` has shape (count, n); row k is the state at time
    ``t0 + k * dt``. At least two snapshots are required so the trajectory
    can be split into time-shifted pairs.
    """

    p: float
    snapshots: np.ndarray
    dt: float
    t0: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.snapshots = np.asarray(self.snapshots, dtype=np.float64)
        if self.snapshots.ndim != 2:
            raise InvalidInputError(
                f"snapshots must be 2-D (count, n), got shape {self.snapshots.shape}"
            )
        if self.snapshots.shape[0] < 2:
            raise InvalidInputError(
                f"a trajectory needs at least 2 snapshots, got {self.snapshots.shape[0]}"
            )
        if self.dt <= 0:
            raise InvalidInputError(f"dt must be positive, got {self.dt}")

    @property
    def n(self) -> int:
        return self.snapshots.shape[1]

    @property
    def n_pairs(self) -> int:
        """Number of (z_k, z_{k+1}) pairs available for operator fitting."""
        return self.snapshots.shape[0] - 1

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.snapshots.shape[0])


@dataclass(frozen=True)
class SensorModel:
    """Point measurements at fixed collocation indices with additive noise."""

    sensor_indices: tuple
    noise_std: float
    seed: int = 0
    grid_size: int | None = None

    def __post_init__(self):
        idx = tuple(int(i) for i in self.sensor_indices)
        object.__setattr__(self, "sensor_indices", idx)
        if len(set(idx)) != len(idx):
            raise InvalidInputError(f"sensor indices must be distinct, got {idx}")
        if any(i < 0 for i in idx):
            raise InvalidInputError(f"sensor indices must be non-negative, got {idx}")
        if self.grid_size is not None and any(i >= self.grid_size for i in idx):
            raise InvalidInputError(
                f"sensor indices {idx} out of range for grid size {self.grid_size}"
            )
        if self.noise_std < 0:
            raise InvalidInputError(f"noise_std must be >= 0, got {self.noise_std}")

    @classmethod
    def equally_spaced(cls, count: int, grid_size: int, noise_std: float,
                       seed: int = 0) -> "SensorModel":
        """Place ``count`` sensors at indices floor(j * grid_size / count)."""
        if count < 1 or count > grid_size:
            raise InvalidInputError(
                f"sensor count must be in [1, {grid_size}], got {count}"
            )
        idx = tuple(j * grid_size // count for j in range(count))
        return cls(idx, noise_std, seed=seed, grid_size=grid_size)

    @property
    def m(self) -> int:
        return len(self.sensor_indices)


def measure(z: np.ndarray, sensors: SensorModel,
            rng: np.random.Generator) -> np.ndarray:
    """Sample the state at the sensor indices and add Gaussian noise.

    The generator is advanced in place even when ``noise_std`` is zero so
    measurement streams stay aligned across noise settings.
    """
    z = np.asarray(z, dtype=np.float64)
    idx = np.asarray(sensors.sensor_indices)
    if z.shape[-1] <= idx.max():
        raise InvalidInputError(
            f"state dimension {z.shape[-1]} too small for sensor indices "
            f"{sensors.sensor_indices}"
        )
    draws = rng.standard_normal(idx.shape[0])
    return z[..., idx] + sensors.noise_std * draws


def measure_stream(snapshots: np.ndarray, sensors: SensorModel,
                   rng: np.random.Generator) -> np.ndarray:
    """Measure a whole (count, n) snapshot block; returns (count, m)."""
    snapshots = np.asarray(snapshots, dtype=np.float64)
    idx = np.asarray(sensors.sensor_indices)
    draws = rng.standard_normal((snapshots.shape[0], idx.shape[0]))
    return snapshots[:, idx] + sensors.noise_std * draws


# ---------------------------------------------------------------------------
# Dataset persistence

def write_column_major(path: Path, columns: np.ndarray) -> None:
    """Write (count, n) rows as an n x count column-major float64 file.

    Each row of ``columns`` is one column of the stored matrix, so writing
    the C-ordered row block is exactly the column-major layout.
    """
    np.ascontiguousarray(columns, dtype="<f8").tofile(path)


def read_column_major(path: Path, n: int, n_cols: int) -> np.ndarray:
    raw = np.fromfile(path, dtype="<f8")
    if raw.size != n * n_cols:
        raise InvalidInputError(
            f"{path.name}: expected {n} x {n_cols} = {n * n_cols} values, "
            f"found {raw.size}"
        )
    if not np.isfinite(raw).all():
        offset = int(np.argmin(np.isfinite(raw)))
        raise InvalidInputError(
            f"{path.name}: non-finite value at flat offset {offset}"
        )
    return raw.reshape(n_cols, n)


def save_dataset(trajectories: list, directory, solver_meta: dict | None = None,
                 rng_seeds: list | None = None) -> Path:
    """Persist trajectories as manifest.json plus one binary per trajectory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    if not trajectories:
        raise InvalidInputError("cannot save an empty dataset")
    n = trajectories[0].n
    count = trajectories[0].snapshots.shape[0]
    dt = trajectories[0].dt
    for traj in trajectories:
        if traj.n != n or traj.snapshots.shape[0] != count:
            raise InvalidInputError(
                "all trajectories in a dataset must share snapshot dimensions"
            )
        if abs(traj.dt - dt) > 1e-12:
            raise InvalidInputError("all trajectories must share dt")
    files = []
    for i, traj in enumerate(trajectories):
        name = f"traj_{i:03d}.bin"
        write_column_major(directory / name, traj.snapshots)
        files.append(name)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "n": n,
        "m": count - 1,
        "q": len(trajectories),
        "dt": dt,
        "t0": [traj.t0 for traj in trajectories],
        "parameters": [traj.p for traj in trajectories],
        "files": files,
        "solver": solver_meta or trajectories[0].meta,
        "rng_seeds": rng_seeds,
    }
    (directory / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2))
    return directory


def load_dataset(directory) -> list:
    """Load and validate a trajectory dataset directory.

    Accepts any producer matching the manifest schema, including externally
    simulated snapshot data. Raises :class:`InvalidInputError` naming the
    offending file for schema violations, size mismatches, or non-finite
    values.
    """
    directory = Path(directory)
    manifest_path = directory / MANIFEST_NAME
    if not manifest_path.is_file():
        raise InvalidInputError(f"no {MANIFEST_NAME} found in {directory}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{manifest_path}: invalid JSON ({exc})") from exc
    required = ["schema_version", "n", "m", "q", "dt", "parameters", "files"]
    missing = [key for key in required if key not in manifest]
    if missing:
        raise InvalidInputError(f"{manifest_path}: missing fields {missing}")
    if manifest["schema_version"] != SCHEMA_VERSION:
        raise InvalidInputError(
            f"{manifest_path}: unsupported schema version "
            f"{manifest['schema_version']}"
        )
    n, m, q = int(manifest["n"]), int(manifest["m"]), int(manifest["q"])
    if len(manifest["files"]) != q or len(manifest["parameters"]) != q:
        raise InvalidInputError(
            f"{manifest_path}: files/parameters lists do not match q={q}"
        )
    t0s = manifest.get("t0") or [0.0] * q
    trajectories = []
    for i in range(q):
        path = directory / manifest["files"][i]
        if not path.is_file():
            raise InvalidInputError(f"missing trajectory file {path}")
        snapshots = read_column_major(path, n, m + 1)
        trajectories.append(Trajectory(
            p=float(manifest["parameters"][i]),
            snapshots=snapshots,
            dt=float(manifest["dt"]),
            t0=float(t0s[i]),
            meta=dict(manifest.get("solver") or {}),
        ))
    return trajectories
