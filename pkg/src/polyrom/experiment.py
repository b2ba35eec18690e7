"""Experiment orchestration: datasets, models, estimator sweeps, reports.

``run_experiment`` drives the full study: simulate (or reuse) the training
set, build (or reuse) the operator bank, then for every combination of
evaluation parameter, seed, and estimator, generate a noisy measurement
stream from a fresh reference trajectory and record error metrics. Outputs
are plain files under the configured directory::

    dataset/   manifest.json + trajectory binaries
    model/     model.json + basis/operator binaries
    runs/      <estimator>_p<p>_s<seed>.csv   per-step traces
    figures/   figure-analog CSVs (error vs time, parameter vs time, bars)
    summary.csv
    report.json

Reference-state variation across seeds uses the solver's translation
symmetry: starting the transient at a random time offset tau equals
translating the tau = 0 solution by omega * tau / k0, so each seed draws
tau, shifts the shared base trajectory, and then draws its own measurement
noise. Every random draw comes from a counter-based generator keyed on
(root_seed, parameter, seed index), which makes all outputs except the
timing fields of report.json byte-reproducible.
"""

from __future__ import annotations

import csv
import json
import logging
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .data import (SensorModel, Trajectory, load_dataset, make_rng,
                   measure_stream, save_dataset, write_column_major)
from .errors import InvalidInputError, PolyromError
from .estimators import (ESTIMATOR_NAMES, EstimatorRun, ObservationOperator,
                         make_estimator, run_stream)
from .kalman import NoiseConfig, UkfParams
from .metrics import MetricSeries, projection_floor, relative_error_series
from .rom import (ModelBank, PodBasis, build_model_bank, build_snapshot_matrices,
                  load_model, pod_basis, save_model)
from .solver import (BurgersConfig, generate_training_set, omega_of,
                     simulate_batch, translate_trajectory)

logger = logging.getLogger(__name__)

ingest_external_dataset = load_dataset

_FLOOR_SLACK = 1e-12


def _fmt(x) -> str:
    """Shortest round-trip decimal form, so CSV values parse back exactly."""
    return repr(float(x))


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one study end to end."""

    burgers: BurgersConfig = field(default_factory=BurgersConfig)
    p_train: tuple = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)
    p_test: tuple = (0.1, 0.3, 0.5, 0.7, 0.9)
    r: int = 10
    epsilon: float = 1e-2
    n_sensors: int = 4
    sensor_indices: tuple | None = None
    noise_std: float = 0.05
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    ukf: UkfParams = field(default_factory=UkfParams)
    estimators: tuple = ESTIMATOR_NAMES
    n_seeds: int = 5
    n_train_snapshots: int = 2001
    n_steps: int = 2001
    root_seed: int = 1729
    output_dir: str = "polyrom_out"
    jobs: int = 1
    dump_states: bool = False

    def __post_init__(self):
        self.p_train = tuple(float(p) for p in self.p_train)
        self.p_test = tuple(float(p) for p in self.p_test)
        if self.n_seeds < 1:
            raise InvalidInputError(f"n_seeds must be >= 1, got {self.n_seeds}")
        if self.n_steps < 1 or self.n_train_snapshots < 2:
            raise InvalidInputError("n_steps must be >= 1 and n_train_snapshots >= 2")
        lo, hi = min(self.p_train), max(self.p_train)
        for p in self.p_test:
            if not lo <= p <= hi:
                raise InvalidInputError(
                    f"evaluation parameter {p} outside training range [{lo}, {hi}]"
                )
        if len(set(self.p_test)) != len(self.p_test):
            raise InvalidInputError("p_test values must be distinct")
        unknown = [e for e in self.estimators if e not in ESTIMATOR_NAMES]
        if unknown:
            raise InvalidInputError(
                f"unknown estimators {unknown}; choose from {ESTIMATOR_NAMES}"
            )
        if self.jobs < 1:
            raise InvalidInputError(f"jobs must be >= 1, got {self.jobs}")

    def sensors(self) -> SensorModel:
        if self.sensor_indices is not None:
            return SensorModel(tuple(self.sensor_indices), self.noise_std,
                               seed=self.root_seed,
                               grid_size=self.burgers.grid_size)
        return SensorModel.equally_spaced(self.n_sensors, self.burgers.grid_size,
                                          self.noise_std, seed=self.root_seed)

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        b = self.burgers
        return {
            "burgers": {
                "domain_length": b.domain_length,
                "grid_size": b.grid_size,
                "nu1": b.nu1, "nu2": b.nu2,
                "omega1": b.omega1, "omega2": b.omega2,
                "dt_solver": b.dt_solver, "dt_snapshot": b.dt_snapshot,
                "transient_time": b.transient_time,
                "forcing_amplitude": b.forcing_amplitude,
            },
            "rom": {"r": self.r, "epsilon": self.epsilon},
            "sensors": {
                "count": self.n_sensors,
                "indices": None if self.sensor_indices is None
                           else list(self.sensor_indices),
                "noise_std": self.noise_std,
            },
            "noise": {"q_state": self.noise.q_state, "q_param": self.noise.q_param,
                      "r_meas": self.noise.r_meas},
            "ukf": {"alpha": self.ukf.alpha, "beta": self.ukf.beta,
                    "kappa": self.ukf.kappa},
            "experiment": {
                "p_train": list(self.p_train),
                "p_test": list(self.p_test),
                "estimators": list(self.estimators),
                "n_seeds": self.n_seeds,
                "n_train_snapshots": self.n_train_snapshots,
                "n_steps": self.n_steps,
                "root_seed": self.root_seed,
                "output_dir": str(self.output_dir),
                "jobs": self.jobs,
                "dump_states": self.dump_states,
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        base = cls()
        burgers = dict(base.to_dict()["burgers"])
        burgers.update(d.get("burgers", {}))
        rom = d.get("rom", {})
        sensors = d.get("sensors", {})
        noise = d.get("noise", {})
        ukf = d.get("ukf", {})
        exp = d.get("experiment", {})
        indices = sensors.get("indices")
        return cls(
            burgers=BurgersConfig(**burgers),
            p_train=tuple(exp.get("p_train", base.p_train)),
            p_test=tuple(exp.get("p_test", base.p_test)),
            r=int(rom.get("r", base.r)),
            epsilon=float(rom.get("epsilon", base.epsilon)),
            n_sensors=int(sensors.get("count", base.n_sensors)),
            sensor_indices=None if indices is None else tuple(indices),
            noise_std=float(sensors.get("noise_std", base.noise_std)),
            noise=NoiseConfig(
                q_state=float(noise.get("q_state", base.noise.q_state)),
                q_param=float(noise.get("q_param", base.noise.q_param)),
                r_meas=float(noise.get("r_meas", base.noise.r_meas)),
            ),
            ukf=UkfParams(
                alpha=float(ukf.get("alpha", base.ukf.alpha)),
                beta=float(ukf.get("beta", base.ukf.beta)),
                kappa=float(ukf.get("kappa", base.ukf.kappa)),
            ),
            estimators=tuple(exp.get("estimators", base.estimators)),
            n_seeds=int(exp.get("n_seeds", base.n_seeds)),
            n_train_snapshots=int(exp.get("n_train_snapshots", base.n_train_snapshots)),
            n_steps=int(exp.get("n_steps", base.n_steps)),
            root_seed=int(exp.get("root_seed", base.root_seed)),
            output_dir=str(exp.get("output_dir", base.output_dir)),
            jobs=int(exp.get("jobs", base.jobs)),
            dump_states=bool(exp.get("dump_states", base.dump_states)),
        )


def default_config(**overrides) -> ExperimentConfig:
    """The reference study configuration; keyword overrides replace fields."""
    return replace(ExperimentConfig(), **overrides)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise InvalidInputError(f"config file not found: {path}")
    try:
        return ExperimentConfig.from_dict(json.loads(path.read_text()))
    except (json.JSONDecodeError, TypeError) as exc:
        raise InvalidInputError(f"{path}: cannot parse config ({exc})") from exc


def save_config(cfg: ExperimentConfig, path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2))


def apply_overrides(cfg: ExperimentConfig, overrides: list) -> ExperimentConfig:
    """Apply ``section.key=value`` strings on top of a config."""
    tree = cfg.to_dict()
    for item in overrides:
        if "=" not in item:
            raise InvalidInputError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        parts = key.strip().split(".")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = tree
        for part in parts[:-1]:
            if part not in node or not isinstance(node[part], dict):
                raise InvalidInputError(f"unknown config section {key!r}")
            node = node[part]
        if parts[-1] not in node:
            raise InvalidInputError(f"unknown config key {key!r}")
        node[parts[-1]] = value
    return ExperimentConfig.from_dict(tree)


# ---------------------------------------------------------------------------
# Pipeline stages

def _seed_key(cfg: ExperimentConfig, p: float, seed: int) -> list:
    return [int(cfg.root_seed), int(round(p * 1e9)), int(seed)]


def ensure_dataset(cfg: ExperimentConfig, out_dir: Path) -> list:
    """Load a matching persisted training set, else simulate and persist."""
    dataset_dir = out_dir / "dataset"
    manifest = dataset_dir / "manifest.json"
    if manifest.is_file():
        trajectories = load_dataset(dataset_dir)
        params = tuple(t.p for t in trajectories)
        if (params == cfg.p_train
                and trajectories[0].snapshots.shape[0] == cfg.n_train_snapshots
                and trajectories[0].n == cfg.burgers.grid_size):
            logger.info("reusing dataset in %s", dataset_dir)
            return trajectories
        logger.info("existing dataset does not match config; regenerating")
    trajectories = generate_training_set(cfg.p_train, cfg.n_train_snapshots,
                                         cfg.burgers)
    save_dataset(trajectories, dataset_dir,
                 solver_meta=trajectories[0].meta,
                 rng_seeds=[cfg.root_seed])
    return trajectories


def ensure_model(cfg: ExperimentConfig, trajectories: list, out_dir: Path) -> tuple:
    """Load a matching persisted model, else build and persist one."""
    model_dir = out_dir / "model"
    if (model_dir / "model.json").is_file():
        try:
            bank, basis = load_model(model_dir)
            if (bank.r == cfg.r and tuple(bank.p_train) == cfg.p_train
                    and abs(bank.epsilon - cfg.epsilon) < 1e-15):
                logger.info("reusing model in %s", model_dir)
                return bank, basis
        except (InvalidInputError, KeyError):
            pass
        logger.info("existing model does not match config; rebuilding")
    X, _ = build_snapshot_matrices(trajectories)
    basis = pod_basis(X, cfg.r)
    bank = build_model_bank(trajectories, basis, epsilon=cfg.epsilon)
    save_model(model_dir, bank, basis)
    return bank, basis


def simulate_references(cfg: ExperimentConfig, p_values) -> dict:
    """One base reference trajectory per parameter, batched in one sweep."""
    p_values = list(dict.fromkeys(float(p) for p in p_values))
    trajectories = simulate_batch(np.array(p_values), cfg.n_steps + 1, cfg.burgers)
    return dict(zip(p_values, trajectories))


def reference_for_seed(cfg: ExperimentConfig, base: Trajectory, p: float,
                       seed: int) -> tuple:
    """Seeded reference trajectory and its measurement stream.

    Draws the transient phase offset first, then the measurement noise, so
    both are fixed by the (root_seed, p, seed) key.
    """
    rng = make_rng(*_seed_key(cfg, p, seed))
    omega = float(omega_of(p, cfg.burgers))
    tau = rng.uniform(0.0, 2 * np.pi / omega)
    delta = omega * tau / cfg.burgers.k0
    truth = translate_trajectory(base, delta, cfg.burgers)
    measurements = measure_stream(truth.snapshots[1:], cfg.sensors(), rng)
    return truth, measurements


@dataclass
class RunResult:
    estimator: str
    p: float
    seed: int
    status: str
    error: MetricSeries | None = None
    floor: MetricSeries | None = None
    p_hat: np.ndarray | None = None
    p_cov: np.ndarray | None = None
    seconds: float = 0.0
    message: str = ""
    csv_path: str = ""

    @property
    def run_id(self) -> str:
        return f"{self.estimator}_p{self.p:g}_s{self.seed}"


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    runs: list
    summary_rows: list
    output_dir: Path
    min_floor_slack: float
    failures: list
    seconds: float

    def row(self, estimator: str, p: float) -> dict | None:
        for row in self.summary_rows:
            if row["estimator"] == estimator and abs(row["p"] - p) < 1e-12:
                return row
        return None


def _write_run_csv(path: Path, dt: float, run: EstimatorRun,
                   rel_err: np.ndarray, floor: np.ndarray) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "t", "p_hat", "p_hat_cov", "state_rel_err",
                         "proj_floor"])
        for k in range(rel_err.shape[0]):
            writer.writerow([
                k + 1, _fmt((k + 1) * dt), _fmt(run.p_hat[k]),
                _fmt(run.p_cov[k]), _fmt(rel_err[k]), _fmt(floor[k]),
            ])


def _execute_run(cfg: ExperimentConfig, bank: ModelBank, basis: PodBasis,
                 obs: ObservationOperator, estimator_name: str, p: float,
                 seed: int, truth: Trajectory, measurements: np.ndarray,
                 floor: np.ndarray, runs_dir: Path) -> RunResult:
    started = time.perf_counter()
    result = RunResult(estimator_name, p, seed, status="ok")
    try:
        estimator = make_estimator(estimator_name, bank, basis, obs,
                                   cfg.noise, cfg.ukf)
        run = run_stream(estimator, measurements)
        if not np.isfinite(run.x_hat).all():
            raise PolyromError("estimator produced non-finite state estimates")
        rel_err = relative_error_series(run.z_hat, truth.snapshots[1:])
        result.error = MetricSeries.from_values(rel_err)
        result.floor = MetricSeries.from_values(floor)
        result.p_hat = run.p_hat
        result.p_cov = run.p_cov
        csv_path = runs_dir / f"{result.run_id}.csv"
        _write_run_csv(csv_path, truth.dt, run, rel_err, floor)
        result.csv_path = str(csv_path)
        if cfg.dump_states:
            write_column_major(runs_dir / f"{result.run_id}_zhat.bin", run.z_hat)
    except Exception as exc:  # run failures must not sink the sweep
        result.status = "failed"
        result.message = f"{type(exc).__name__}: {exc}"
        logger.error("run %s failed: %s", result.run_id, result.message)
    result.seconds = time.perf_counter() - started
    return result


def _summarize(cfg: ExperimentConfig, runs: list) -> list:
    rows = []
    for estimator in cfg.estimators:
        for p in cfg.p_test:
            cell = [r for r in runs
                    if r.estimator == estimator and abs(r.p - p) < 1e-12
                    and r.status == "ok"]
            if not cell:
                continue
            err = np.array([r.error.time_average for r in cell])
            half = np.array([r.error.last_half_average for r in cell])
            floor = np.array([r.floor.time_average for r in cell])
            p_final = np.array([r.p_hat[-1] for r in cell])
            rows.append({
                "estimator": estimator,
                "p": p,
                "in_train": any(abs(p - pt) < 1e-12 for pt in cfg.p_train),
                "n_seeds": len(cell),
                "err_time_avg_mean": float(err.mean()),
                "err_time_avg_std": float(err.std()),
                "err_last_half_mean": float(half.mean()),
                "err_last_half_std": float(half.std()),
                "floor_time_avg_mean": float(floor.mean()),
                "p_hat_final_mean": float(p_final.mean()),
                "p_hat_final_std": float(p_final.std()),
                "p_abs_err_final_mean": float(np.abs(p_final - p).mean()),
            })
    return rows


_SUMMARY_COLUMNS = [
    "estimator", "p", "in_train", "n_seeds",
    "err_time_avg_mean", "err_time_avg_std",
    "err_last_half_mean", "err_last_half_std",
    "floor_time_avg_mean",
    "p_hat_final_mean", "p_hat_final_std", "p_abs_err_final_mean",
]


def _write_summary(path: Path, rows: list) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_SUMMARY_COLUMNS)
        for row in rows:
            writer.writerow([
                row["estimator"], _fmt(row["p"]), int(row["in_train"]),
                row["n_seeds"],
                _fmt(row["err_time_avg_mean"]), _fmt(row["err_time_avg_std"]),
                _fmt(row["err_last_half_mean"]), _fmt(row["err_last_half_std"]),
                _fmt(row["floor_time_avg_mean"]),
                _fmt(row["p_hat_final_mean"]), _fmt(row["p_hat_final_std"]),
                _fmt(row["p_abs_err_final_mean"]),
            ])


def _write_figures(cfg: ExperimentConfig, runs: list, fig_dir: Path,
                   dt: float) -> None:
    fig_dir.mkdir(parents=True, exist_ok=True)
    ok = [r for r in runs if r.status == "ok"]
    for p in cfg.p_test:
        per_est = {}
        floor_stack = []
        for estimator in cfg.estimators:
            cell = [r for r in ok if r.estimator == estimator
                    and abs(r.p - p) < 1e-12]
            if not cell:
                continue
            errs = np.stack([r.error.values for r in cell])
            per_est[estimator] = (errs.mean(axis=0), errs.std(axis=0))
            floor_stack = [r.floor.values for r in cell]
        if not per_est:
            continue
        floor_mean = np.stack(floor_stack).mean(axis=0)
        n_steps = floor_mean.shape[0]
        with (fig_dir / f"err_vs_time_p{p:g}.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            header = ["k", "t"]
            for estimator in per_est:
                header += [f"{estimator}_mean", f"{estimator}_std"]
            header.append("proj_floor_mean")
            writer.writerow(header)
            for k in range(n_steps):
                row = [k + 1, _fmt((k + 1) * dt)]
                for estimator, (mean, std) in per_est.items():
                    row += [_fmt(mean[k]), _fmt(std[k])]
                row.append(_fmt(floor_mean[k]))
                writer.writerow(row)
        adaptive = [e for e in cfg.estimators if e != "rROM-KF"]
        traces = {}
        for estimator in adaptive:
            cell = [r for r in ok if r.estimator == estimator
                    and abs(r.p - p) < 1e-12]
            if cell:
                stack = np.stack([r.p_hat for r in cell])
                traces[estimator] = (stack.mean(axis=0), stack.std(axis=0))
        if traces:
            with (fig_dir / f"p_hat_vs_time_p{p:g}.csv").open("w", newline="") as fh:
                writer = csv.writer(fh)
                header = ["k", "t", "p_true"]
                for estimator in traces:
                    header += [f"{estimator}_mean", f"{estimator}_std"]
                writer.writerow(header)
                for k in range(n_steps):
                    row = [k + 1, _fmt((k + 1) * dt), _fmt(p)]
                    for estimator, (mean, std) in traces.items():
                        row += [_fmt(mean[k]), _fmt(std[k])]
                    writer.writerow(row)


def _write_train_test_figure(rows: list, fig_dir: Path) -> None:
    groups = {}
    for row in rows:
        key = (row["estimator"], "train" if row["in_train"] else "test")
        groups.setdefault(key, []).append(row["err_time_avg_mean"])
    if not groups:
        return
    with (fig_dir / "train_vs_test.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["estimator", "group", "err_time_avg_mean",
                         "err_time_avg_std", "n_values"])
        for (estimator, group), values in sorted(groups.items()):
            arr = np.asarray(values)
            writer.writerow([estimator, group, _fmt(arr.mean()),
                             _fmt(arr.std()), arr.size])


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Execute the full sweep described by the configuration."""
    started = time.perf_counter()
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    runs_dir = out_dir / "runs"
    runs_dir.mkdir(exist_ok=True)

    trajectories = ensure_dataset(cfg, out_dir)
    bank, basis = ensure_model(cfg, trajectories, out_dir)
    obs = ObservationOperator.from_sensors(basis, cfg.sensors().sensor_indices)

    bases = simulate_references(cfg, cfg.p_test)
    tasks = []
    for p in cfg.p_test:
        for seed in range(cfg.n_seeds):
            truth, measurements = reference_for_seed(cfg, bases[p], p, seed)
            floor = projection_floor(truth.snapshots[1:], basis)
            for estimator in cfg.estimators:
                tasks.append((estimator, p, seed, truth, measurements, floor))

    def execute(task):
        estimator, p, seed, truth, measurements, floor = task
        return _execute_run(cfg, bank, basis, obs, estimator, p, seed,
                            truth, measurements, floor, runs_dir)

    if cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            runs = list(pool.map(execute, tasks))
    else:
        runs = [execute(task) for task in tasks]

    # The projection floor bounds every lifted estimate from below; track
    # the worst slack so acceptance can assert it globally.
    slacks = [float((r.error.values - r.floor.values).min())
              for r in runs if r.status == "ok"]
    min_floor_slack = min(slacks) if slacks else float("nan")
    if slacks and min_floor_slack < -_FLOOR_SLACK:
        logger.warning("projection floor violated by %.3e", -min_floor_slack)

    rows = _summarize(cfg, runs)
    _write_summary(out_dir / "summary.csv", rows)
    fig_dir = out_dir / "figures"
    _write_figures(cfg, runs, fig_dir, cfg.burgers.dt_snapshot)
    _write_train_test_figure(rows, fig_dir)

    failures = [{"run": r.run_id, "message": r.message}
                for r in runs if r.status != "ok"]
    elapsed = time.perf_counter() - started
    report = ExperimentReport(
        config=cfg, runs=runs, summary_rows=rows, output_dir=out_dir,
        min_floor_slack=min_floor_slack, failures=failures, seconds=elapsed,
    )
    _write_report_json(report)
    return report


def _write_report_json(report: ExperimentReport) -> None:
    cfg = report.config
    payload = {
        "polyrom_version": __version__,
        "numpy_version": np.__version__,
        "python_version": platform.python_version(),
        "root_seed": cfg.root_seed,
        "config": cfg.to_dict(),
        "n_runs": len(report.runs),
        "failures": report.failures,
        "min_floor_slack": report.min_floor_slack,
        "seconds": report.seconds,
        "runs": [
            {
                "run": r.run_id, "status": r.status, "seconds": r.seconds,
                "err_time_avg": None if r.error is None else r.error.time_average,
                "p_hat_final": None if r.p_hat is None else float(r.p_hat[-1]),
                "seed_key": _seed_key(cfg, r.p, r.seed),
            }
            for r in report.runs
        ],
    }
    (report.output_dir / "report.json").write_text(json.dumps(payload, indent=2))


# ---------------------------------------------------------------------------
# Aggregation from persisted run CSVs (used by the evaluate stage)

def read_run_csv(path) -> dict:
    """Parse one per-run CSV back into arrays."""
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        cols = {name: [] for name in reader.fieldnames}
        for record in reader:
            for name, value in record.items():
                cols[name].append(value)
    return {
        "k": np.array([int(v) for v in cols["k"]]),
        "t": np.array([float(v) for v in cols["t"]]),
        "p_hat": np.array([float(v) for v in cols["p_hat"]]),
        "p_hat_cov": np.array([float(v) for v in cols["p_hat_cov"]]),
        "state_rel_err": np.array([float(v) for v in cols["state_rel_err"]]),
        "proj_floor": np.array([float(v) for v in cols["proj_floor"]]),
    }


def aggregate_runs(cfg: ExperimentConfig, out_dir: Path) -> tuple:
    """Rebuild summary rows from run CSVs on disk.

    Returns (rows, missing) where missing lists (estimator, p, seed) tuples
    without a run file.
    """
    runs_dir = Path(out_dir) / "runs"
    runs, missing = [], []
    for estimator in cfg.estimators:
        for p in cfg.p_test:
            for seed in range(cfg.n_seeds):
                path = runs_dir / f"{estimator}_p{p:g}_s{seed}.csv"
                if not path.is_file():
                    missing.append((estimator, p, seed))
                    continue
                data = read_run_csv(path)
                result = RunResult(
                    estimator, p, seed, status="ok",
                    error=MetricSeries.from_values(data["state_rel_err"]),
                    floor=MetricSeries.from_values(data["proj_floor"]),
                    p_hat=data["p_hat"], p_cov=data["p_hat_cov"],
                )
                runs.append(result)
    rows = _summarize(cfg, runs)
    _write_summary(Path(out_dir) / "summary.csv", rows)
    fig_dir = Path(out_dir) / "figures"
    _write_figures(cfg, runs, fig_dir, cfg.burgers.dt_snapshot)
    _write_train_test_figure(rows, fig_dir)
    return rows, missing
