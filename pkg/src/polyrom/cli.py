"""Command-line front end for the simulation/training/estimation pipeline.

Subcommands mirror the pipeline stages and share a JSON config file whose
schema matches :meth:`ExperimentConfig.to_dict`. ``--set key=value``
overrides win over file values; ``--defaults`` starts from the reference
configuration without a file. Exit codes: 0 success, 2 invalid input,
3 numerical failure.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from .data import load_dataset, save_dataset
from .errors import IllConditionedError, InvalidInputError, NumericalBlowupError
from .estimators import ObservationOperator, make_estimator, run_stream
from .experiment import (ExperimentConfig, aggregate_runs, apply_overrides,
                         default_config, ensure_dataset, ensure_model,
                         load_config, reference_for_seed, run_experiment,
                         save_config, simulate_references)
from .metrics import MetricSeries, projection_floor, relative_error_series
from .rom import build_snapshot_matrices, load_model
from .solver import generate_training_set

EXIT_INVALID = 2
EXIT_NUMERICAL = 3


def _load_cfg(config_path, use_defaults, overrides, out, seed, jobs) -> ExperimentConfig:
    if config_path is None and not use_defaults:
        raise InvalidInputError("provide --config PATH or --defaults")
    cfg = default_config() if config_path is None else load_config(config_path)
    items = list(overrides)
    if out is not None:
        items.append(f"experiment.output_dir={out}")
    if seed is not None:
        items.append(f"experiment.root_seed={seed}")
    if jobs is not None:
        items.append(f"experiment.jobs={jobs}")
    return apply_overrides(cfg, items)


def _stage_report(out_dir: Path, stage: str, payload: dict) -> None:
    """Merge a stage record into <out>/report.json (always written)."""
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "report.json"
    report = {}
    if path.is_file():
        try:
            report = json.loads(path.read_text())
        except json.JSONDecodeError:
            report = {}
    stages = report.setdefault("stages", {})
    stages[stage] = payload
    path.write_text(json.dumps(report, indent=2))


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _guarded(fn):
    try:
        fn()
    except InvalidInputError as exc:
        _fail(EXIT_INVALID, str(exc))
    except (NumericalBlowupError, IllConditionedError) as exc:
        _fail(EXIT_NUMERICAL, str(exc))


_shared_options = [
    click.option("--config", "config_path", type=click.Path(), default=None,
                 help="JSON config file."),
    click.option("--defaults", "use_defaults", is_flag=True,
                 help="Start from the built-in reference configuration."),
    click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE",
                 help="Override a config entry (repeatable), e.g. rom.r=12."),
    click.option("--seed", type=int, default=None, help="Root RNG seed."),
    click.option("--out", type=click.Path(), default=None,
                 help="Output directory (overrides config)."),
    click.option("--jobs", type=int, default=None,
                 help="Worker threads for estimator runs."),
]


def shared_options(fn):
    for opt in reversed(_shared_options):
        fn = opt(fn)
    return fn


@click.group()
@click.version_option(package_name="polyrom")
def main():
    """Reduced-order modeling and adaptive state estimation toolkit."""


@main.command()
@shared_options
def simulate(config_path, use_defaults, overrides, seed, out, jobs):
    """Generate the training dataset and write it to <out>/dataset."""
    def body():
        cfg = _load_cfg(config_path, use_defaults, overrides, out, seed, jobs)
        out_dir = Path(cfg.output_dir)
        trajectories = ensure_dataset(cfg, out_dir)
        X, _ = build_snapshot_matrices(trajectories)
        energy = float(np.linalg.norm(X))
        click.echo(
            f"dataset: q={len(trajectories)} trajectories, "
            f"n={trajectories[0].n}, m={trajectories[0].n_pairs}, "
            f"dt={trajectories[0].dt:g}, ||X||_F={energy:.6g}"
        )
        _stage_report(out_dir, "simulate", {
            "q": len(trajectories), "n": trajectories[0].n,
            "m": trajectories[0].n_pairs, "frobenius_norm": energy,
            "root_seed": cfg.root_seed,
        })
    _guarded(body)


@main.command()
@shared_options
def train(config_path, use_defaults, overrides, seed, out, jobs):
    """Build the POD basis and operator bank from <out>/dataset."""
    def body():
        cfg = _load_cfg(config_path, use_defaults, overrides, out, seed, jobs)
        out_dir = Path(cfg.output_dir)
        trajectories = ensure_dataset(cfg, out_dir)
        bank, basis = ensure_model(cfg, trajectories, out_dir)
        energy = basis.retained_energy()
        click.echo(f"model: r={bank.r}, q={bank.q}, retained energy "
                   f"{energy:.9f}" if energy is not None else "model built")
        residuals = []
        for traj, A in zip(trajectories, bank.A_local):
            Xr = (traj.snapshots[:-1] @ basis.U).T
            Yr = (traj.snapshots[1:] @ basis.U).T
            res_local = float(np.linalg.norm(Yr - A @ Xr))
            res_robust = float(np.linalg.norm(Yr - bank.A_robust @ Xr))
            residuals.append({"p": traj.p, "local": res_local,
                              "robust": res_robust})
            click.echo(f"  p={traj.p:g}: one-step residual local={res_local:.4e} "
                       f"robust={res_robust:.4e}")
        if bank.q == 1:
            gap = float(np.abs(bank.A_local[0] - bank.A_robust).max())
            click.echo(f"  single-parameter bank: |local - robust| = {gap:.3e}")
        _stage_report(out_dir, "train", {
            "r": bank.r, "q": bank.q, "retained_energy": energy,
            "residuals": residuals,
        })
    _guarded(body)


@main.command()
@shared_options
@click.option("--p", "p_value", type=float, default=0.3, show_default=True,
              help="True parameter of the reference trajectory.")
@click.option("--run-seed", type=int, default=0, show_default=True,
              help="Seed index for this run.")
@click.option("--measurements", "measurements_csv", type=click.Path(),
              default=None, help="Pre-recorded measurement CSV (k,t,y0..y_{m-1}); "
                                 "skips reference simulation.")
def estimate(config_path, use_defaults, overrides, seed, out, jobs, p_value,
             run_seed, measurements_csv):
    """Run the configured estimators at one parameter value."""
    def body():
        cfg = _load_cfg(config_path, use_defaults, overrides, out, seed, jobs)
        out_dir = Path(cfg.output_dir)
        trajectories = ensure_dataset(cfg, out_dir)
        bank, basis = ensure_model(cfg, trajectories, out_dir)
        obs = ObservationOperator.from_sensors(basis, cfg.sensors().sensor_indices)
        runs_dir = out_dir / "runs"
        runs_dir.mkdir(exist_ok=True)
        truth = None
        if measurements_csv is not None:
            rows = np.loadtxt(measurements_csv, delimiter=",", skiprows=1,
                              ndmin=2)
            measurements = rows[:, 2:]
            dt = cfg.burgers.dt_snapshot
        else:
            base = simulate_references(cfg, [p_value])[p_value]
            truth, measurements = reference_for_seed(cfg, base, p_value, run_seed)
            dt = truth.dt
        records = []
        import csv as _csv
        for name in cfg.estimators:
            estimator = make_estimator(name, bank, basis, obs, cfg.noise, cfg.ukf)
            run = run_stream(estimator, measurements)
            if not np.isfinite(run.x_hat).all():
                raise NumericalBlowupError(
                    f"estimator {name} diverged (non-finite estimates)", time=0.0
                )
            if truth is not None:
                rel = relative_error_series(run.z_hat, truth.snapshots[1:])
                floor = projection_floor(truth.snapshots[1:], basis)
            else:
                rel = np.full(run.n_steps, np.nan)
                floor = np.full(run.n_steps, np.nan)
            path = runs_dir / f"{name}_p{p_value:g}_s{run_seed}.csv"
            with path.open("w", newline="") as fh:
                writer = _csv.writer(fh)
                writer.writerow(["k", "t", "p_hat", "p_hat_cov",
                                 "state_rel_err", "proj_floor"])
                for k in range(run.n_steps):
                    writer.writerow([
                        k + 1, repr(float((k + 1) * dt)),
                        repr(float(run.p_hat[k])), repr(float(run.p_cov[k])),
                        repr(float(rel[k])), repr(float(floor[k])),
                    ])
            click.echo(f"wrote {path}")
            records.append({"estimator": name, "csv": str(path),
                            "err_time_avg": None if truth is None
                            else float(np.mean(rel))})
        _stage_report(out_dir, "estimate", {
            "p": p_value, "run_seed": run_seed,
            "from_measurement_file": measurements_csv is not None,
            "runs": records,
        })
    _guarded(body)


@main.command()
@shared_options
def evaluate(config_path, use_defaults, overrides, seed, out, jobs):
    """Aggregate run CSVs into summary.csv and figure-analog CSVs."""
    def body():
        cfg = _load_cfg(config_path, use_defaults, overrides, out, seed, jobs)
        out_dir = Path(cfg.output_dir)
        if not (out_dir / "runs").is_dir():
            raise InvalidInputError(f"no runs directory under {out_dir}")
        rows, missing = aggregate_runs(cfg, out_dir)
        _stage_report(out_dir, "evaluate", {
            "rows": len(rows),
            "missing": [f"{e}_p{p:g}_s{s}" for e, p, s in missing],
        })
        if not rows:
            raise InvalidInputError("no usable runs found to aggregate")
        click.echo(f"summary: {len(rows)} (estimator, p) cells "
                   f"-> {out_dir / 'summary.csv'}")
        if missing:
            for e, p, s in missing:
                click.echo(f"missing run: {e}_p{p:g}_s{s}", err=True)
            click.echo(f"warning: partial summary ({len(missing)} runs missing)",
                       err=True)
            sys.exit(EXIT_INVALID)
    _guarded(body)


@main.command()
@shared_options
def full(config_path, use_defaults, overrides, seed, out, jobs):
    """Run the complete pipeline: simulate, train, estimate, evaluate."""
    def body():
        cfg = _load_cfg(config_path, use_defaults, overrides, out, seed, jobs)
        report = run_experiment(cfg)
        click.echo(f"{len(report.runs)} runs -> {report.output_dir / 'summary.csv'} "
                   f"({report.seconds:.1f}s)")
        for failure in report.failures:
            click.echo(f"failed: {failure['run']}: {failure['message']}", err=True)
        if report.failures:
            sys.exit(EXIT_NUMERICAL)
    _guarded(body)


@main.command("export-config")
@shared_options
@click.argument("path", type=click.Path())
def export_config(config_path, use_defaults, overrides, seed, out, jobs, path):
    """Write the effective configuration (defaults + overrides) to PATH."""
    def body():
        cfg = _load_cfg(config_path, True if config_path is None else use_defaults,
                        overrides, out, seed, jobs)
        save_config(cfg, path)
        click.echo(f"wrote {path}")
    _guarded(body)


if __name__ == "__main__":
    main()
