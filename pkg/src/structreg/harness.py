"""Monte Carlo orchestration, report assembly, and result persistence.

A run is fully determined by its config and seed: trial r draws from rng
stream r, trials are merged in index order regardless of execution order, and
the emitted ``summary.csv`` / ``curves.csv`` are byte-identical across
reruns. Timestamps and wall time live only in ``report.json`` metadata. The
``SRE_THREADS`` environment variable caps worker processes (default 1,
sequential).
"""

from __future__ import annotations

import datetime
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .auction import AuctionScenario, auction_experiment
from .config import ENTRY_EXIT_REGIMES, RunConfig
from .data import SeededRng
from .demand import DemandParams, demand_experiment
from .entry_exit import DdcParams, RPathSpec, entry_exit_experiment
from .metrics import AggregateRow, metrics, sort_curves

SUMMARY_HEADER = "experiment,scenario,estimator,domain,bias,variance,mse,trials,seed"
CURVES_HEADER = "trial,estimator,domain,x,truth,prediction"


@dataclass(frozen=True)
class MonteCarloReport:
    """Everything a run produced: aggregates, raw curves, and provenance."""

    experiment: str
    scenario: int
    trials: int
    base_seed: int
    estimators: tuple[str, ...]
    aggregates: tuple[AggregateRow, ...]
    curves: tuple[tuple, ...]
    config_snapshot: dict
    software_version: str = __version__
    metadata: dict = field(default_factory=dict)

    def aggregate(self, estimator: str, domain: str) -> AggregateRow:
        for row in self.aggregates:
            if row.estimator == estimator and row.domain == domain:
                return row
        raise KeyError((estimator, domain))


def _g17(value: float) -> str:
    return format(float(value), ".17g")


def _run_slice(config: RunConfig, indices: tuple[int, ...]) -> tuple[list, dict]:
    """Run a subset of trial indices of the configured experiment."""
    rng = SeededRng(config.base_seed)
    grid = None if config.lambda_grid is None else np.asarray(config.lambda_grid, float)
    cv = config.cv
    if config.experiment == "auction":
        block = dict(config.auction)
        scenario = AuctionScenario.from_index(
            config.scenario,
            **{
                key: tuple(value) if isinstance(value, list) else value
                for key, value in (
                    (k, block[k])
                    for k in ("M", "overbid_sigma", "beta_shape")
                    if k in block
                )
            },
            **(
                {"n_range_train": tuple(block["n_train"])} if "n_train" in block else {}
            ),
            **({"n_range_test": tuple(block["n_test"])} if "n_test" in block else {}),
        )
        return auction_experiment(
            scenario,
            estimators=config.estimators,
            trials=config.trials,
            rng=rng,
            lambda_grid=grid,
            forward_K=cv.get("K", 6),
            trial_indices=indices,
        )
    if config.experiment == "entry-exit":
        block = dict(config.entry_exit)
        param_keys = (
            "mu", "alpha", "entry_cost", "discount", "n_firms", "t_total", "t_train",
        )
        params = DdcParams(**{k: block[k] for k in param_keys if k in block})
        rpath_keys = ("r0", "trend", "ar_coef", "innovation_sd")
        rpath = RPathSpec(**{k: block[k] for k in rpath_keys if k in block})
        return entry_exit_experiment(
            ENTRY_EXIT_REGIMES[config.scenario],
            params,
            estimators=config.estimators,
            trials=config.trials,
            rng=rng,
            rpath=rpath,
            lambda_grid=grid,
            trial_indices=indices,
        )
    params = DemandParams(**config.demand) if config.demand else None
    return demand_experiment(
        config.scenario,
        params=params,
        estimators=config.estimators,
        trials=config.trials,
        rng=rng,
        lambda_grid=grid,
        trial_indices=indices,
    )


def _worker_count(trials: int) -> int:
    raw = os.environ.get("SRE_THREADS", "1")
    try:
        limit = max(1, int(raw))
    except ValueError:
        limit = 1
    return min(limit, trials)


def run_monte_carlo(config: RunConfig) -> MonteCarloReport:
    """Execute an experiment config and assemble its report.

    Trials run on a worker pool when ``SRE_THREADS`` allows; the report is
    identical either way because trial streams are independent and records
    are sorted before aggregation.
    """
    started = time.time()
    workers = _worker_count(config.trials)
    indices = tuple(range(config.trials))
    if workers == 1:
        records, metadata = _run_slice(config, indices)
    else:
        chunks = [tuple(chunk) for chunk in np.array_split(indices, workers) if len(chunk)]
        records, metadata = [], {}
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for part_records, part_meta in pool.map(
                _run_slice, [config] * len(chunks), chunks
            ):
                records.extend(part_records)
                metadata = part_meta
    curves = tuple(sort_curves(records))
    aggregates = tuple(metrics(curves))
    metadata = dict(metadata)
    metadata["wall_time_s"] = time.time() - started
    metadata["finished_at"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    # canonicalize to JSON-representable values so a reloaded report compares
    # equal to the in-memory one
    metadata = json.loads(json.dumps(metadata))
    return MonteCarloReport(
        experiment=config.experiment,
        scenario=config.scenario,
        trials=config.trials,
        base_seed=config.base_seed,
        estimators=tuple(config.estimators),
        aggregates=aggregates,
        curves=curves,
        config_snapshot=config.to_mapping(),
        metadata=metadata,
    )


def _write_summary(report: MonteCarloReport, path: Path) -> None:
    lines = [SUMMARY_HEADER]
    for row in report.aggregates:
        lines.append(
            ",".join(
                [
                    report.experiment,
                    str(report.scenario),
                    row.estimator,
                    row.domain,
                    _g17(row.bias),
                    _g17(row.variance),
                    _g17(row.mse),
                    str(row.trials),
                    str(report.base_seed),
                ]
            )
        )
    path.write_text("\n".join(lines) + "\n")


def _write_curves(report: MonteCarloReport, path: Path) -> None:
    lines = [CURVES_HEADER]
    for trial, estimator, domain, x, truth, prediction in report.curves:
        lines.append(
            f"{trial},{estimator},{domain},{_g17(x)},{_g17(truth)},{_g17(prediction)}"
        )
    path.write_text("\n".join(lines) + "\n")


def report_to_dict(report: MonteCarloReport) -> dict:
    return {
        "experiment": report.experiment,
        "scenario": report.scenario,
        "trials": report.trials,
        "base_seed": report.base_seed,
        "estimators": list(report.estimators),
        "aggregates": [
            {
                "estimator": row.estimator,
                "domain": row.domain,
                "bias": row.bias,
                "variance": row.variance,
                "mse": row.mse,
                "trials": row.trials,
            }
            for row in report.aggregates
        ],
        "curves": [list(record) for record in report.curves],
        "config_snapshot": report.config_snapshot,
        "software_version": report.software_version,
        "metadata": report.metadata,
    }


def report_from_dict(payload: dict) -> MonteCarloReport:
    return MonteCarloReport(
        experiment=payload["experiment"],
        scenario=payload["scenario"],
        trials=payload["trials"],
        base_seed=payload["base_seed"],
        estimators=tuple(payload["estimators"]),
        aggregates=tuple(AggregateRow(**row) for row in payload["aggregates"]),
        curves=tuple(tuple(record) for record in payload["curves"]),
        config_snapshot=payload["config_snapshot"],
        software_version=payload["software_version"],
        metadata=payload["metadata"],
    )


def load_report(path: str | Path) -> MonteCarloReport:
    return report_from_dict(json.loads(Path(path).read_text()))


def emit_outputs(report: MonteCarloReport, out_dir: str | Path) -> list[Path]:
    """Write summary.csv, curves.csv, config.snapshot, and report.json.

    Numbers use 17 significant digits (lossless for doubles). On any failure
    the partially written files are removed before the error propagates.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "summary": out / "summary.csv",
        "curves": out / "curves.csv",
        "config": out / "config.snapshot",
        "report": out / "report.json",
    }
    written: list[Path] = []
    try:
        _write_summary(report, paths["summary"])
        written.append(paths["summary"])
        _write_curves(report, paths["curves"])
        written.append(paths["curves"])
        paths["config"].write_text(
            json.dumps(report.config_snapshot, sort_keys=True, indent=2) + "\n"
        )
        written.append(paths["config"])
        paths["report"].write_text(json.dumps(report_to_dict(report)) + "\n")
        written.append(paths["report"])
    except BaseException:
        for path in written:
            path.unlink(missing_ok=True)
        raise
    return list(paths.values())


def recompute_aggregates_from_curves(path: str | Path) -> list[AggregateRow]:
    """Re-derive the summary metrics from an emitted curves.csv."""
    lines = Path(path).read_text().strip().splitlines()
    if lines[0] != CURVES_HEADER:
        raise ValueError("unexpected curves.csv header")
    records = []
    for line in lines[1:]:
        trial, estimator, domain, x, truth, prediction = line.split(",")
        records.append(
            (int(trial), estimator, domain, float(x), float(truth), float(prediction))
        )
    return metrics(records)
