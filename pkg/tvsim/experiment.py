"""
Config-driven orchestration: build, train, evaluate, run OOD experiments, and
write every artifact into one run directory.

Run directory layout:
    config.json                resolved config (all defaults filled in)
    metrics.csv                one row per logged epoch
    manifest.json              config hash, git commit, stage payloads, file digests
    checkpoints/               init.ckpt, final.ckpt, basis.ckpt, dictionary.ckpt
    reports/                   evaluation.json, conditions.json, conditions.csv,
                               trajectory.json, ood.json
    plots/                     four SVG panels (when `plots` is on)
    error.json                 only when a run fails after validation
"""
# tvsim/experiment.py
from __future__ import annotations

import csv
import logging
import math
from pathlib import Path
from typing import Any

import numpy as np

from tvsim.checkpoint import load_basis, load_checkpoint, load_dictionary, save_basis, save_checkpoint, save_dictionary
from tvsim.config import SETTINGS
from tvsim.diagnostics.conditions import ConditionReport, check_training_conditions
from tvsim.diagnostics.losses import cosine_summary, evaluate_samples
from tvsim.diagnostics.probes import memorization_ratio, probe_summary, projection_probe
from tvsim.diagnostics.trajectory import trajectory_assertions
from tvsim.errors import ConfigError, InsufficientLogError
from tvsim.ood import run_ood_suite
from tvsim.plots import emit_plots
from tvsim.schema import ExperimentConfig, TrainConfig, load_experiment_config, parse_experiment_config
from tvsim.train_log import TrainLog, write_metrics_csv
from tvsim.trainer import TrainingSetup, setup_training, train, training_scales
from tvsim.types import ModelParams
from tvsim.versioning import canonical_json, compute_config_hash, ensure_manifest_compat, update_manifest

logger = logging.getLogger(__name__)

CONDITION_CSV_COLUMNS = ["item", "name", "lhs", "relation", "rhs", "slack", "defined", "passed"]


def _write_json(path: Path, payload: Any) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(canonical_json(payload) + "\n", encoding="utf-8")
    return path


def resolve_run_dir(config: ExperimentConfig) -> Path:
    if config.out_dir:
        return Path(config.out_dir)
    return Path(SETTINGS.OUTPUT_ROOT) / f"{config.train_dist}_seed{config.seed}"


def write_condition_reports(report: ConditionReport, reports_dir: Path) -> list[Path]:
    json_path = _write_json(reports_dir / "conditions.json", report.to_dict())
    csv_path = reports_dir / "conditions.csv"
    with csv_path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=CONDITION_CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in report.csv_rows():
            writer.writerow({k: ("" if row.get(k) is None else row.get(k)) for k in CONDITION_CSV_COLUMNS})
    return [json_path, csv_path]


def evaluation_report(
    params: ModelParams,
    setup: TrainingSetup,
    config: TrainConfig,
    log: TrainLog,
    *,
    threads: int = 1,
) -> dict[str, Any]:
    """Final-state losses, cosines and projection summaries on the held-out sets."""
    probes = projection_probe(params, setup.basis)
    ratio = memorization_ratio(probes, config.K)
    per_dist = {}
    for dist, samples in setup.heldout.items():
        summary = evaluate_samples(params, samples, setup.dictionary, threads=threads).to_dict()
        summary["cosines"] = cosine_summary(params, samples[: config.probe_samples], setup.basis, threads=threads)
        per_dist[dist] = summary
    return {
        "train_dist": config.train_dist,
        "final_epoch": log.final_epoch,
        "stopped_early": log.stopped_early,
        "ce_increases": log.ce_increases,
        "test": per_dist,
        "probes": probe_summary(probes, config.K),
        "memorization_ratio": ratio if math.isfinite(ratio) else None,
        "projection_tables": probes.to_dict(),
        "training_scales": training_scales(config),
    }


def _trajectory_payload(log: TrainLog, config: TrainConfig) -> dict[str, Any]:
    try:
        report = trajectory_assertions(
            log,
            config.train_dist,
            qa_ratio_max=config.qa_ratio_max,
            icl_ratio_min=config.icl_ratio_min,
            reference_slope=training_scales(config)["value_slope"],
        )
    except InsufficientLogError as exc:
        return {"skipped": True, "reason": str(exc)}
    return report.to_dict()


def write_error(run_dir: Path, exc: BaseException) -> Path:
    return _write_json(
        run_dir / "error.json",
        {
            "type": type(exc).__name__,
            "message": str(exc),
            "epoch": getattr(exc, "epoch", None),
            "sample_index": getattr(exc, "sample_index", None),
        },
    )


def run_experiment(
    config: ExperimentConfig,
    *,
    threads: int | None = None,
    progress: bool | None = None,
) -> Path:
    """Trains and evaluates one config; returns the run directory."""
    run_dir = resolve_run_dir(config)
    workers = threads or config.threads or SETTINGS.THREADS
    resolved = config.resolved()
    config_hash = compute_config_hash(resolved)
    ckpt_dir, reports_dir = run_dir / "checkpoints", run_dir / "reports"
    config_path = _write_json(run_dir / "config.json", resolved)
    (run_dir / "error.json").unlink(missing_ok=True)
    metrics_path = run_dir / "metrics.csv"

    log = TrainLog(K=config.K)
    try:
        setup = setup_training(config)
        setup_files = [
            save_basis(setup.basis, ckpt_dir / "basis.ckpt"),
            save_dictionary(setup.dictionary, ckpt_dir / "dictionary.ckpt"),
            save_checkpoint(setup.init, ckpt_dir / "init.ckpt"),
        ]
        params, log = train(config, threads=workers, progress=progress, log=log, setup=setup)
        final_path = save_checkpoint(params, ckpt_dir / "final.ckpt")
        write_metrics_csv(log, metrics_path)
        update_manifest(
            run_dir=run_dir,
            config_hash=config_hash,
            stage_name="train",
            stage_payload={**log.summary(), "seeds": setup.seeds, "threads": workers},
            artifact_paths=[config_path, metrics_path, final_path, *setup_files],
        )

        evaluation = evaluation_report(params, setup, config, log, threads=workers)
        outputs = [_write_json(reports_dir / "evaluation.json", evaluation)]
        conditions = check_training_conditions(config, config.condition_C, config.delta)
        outputs += write_condition_reports(conditions, reports_dir)
        outputs.append(_write_json(reports_dir / "trajectory.json", _trajectory_payload(log, config)))
        update_manifest(
            run_dir=run_dir,
            config_hash=config_hash,
            stage_name="evaluate",
            stage_payload={
                "test01": {d: v["zero_one"] for d, v in evaluation["test"].items()},
                "conditions_passed": conditions.passed,
            },
            artifact_paths=outputs,
        )

        if config.ood.experiments:
            rng = np.random.default_rng(config.seed + config.ood.seed_offset)
            ood = run_ood_suite(params, setup.basis, setup.dictionary, config, rng, threads=workers)
            ood_path = _write_json(reports_dir / "ood.json", ood)
            update_manifest(run_dir=run_dir, config_hash=config_hash, stage_name="ood", stage_payload=ood, artifact_paths=[ood_path])

        if config.plots:
            plots = emit_plots(metrics_path, run_dir / "plots")
            update_manifest(
                run_dir=run_dir,
                config_hash=config_hash,
                stage_name="plots",
                stage_payload={"files": [p.name for p in plots]},
                artifact_paths=plots,
            )
    except Exception as exc:
        if log.rows:
            write_metrics_csv(log, metrics_path)
        write_error(run_dir, exc)
        logger.error("run failed: %s: %s", type(exc).__name__, exc)
        raise

    logger.info("run complete: %s", run_dir)
    return run_dir


def run(
    config_path: str | Path,
    *,
    out: str | None = None,
    seed: int | None = None,
    threads: int | None = None,
    progress: bool | None = None,
) -> Path:
    config = load_experiment_config(config_path, overrides={"out_dir": out, "seed": seed, "threads": threads})
    return run_experiment(config, threads=threads, progress=progress)


def validate_config(
    config_path: str | Path,
    *,
    C: float | None = None,
    delta: float | None = None,
) -> dict[str, Any]:
    """Schema validation plus the sufficient-condition slack report. Writes nothing."""
    config = load_experiment_config(config_path)
    report = check_training_conditions(
        config,
        config.condition_C if C is None else C,
        config.delta if delta is None else delta,
    )
    return {
        "config": str(config_path),
        "valid": True,
        "conditions": report.to_dict(),
        "training_scales": training_scales(config),
    }


def _training_fields(config: TrainConfig) -> dict[str, Any]:
    return config.model_dump(mode="json", include=set(TrainConfig.model_fields))


def run_ood(config_path: str | Path, run_dir: str | Path, *, threads: int | None = None) -> dict[str, Any]:
    """
    Runs the OOD experiments of `config_path` against the final checkpoint of
    an earlier run. The training fields of both configs must agree.
    """
    run_dir = Path(run_dir)
    trained = load_experiment_config(run_dir / "config.json")
    ensure_manifest_compat(run_dir, expected_config_hash=compute_config_hash(trained.resolved()))
    requested = load_experiment_config(config_path)
    wanted, have = _training_fields(requested), _training_fields(trained)
    diff = sorted(k for k, v in wanted.items() if have.get(k) != v)
    if diff:
        raise ConfigError(f"config does not match the trained run in {run_dir}", fields=diff)
    merged = parse_experiment_config({**trained.resolved(), "ood": requested.ood.model_dump(mode="json")})

    ckpt_dir = run_dir / "checkpoints"
    basis = load_basis(ckpt_dir / "basis.ckpt")
    dictionary = load_dictionary(ckpt_dir / "dictionary.ckpt")
    params = load_checkpoint(ckpt_dir / "final.ckpt", expected_d=merged.d)
    workers = threads or merged.threads or SETTINGS.THREADS

    rng = np.random.default_rng(merged.seed + merged.ood.seed_offset)
    results = run_ood_suite(params, basis, dictionary, merged, rng, threads=workers)
    path = _write_json(run_dir / "reports" / "ood.json", results)
    update_manifest(
        run_dir=run_dir,
        config_hash=compute_config_hash(trained.resolved()),
        stage_name="ood",
        stage_payload=results,
        artifact_paths=[path],
    )
    return results
