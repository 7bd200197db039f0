"""
Desk-scale acceptance harness.

Usage:
    python -m eval.run
    python -m eval.run separation --seeds 0,1,2 --threads 4
    python -m eval.run gradcheck --instances 50
    python -m eval.run flows --tuples 10000 --horizon 1000

Outputs are timestamped and written into a single output directory.

Flags:
    separation (default)
        --configs: comma-separated config paths (default: the three desk configs)
        --seeds: comma-separated seeds (default: "0,1,2")
        --runs-root: parent directory for the per-seed run directories (default: runs/acceptance)
        --threads: worker threads per run (default: SETTINGS.THREADS)
    gradcheck
        --instances: random tiny instances to compare (default: 50)
        --oracle: "complex" (complex step) or "central" (central differences) (default: complex)
        --step: central-difference step (default: SETTINGS.FD_STEP)
        --tol: maximum accepted relative error (default: 1e-6)
    flows
        --tuples: admissible parameter tuples per recurrence kind (default: 10000)
        --horizon: steps per recurrence (default: 1000)
    all subcommands
        --outdir: directory for summary JSON and Markdown (default: reports/acceptance)
        --seed: base seed for gradcheck/flows sampling (default: 0)
"""

from __future__ import annotations

import argparse
import json
import re
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List

import numpy as np

from eval.metrics import all_passed, at_least, at_most, first_epoch_at_most, pass_rate, safe_mean, seed_stats, tail_mean
from tvsim.concept_space import build_concept_basis, build_dictionary
from tvsim.config import SETTINGS
from tvsim.datagen import sample_icl_prompt, sample_qa_sentence
from tvsim.diagnostics.flows import FLOW_KINDS, sample_admissible, verify_flow_batch
from tvsim.experiment import run_experiment
from tvsim.gradients import grad_check
from tvsim.model import init_params
from tvsim.schema import load_experiment_config
from tvsim.train_log import column_values, read_metrics_csv

DEFAULT_CONFIGS = "configs/desk_qa.json,configs/desk_icl.json,configs/desk_qa_icl.json"
TEST_COLUMNS = ("test01_icl", "test01_qa", "test01_qaicl")
QA_TARGET = 0.05


def _fmt(value: float | None) -> str:
    if value is None:
        return "n/a"
    return f"{value:.4f}"


def _flag(value: bool | None) -> str:
    return "n/a" if value is None else ("PASS" if value else "FAIL")


def _parse_list(raw: str, cast=str) -> List[Any]:
    items = [t.strip() for t in (raw or "").split(",") if t.strip()]
    if not items:
        raise ValueError(f"empty list: {raw!r}")
    return [cast(t) for t in items]


def _slugify_for_filename(text: str) -> str:
    slug = re.sub(r"[^A-Za-z0-9._-]+", "-", (text or "").strip())
    slug = re.sub(r"-{2,}", "-", slug).strip("._-")
    return slug if slug else "acceptance"


def _timestamp_slug(dt_utc: datetime) -> str:
    return dt_utc.astimezone(timezone.utc).strftime("%Y%m%dT%H%M%SZ")


def _build_run_id(label: str, generated_at_utc: datetime) -> str:
    return f"{_slugify_for_filename(label)}_{_timestamp_slug(generated_at_utc)}"


def _build_artifact_paths(outdir: Path, run_id: str) -> Dict[str, Path]:
    return {
        "summary_json": outdir / f"{run_id}_summary.json",
        "summary_md": outdir / f"{run_id}_summary.md",
    }


def _read_json(path: Path) -> Dict[str, Any] | None:
    if not path.exists():
        return None
    return json.loads(path.read_text(encoding="utf-8"))


def _summarize_run(run_dir: Path, train_dist: str) -> Dict[str, Any]:
    _, rows = read_metrics_csv(run_dir / "metrics.csv")
    evaluation = _read_json(run_dir / "reports" / "evaluation.json") or {}
    ood = _read_json(run_dir / "reports" / "ood.json") or {}
    last = rows[-1] if rows else {}
    tails = {c: tail_mean(column_values(rows, c), 0.1) for c in TEST_COLUMNS}
    icl_cos = evaluation.get("test", {}).get("icl", {}).get("cosines", {})
    return {
        "run_dir": str(run_dir),
        "train_dist": train_dist,
        "final": {c: last.get(c) for c in TEST_COLUMNS},
        "tail": tails,
        "first_epoch_at_target": first_epoch_at_most(rows, TEST_COLUMNS, QA_TARGET),
        "cos_a_star": icl_cos.get("cos_a_star"),
        "cos_other_max": icl_cos.get("cos_other_max"),
        "cos_b_max": icl_cos.get("cos_b_max"),
        "memorization_ratio": evaluation.get("memorization_ratio"),
        "transfer_accuracy": ood.get("arithmetic_transfer", {}).get("accuracy"),
        "demo_only_cos": ood.get("demo_only", {}).get("cos_a_star_mean"),
        "dictionary_shift_loss": ood.get("dictionary_shift", {}).get("zero_one"),
        "multi_residual_ok": ood.get("multi_concept", {}).get("frac_residual_ok"),
        "multi_min_weight": ood.get("multi_concept", {}).get("min_weight"),
        "multi_balanced": ood.get("multi_concept", {}).get("frac_weights_balanced"),
    }


def _criteria(run: Dict[str, Any]) -> Dict[str, bool | None]:
    if run["train_dist"] == "qa":
        # "within T epochs": any logged epoch with every test distribution at target counts
        measured = all(run["final"][c] is not None for c in TEST_COLUMNS)
        return {
            "qa_converges": run.get("first_epoch_at_target") is not None if measured else None,
            "task_vector_retrieved": None
            if run["cos_a_star"] is None
            else run["cos_a_star"] >= 0.9 and (run["cos_other_max"] or 0.0) <= 0.15,
            "no_memorization": at_most(run["memorization_ratio"], 0.1),
            "transfer": at_least(run["transfer_accuracy"], 0.95),
            "demo_only": at_least(run["demo_only_cos"], 0.85),
            "dictionary_shift": at_most(run["dictionary_shift_loss"], 0.05),
            "multi_concept": None
            if run["multi_residual_ok"] is None
            else run["multi_residual_ok"] >= 0.9 and (run["multi_min_weight"] or 0.0) >= 0.0,
            "multi_balanced": at_least(run.get("multi_balanced"), 0.9),
        }
    return {
        "plateau": at_least(run["tail"]["test01_icl"], 0.10),
        "b_alignment": at_least(run["cos_b_max"], 0.2) if run["train_dist"] == "icl" else None,
        "memorization": at_least(run["memorization_ratio"], 0.3),
    }


def _separation(args: argparse.Namespace) -> Dict[str, Any]:
    configs = _parse_list(args.configs)
    seeds = _parse_list(args.seeds, int)
    runs: List[Dict[str, Any]] = []
    for cfg_path in configs:
        stem = Path(cfg_path).stem
        for seed in seeds:
            run_dir = Path(args.runs_root) / f"{stem}_seed{seed}"
            config = load_experiment_config(cfg_path, overrides={"seed": seed, "out_dir": str(run_dir)})
            t0 = time.perf_counter()
            run_experiment(config, threads=args.threads, progress=False)
            run = _summarize_run(run_dir, config.train_dist)
            run["config"] = cfg_path
            run["seed"] = seed
            run["seconds"] = round(time.perf_counter() - t0, 1)
            run["criteria"] = _criteria(run)
            runs.append(run)
            print(f"[OK] {stem} seed={seed} in {run['seconds']}s criteria={run['criteria']}")

    by_config: Dict[str, Any] = {}
    for cfg_path in configs:
        mine = [r for r in runs if r["config"] == cfg_path]
        names = sorted({k for r in mine for k in r["criteria"]})
        by_config[cfg_path] = {
            "tail_test01_icl": seed_stats(r["tail"]["test01_icl"] for r in mine),
            "pass_rate": {n: pass_rate(bool(r["criteria"][n]) for r in mine if r["criteria"].get(n) is not None) for n in names},
        }
    return {"runs": runs, "by_config": by_config, "passed": all_passed(r["criteria"] for r in runs)}


def _gradcheck(args: argparse.Namespace) -> Dict[str, Any]:
    rng = np.random.default_rng(args.seed)
    worst: List[float] = []
    for i in range(args.instances):
        basis = build_concept_basis(8, 2, 4, seed=int(rng.integers(2**31)))
        dictionary = build_dictionary(basis)
        params = init_params(8, 0.5, 0.5, seed=int(rng.integers(2**31)))
        if i % 2 == 0:
            sample = sample_qa_sentence(basis, 3, 0.05, 0.1, rng)
        else:
            sample = sample_icl_prompt(basis, 3, 0.05, 0.1, rng)
        report = grad_check(params, sample, dictionary, step=args.step, oracle=args.oracle)
        worst.append(report["max_rel_error"])
    max_err = max(worst) if worst else None
    return {
        "instances": args.instances,
        "oracle": args.oracle,
        "step": args.step,
        "tol": args.tol,
        "max_rel_error": max_err,
        "mean_rel_error": safe_mean(worst),
        "passed": max_err is not None and max_err <= args.tol,
    }


def _flows(args: argparse.Namespace) -> Dict[str, Any]:
    rng = np.random.default_rng(args.seed)
    kinds = {}
    for kind in FLOW_KINDS:
        params = sample_admissible(kind, args.tuples, rng)
        kinds[kind] = verify_flow_batch(kind, params, args.horizon).to_dict()
    return {
        "tuples": args.tuples,
        "horizon": args.horizon,
        "kinds": kinds,
        "passed": all(k["passed"] for k in kinds.values()),
    }


def _build_summary_markdown(summary: Dict[str, Any]) -> str:
    lines = [
        "# Acceptance Summary",
        "",
        f"- generated_at_utc: {summary['generated_at_utc']}",
        f"- run_id: {summary['run_id']}",
        f"- command: {summary['command']}",
        "",
    ]
    result = summary["result"]
    if summary["command"] == "separation":
        lines.append("## Runs")
        for run in result["runs"]:
            crit = ", ".join(f"{k}={_flag(v)}" for k, v in sorted(run["criteria"].items()))
            lines.append(
                f"- {Path(run['config']).stem} seed={run['seed']}: "
                f"tail icl={_fmt(run['tail']['test01_icl'])}, qa={_fmt(run['tail']['test01_qa'])}, "
                f"qaicl={_fmt(run['tail']['test01_qaicl'])} | {crit}"
            )
        lines.extend(["", "## Pass Rates"])
        for cfg, block in result["by_config"].items():
            rates = ", ".join(f"{k}={_fmt(v)}" for k, v in sorted(block["pass_rate"].items()))
            lines.append(f"- {Path(cfg).stem}: {rates or 'n/a'}")
        lines.extend(["", f"- verdict: {_flag(result['passed'])}"])
    elif summary["command"] == "gradcheck":
        lines.extend(
            [
                "## Gradient Check",
                f"- instances: {result['instances']}",
                f"- oracle: {result.get('oracle', 'complex')}",
                f"- max_rel_error: {result['max_rel_error']:.3e}" if result["max_rel_error"] is not None else "- max_rel_error: n/a",
                f"- tol: {result['tol']:g}",
                f"- verdict: {_flag(result['passed'])}",
            ]
        )
    else:
        lines.append("## Flow Bounds")
        for kind, check in result["kinds"].items():
            lines.append(f"- {kind}: violations={check['violations']} of {check['tuples']} -> {_flag(check['passed'])}")
    return "\n".join(lines) + "\n"


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="python -m eval.run")
    parser.add_argument("command", nargs="?", default="separation", choices=["separation", "gradcheck", "flows"])
    parser.add_argument("--outdir", type=str, default="reports/acceptance")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--configs", type=str, default=DEFAULT_CONFIGS)
    parser.add_argument("--seeds", type=str, default="0,1,2")
    parser.add_argument("--runs-root", type=str, default="runs/acceptance")
    parser.add_argument("--threads", type=int, default=SETTINGS.THREADS)
    parser.add_argument("--instances", type=int, default=50)
    parser.add_argument("--oracle", choices=["complex", "central"], default="complex")
    parser.add_argument("--step", type=float, default=SETTINGS.FD_STEP)
    parser.add_argument("--tol", type=float, default=1e-6)
    parser.add_argument("--tuples", type=int, default=10000)
    parser.add_argument("--horizon", type=int, default=1000)
    return parser


def main(argv: List[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {"separation": _separation, "gradcheck": _gradcheck, "flows": _flows}
    t0 = time.perf_counter()
    result = handlers[args.command](args)

    generated_at_utc = datetime.now(timezone.utc)
    run_id = _build_run_id(args.command, generated_at_utc)
    summary = {
        "run_id": run_id,
        "generated_at_utc": generated_at_utc.isoformat(),
        "command": args.command,
        "seconds": round(time.perf_counter() - t0, 2),
        "result": result,
    }
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = _build_artifact_paths(outdir, run_id)
    summary["artifact_paths"] = {name: str(p) for name, p in paths.items()}
    paths["summary_json"].write_text(json.dumps(summary, indent=2, ensure_ascii=False, sort_keys=True), encoding="utf-8")
    paths["summary_md"].write_text(_build_summary_markdown(summary), encoding="utf-8")

    print(f"[OK] run_id={run_id}")
    print(f"[OK] wrote {paths['summary_json']}")
    print(f"[OK] wrote {paths['summary_md']}")
    return 0 if result["passed"] else 1


if __name__ == "__main__":
    raise SystemExit(main())
