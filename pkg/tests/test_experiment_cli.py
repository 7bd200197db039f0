from __future__ import annotations

import json
from pathlib import Path

from tvsim.cli import main
from tvsim.train_log import read_metrics_csv


def _write_config(path: Path, out_dir: Path, **overrides) -> Path:
    payload = {
        "d": 24,
        "K": 2,
        "K_prime": 4,
        "M": 3,
        "J": 3,
        "N": 6,
        "sigma0": 0.1,
        "sigma1": 0.1,
        "sigma_p": 0.01,
        "eta": 0.5,
        "q_V": 0.1,
        "T": 6,
        "seed": 3,
        "train_dist": "qa",
        "log_every": 1,
        "eval_size": 6,
        "probe_samples": 3,
        "out_dir": str(out_dir),
    }
    payload.update(overrides)
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path


def test_run_writes_the_full_run_directory(tmp_path: Path):
    run_dir = tmp_path / "run"
    cfg = _write_config(tmp_path / "cfg.json", run_dir)
    assert main(["run", "--config", str(cfg), "--no-progress"]) == 0

    for rel in (
        "config.json",
        "metrics.csv",
        "manifest.json",
        "checkpoints/init.ckpt",
        "checkpoints/final.ckpt",
        "checkpoints/basis.ckpt",
        "checkpoints/dictionary.ckpt",
        "reports/evaluation.json",
        "reports/conditions.json",
        "reports/conditions.csv",
        "reports/trajectory.json",
        "plots/train_loss.svg",
    ):
        assert (run_dir / rel).exists(), rel
    assert not (run_dir / "error.json").exists()

    _, rows = read_metrics_csv(run_dir / "metrics.csv")
    assert [r["epoch"] for r in rows] == [float(e) for e in range(7)]

    manifest = json.loads((run_dir / "manifest.json").read_text(encoding="utf-8"))
    assert {"train", "evaluate", "plots"} <= set(manifest["stages"])
    evaluation = json.loads((run_dir / "reports" / "evaluation.json").read_text(encoding="utf-8"))
    assert set(evaluation["test"]) == {"icl", "qa", "qa_icl"}
    trajectory = json.loads((run_dir / "reports" / "trajectory.json").read_text(encoding="utf-8"))
    assert trajectory["train_dist"] == "qa"


def test_rerun_with_same_seed_is_byte_identical(tmp_path: Path):
    first = _write_config(tmp_path / "a.json", tmp_path / "a")
    second = _write_config(tmp_path / "b.json", tmp_path / "b")
    assert main(["run", "--config", str(first), "--no-progress"]) == 0
    assert main(["run", "--config", str(second), "--no-progress", "--threads", "2"]) == 0
    for rel in ("metrics.csv", "checkpoints/final.ckpt", "reports/evaluation.json"):
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes(), rel


def test_zero_epochs_log_one_row_and_skip_trajectory(tmp_path: Path):
    run_dir = tmp_path / "run"
    cfg = _write_config(tmp_path / "cfg.json", run_dir, T=0, plots=False)
    assert main(["run", "--config", str(cfg), "--no-progress"]) == 0
    _, rows = read_metrics_csv(run_dir / "metrics.csv")
    assert len(rows) == 1 and rows[0]["epoch"] == 0.0
    trajectory = json.loads((run_dir / "reports" / "trajectory.json").read_text(encoding="utf-8"))
    assert trajectory["skipped"] is True
    assert not (run_dir / "plots").exists()


def test_invalid_config_exits_with_config_error(tmp_path: Path, capsys):
    cfg = _write_config(tmp_path / "cfg.json", tmp_path / "run", d=4)
    assert main(["run", "--config", str(cfg)]) == 1
    err = capsys.readouterr().err
    assert "[CONFIG ERROR]" in err
    assert not (tmp_path / "run").exists()


def test_degenerate_run_exits_with_runtime_error_and_error_file(tmp_path: Path, capsys):
    run_dir = tmp_path / "run"
    cfg = _write_config(tmp_path / "cfg.json", run_dir, sigma1=0.0)
    assert main(["run", "--config", str(cfg), "--no-progress"]) == 2
    assert "[RUNTIME ERROR] DegenerateNormError" in capsys.readouterr().err
    error = json.loads((run_dir / "error.json").read_text(encoding="utf-8"))
    assert error["type"] == "DegenerateNormError"
    assert error["epoch"] == 0


def test_validate_prints_condition_report(tmp_path: Path, capsys):
    cfg = _write_config(tmp_path / "cfg.json", tmp_path / "run")
    assert main(["validate", "--config", str(cfg), "--C", "0.5"]) == 0
    out = capsys.readouterr().out
    assert "schema valid" in out
    payload = json.loads(out[: out.rindex("}") + 1])
    assert payload["conditions"]["C"] == 0.5
    assert not (tmp_path / "run").exists()


def test_plot_subcommand_rerenders_panels(tmp_path: Path):
    run_dir = tmp_path / "run"
    cfg = _write_config(tmp_path / "cfg.json", run_dir, T=2, plots=False)
    assert main(["run", "--config", str(cfg), "--no-progress"]) == 0
    assert main(["plot", "--metrics", str(run_dir / "metrics.csv"), "--out", str(tmp_path / "svg")]) == 0
    assert len(list((tmp_path / "svg").glob("*.svg"))) == 4


def test_ood_subcommand_checks_training_fields(tmp_path: Path, capsys):
    run_dir = tmp_path / "run"
    cfg = _write_config(tmp_path / "cfg.json", run_dir, T=1, plots=False)
    assert main(["run", "--config", str(cfg), "--no-progress"]) == 0

    ood_section = {"experiments": ["multi_concept", "demo_only"], "J_star": 6, "n_multi": 3, "n_demo_only": 3}
    good = _write_config(tmp_path / "ood.json", run_dir, T=1, plots=False, ood=ood_section)
    assert main(["ood", "--config", str(good), "--run-dir", str(run_dir)]) == 0
    results = json.loads((run_dir / "reports" / "ood.json").read_text(encoding="utf-8"))
    assert set(results) == {"multi_concept", "demo_only"}

    capsys.readouterr()
    mismatched = _write_config(tmp_path / "bad.json", run_dir, T=1, eta=0.25, ood=ood_section)
    assert main(["ood", "--config", str(mismatched), "--run-dir", str(run_dir)]) == 1
    assert "eta" in capsys.readouterr().err
