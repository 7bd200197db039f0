from __future__ import annotations

import argparse
from pathlib import Path
import sys

REPO_ROOT = Path(__file__).resolve().parents[1]
if str(REPO_ROOT) not in sys.path:
    sys.path.insert(0, str(REPO_ROOT))

from tvsim.checkpoint import read_container
from tvsim.errors import CheckpointError, ConfigError
from tvsim.schema import load_experiment_config
from tvsim.versioning import compute_config_hash, load_manifest, verify_artifacts


def check_run_dir(run_dir: Path) -> list[str]:
    """Returns one message per mismatch; empty when the run directory is consistent."""
    manifest = load_manifest(run_dir)
    if manifest is None:
        return [f"missing manifest: {run_dir / 'manifest.json'}"]

    problems: list[str] = []
    try:
        current_hash = compute_config_hash(load_experiment_config(run_dir / "config.json").resolved())
    except ConfigError as exc:
        return [f"config.json unreadable: {exc}"]
    manifest_hash = str(manifest.get("config_hash", "") or "")
    if manifest_hash != current_hash:
        problems.append(f"config hash mismatch (manifest={manifest_hash} current={current_hash})")

    problems.extend(verify_artifacts(run_dir, manifest))

    for ckpt in sorted((run_dir / "checkpoints").glob("*.ckpt")):
        try:
            read_container(ckpt)
        except CheckpointError as exc:
            problems.append(f"checkpoint corrupt: {exc}")
    return problems


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="python scripts/check_artifacts.py")
    parser.add_argument("--run-dir", type=str, required=True)
    args = parser.parse_args(argv)

    run_dir = Path(args.run_dir)
    problems = check_run_dir(run_dir)
    if problems:
        for msg in problems:
            print(f"[MISMATCH] {msg}")
        return 1

    print(f"[OK] {run_dir}: config hash, artifact digests and checkpoints match the manifest.")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
