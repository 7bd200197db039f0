"""
Run-directory manifest.

`manifest.json` ties every file of a run directory to the resolved config that
produced it:

    schema_version     format version of this file
    generated_at_utc   time of the last stage update
    git_commit         HEAD of the checkout the simulator ran from
    config_hash        sha256 of the resolved config (canonical JSON)
    stages             train / evaluate / ood / plots payloads, by name
    artifact_hashes    sha256 per file, keyed by path relative to the run dir
"""
# tvsim/versioning.py
from __future__ import annotations

import hashlib
import json
import math
import subprocess
import warnings
from datetime import datetime, timezone
from functools import lru_cache
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from tvsim.errors import ConfigError

MANIFEST_SCHEMA_VERSION = 1
RUN_MANIFEST = "manifest.json"
_CHUNK = 1 << 20


def _json_ready(value: Any) -> Any:
    """numpy scalars/arrays become plain Python; non-finite floats become null."""
    if isinstance(value, dict):
        return {str(k): _json_ready(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_ready(v) for v in value]
    if isinstance(value, np.ndarray):
        return _json_ready(value.tolist())
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def canonical_json(data: Any) -> str:
    return json.dumps(_json_ready(data), ensure_ascii=False, indent=2, sort_keys=True)


def compute_config_hash(resolved_config: dict[str, Any]) -> str:
    return hashlib.sha256(canonical_json(resolved_config).encode("utf-8")).hexdigest()


@lru_cache(maxsize=1)
def git_commit() -> str:
    try:
        out = subprocess.run(
            ["git", "rev-parse", "HEAD"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            check=True,
        )
    except (OSError, subprocess.CalledProcessError):
        return "unknown"
    return out.stdout.strip() or "unknown"


def file_sha256(path: str | Path) -> str | None:
    p = Path(path)
    if not p.is_file():
        return None
    h = hashlib.sha256()
    with p.open("rb") as f:
        for block in iter(lambda: f.read(_CHUNK), b""):
            h.update(block)
    return h.hexdigest()


def artifact_key(path: str | Path, run_dir: str | Path) -> str:
    """Manifest key of a run artifact; files outside the run directory are rejected."""
    try:
        return Path(path).resolve().relative_to(Path(run_dir).resolve()).as_posix()
    except ValueError:
        raise ValueError(f"artifact {path} is outside the run directory {run_dir}") from None


def load_manifest(run_dir: str | Path) -> dict[str, Any] | None:
    path = Path(run_dir) / RUN_MANIFEST
    if not path.is_file():
        return None
    return json.loads(path.read_text(encoding="utf-8"))


def update_manifest(
    *,
    run_dir: str | Path,
    config_hash: str,
    stage_name: str,
    stage_payload: dict[str, Any],
    artifact_paths: Iterable[str | Path] | None = None,
) -> dict[str, Any]:
    """Records one pipeline stage and the digests of the files it wrote."""
    run_dir = Path(run_dir)
    previous = load_manifest(run_dir) or {}
    if previous.get("config_hash") not in (None, config_hash):
        # a rerun with a new config into the same directory starts a fresh manifest
        previous = {}

    stages = dict(previous.get("stages", {}))
    stages[stage_name] = _json_ready(stage_payload)
    digests = dict(previous.get("artifact_hashes", {}))
    for p in artifact_paths or ():
        digest = file_sha256(p)
        if digest is not None:
            digests[artifact_key(p, run_dir)] = digest

    manifest = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "generated_at_utc": datetime.now(timezone.utc).isoformat(),
        "git_commit": git_commit(),
        "config_hash": config_hash,
        "stages": dict(sorted(stages.items())),
        "artifact_hashes": dict(sorted(digests.items())),
    }
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / RUN_MANIFEST).write_text(canonical_json(manifest) + "\n", encoding="utf-8")
    return manifest


def verify_artifacts(run_dir: str | Path, manifest: dict[str, Any]) -> list[str]:
    """One message per recorded artifact that is missing or whose digest changed."""
    problems = []
    for rel, recorded in sorted(manifest.get("artifact_hashes", {}).items()):
        digest = file_sha256(Path(run_dir) / rel)
        if digest is None:
            problems.append(f"missing artifact: {rel}")
        elif digest != recorded:
            problems.append(f"artifact digest mismatch: {rel}")
    return problems


def ensure_manifest_compat(run_dir: str | Path, *, expected_config_hash: str) -> None:
    """Raises ConfigError when the run directory was produced by a different config."""
    manifest = load_manifest(run_dir)
    if manifest is None:
        warnings.warn(f"no {RUN_MANIFEST} in {run_dir}; config hash not checked", RuntimeWarning, stacklevel=2)
        return
    recorded = manifest.get("config_hash")
    if recorded and recorded != expected_config_hash:
        raise ConfigError(
            f"run directory {run_dir} was produced by a different config "
            f"(manifest={recorded!r} expected={expected_config_hash!r})",
            fields=["config_hash"],
        )
