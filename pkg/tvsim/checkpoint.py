"""
Binary container for matrices: one JSON header line, then raw float64 data.

Layout:
    <header JSON, UTF-8, no newlines>\\n
    <payload: each entry as little-endian float64, row-major, back to back>

The header records, per entry, its name, rows, cols, byte offset into the
payload and a sha256 of its bytes, plus the dtype tag "f64le", the layout tag
"row-major", a container kind and free-form metadata. Loading checks every
size and digest and validates the restored records, so a truncated, edited
or inconsistent file fails with CheckpointError.
"""
# tvsim/checkpoint.py
from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any, Callable, Mapping

import numpy as np

from tvsim.errors import CheckpointError, DimensionError
from tvsim.types import (
    TOKENS_PER_CONCEPT,
    ConceptBasis,
    Dictionary,
    ModelParams,
    Sample,
    validate_basis,
    validate_params,
    validate_sample,
)

FORMAT_TAG = "tvsim-container"
FORMAT_VERSION = 1
DTYPE_TAG = "f64le"
LAYOUT_TAG = "row-major"
_DTYPE = np.dtype("<f8")


def _sha256_bytes(data: bytes) -> str:
    h = hashlib.sha256()
    h.update(data)
    return h.hexdigest()


def write_container(
    path: str | Path,
    arrays: Mapping[str, np.ndarray],
    *,
    kind: str,
    meta: Mapping[str, Any] | None = None,
) -> Path:
    entries: list[dict[str, Any]] = []
    chunks: list[bytes] = []
    offset = 0
    for name, arr in arrays.items():
        mat = np.asarray(arr, dtype=np.float64)
        if mat.ndim != 2:
            raise ValueError(f"entry {name!r} must be 2-D, got shape {mat.shape}")
        raw = np.ascontiguousarray(mat, dtype=_DTYPE).tobytes(order="C")
        entries.append(
            {
                "name": name,
                "rows": int(mat.shape[0]),
                "cols": int(mat.shape[1]),
                "offset": offset,
                "nbytes": len(raw),
                "sha256": _sha256_bytes(raw),
            }
        )
        chunks.append(raw)
        offset += len(raw)

    payload = b"".join(chunks)
    header = {
        "format": FORMAT_TAG,
        "version": FORMAT_VERSION,
        "kind": kind,
        "dtype": DTYPE_TAG,
        "layout": LAYOUT_TAG,
        "entries": entries,
        "payload_bytes": len(payload),
        "payload_sha256": _sha256_bytes(payload),
        "meta": dict(meta or {}),
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":"), ensure_ascii=True).encode("ascii")

    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_bytes(header_bytes + b"\n" + payload)
    return p


def read_header(path: str | Path) -> tuple[dict[str, Any], bytes]:
    p = Path(path)
    blob = p.read_bytes()
    cut = blob.find(b"\n")
    if cut < 0:
        raise CheckpointError(f"{p}: missing header terminator")
    try:
        header = json.loads(blob[:cut].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{p}: header is not valid JSON: {exc}") from exc
    if not isinstance(header, dict):
        raise CheckpointError(f"{p}: header must be a JSON object")
    if header.get("format") != FORMAT_TAG:
        raise CheckpointError(f"{p}: unknown format {header.get('format')!r}")
    if header.get("dtype") != DTYPE_TAG or header.get("layout") != LAYOUT_TAG:
        raise CheckpointError(
            f"{p}: unsupported dtype/layout {header.get('dtype')!r}/{header.get('layout')!r}"
        )
    return header, blob[cut + 1 :]


def read_container(
    path: str | Path,
    *,
    kind: str | None = None,
) -> tuple[dict[str, Any], dict[str, np.ndarray]]:
    header, payload = read_header(path)
    if kind is not None and header.get("kind") != kind:
        raise CheckpointError(f"{path}: expected container kind {kind!r}, got {header.get('kind')!r}")
    if len(payload) != header.get("payload_bytes"):
        raise CheckpointError(
            f"{path}: payload is {len(payload)} bytes, header says {header.get('payload_bytes')}"
        )
    if _sha256_bytes(payload) != header.get("payload_sha256"):
        raise CheckpointError(f"{path}: payload digest mismatch")

    arrays: dict[str, np.ndarray] = {}
    try:
        for entry in header["entries"]:
            rows, cols = int(entry["rows"]), int(entry["cols"])
            start, nbytes = int(entry["offset"]), int(entry["nbytes"])
            if nbytes != rows * cols * _DTYPE.itemsize or start + nbytes > len(payload):
                raise CheckpointError(f"{path}: entry {entry['name']!r} has inconsistent size")
            raw = payload[start : start + nbytes]
            if _sha256_bytes(raw) != entry["sha256"]:
                raise CheckpointError(f"{path}: entry {entry['name']!r} digest mismatch")
            arrays[str(entry["name"])] = np.frombuffer(raw, dtype=_DTYPE).reshape(rows, cols).astype(np.float64)
    except CheckpointError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"{path}: malformed entry table: {exc}") from exc
    return header, arrays


def _validated(path: str | Path, check: Callable[..., None], *args: Any) -> None:
    try:
        check(*args)
    except ValueError as exc:
        raise CheckpointError(f"{path}: {exc}") from exc


def _meta_value(path: str | Path, header: Mapping[str, Any], key: str, cast: Callable[[Any], Any]) -> Any:
    try:
        return cast(header["meta"][key])
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"{path}: header meta has no valid {key!r}") from exc


def _array(path: str | Path, arrays: Mapping[str, np.ndarray], name: str) -> np.ndarray:
    try:
        return arrays[name]
    except KeyError:
        raise CheckpointError(f"{path}: missing matrix {name!r}") from None


def save_checkpoint(params: ModelParams, path: str | Path) -> Path:
    return write_container(path, params.as_dict(), kind="model_params", meta={"d": params.d})


def load_checkpoint(path: str | Path, *, expected_d: int | None = None) -> ModelParams:
    _, arrays = read_container(path, kind="model_params")
    params = ModelParams(**{name: _array(path, arrays, name) for name in ("W_K", "W_Q", "W_V")})
    _validated(path, validate_params, params)
    if expected_d is not None and params.d != expected_d:
        raise DimensionError(f"{path}: checkpoint has d={params.d}, expected d={expected_d}")
    return params


def save_basis(basis: ConceptBasis, path: str | Path) -> Path:
    return write_container(
        path,
        {"a": basis.a, "b": basis.b, "nu": basis.nu.reshape(-1, basis.d)},
        kind="concept_basis",
        meta={"d": basis.d},
    )


def load_basis(path: str | Path) -> ConceptBasis:
    header, arrays = read_container(path, kind="concept_basis")
    d = _meta_value(path, header, "d", int)
    nu = _array(path, arrays, "nu")
    if nu.size % max(d, 1):
        raise CheckpointError(f"{path}: nu block of {nu.size} values does not split into rows of d={d}")
    basis = ConceptBasis(d=d, a=_array(path, arrays, "a"), b=_array(path, arrays, "b"), nu=nu.reshape(-1, d))
    _validated(path, validate_basis, basis)
    return basis


def save_dictionary(dictionary: Dictionary, path: str | Path) -> Path:
    return write_container(
        path,
        {"tokens": dictionary.tokens},
        kind="dictionary",
        meta={"x_a": dictionary.x_a, "K": dictionary.K, "K_prime": dictionary.K_prime},
    )


def load_dictionary(path: str | Path) -> Dictionary:
    header, arrays = read_container(path, kind="dictionary")
    dictionary = Dictionary(
        tokens=_array(path, arrays, "tokens"),
        x_a=_meta_value(path, header, "x_a", float),
        K=_meta_value(path, header, "K", int),
        K_prime=_meta_value(path, header, "K_prime", int),
    )
    expected = TOKENS_PER_CONCEPT * dictionary.K + dictionary.K_prime
    if dictionary.size != expected:
        raise CheckpointError(f"{path}: {dictionary.size} tokens stored, K and K_prime call for {expected}")
    return dictionary


def save_samples(samples: list[Sample], path: str | Path) -> Path:
    arrays = {f"s{i:06d}": s.columns for i, s in enumerate(samples)}
    return write_container(
        path,
        arrays,
        kind="samples",
        meta={"samples": [s.metadata() for s in samples]},
    )


def load_samples(path: str | Path) -> list[Sample]:
    header, arrays = read_container(path, kind="samples")
    out: list[Sample] = []
    for i, meta in enumerate(_meta_value(path, header, "samples", list)):
        try:
            sample = Sample(
                columns=arrays[f"s{i:06d}"],
                kind=str(meta["kind"]),
                co_task=int(meta["co_task"]),
                label_sign=int(meta["label_sign"]),
                target_index=int(meta["target_index"]),
                anchor_positions=tuple(int(p) for p in meta["anchor_positions"]),
                concept_sets={
                    int(pos): tuple((int(k), int(s)) for k, s in concepts)
                    for pos, concepts in meta["concept_sets"].items()
                },
                task_set=tuple(int(k) for k in meta.get("task_set", [])),
            )
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise CheckpointError(f"{path}: sample {i} has malformed metadata: {exc!r}") from exc
        _validated(path, validate_sample, sample)
        out.append(sample)
    return out
