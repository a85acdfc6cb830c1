"""Binary tensor blobs and checkpoint files.

Blob layout: magic "FJB1", u32 rank, u32 dims[rank], then little-endian
float32 payload, row-major. A checkpoint is a JSON manifest (config + segment
table) next to one blob holding all segments concatenated flat.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import IoError
from .numcore import ParamSet

MAGIC = b"FJB1"


def write_blob(path: Path, array: np.ndarray) -> None:
    a = np.ascontiguousarray(array, dtype="<f4")
    header = MAGIC + np.uint32(a.ndim).tobytes()
    header += np.asarray(a.shape, dtype="<u4").tobytes()
    try:
        with open(path, "wb") as f:
            f.write(header)
            f.write(a.tobytes())
    except OSError as e:
        raise IoError(f"cannot write blob {path}: {e}") from e


def read_blob(path: Path) -> np.ndarray:
    try:
        raw = Path(path).read_bytes()
    except OSError as e:
        raise IoError(f"cannot read blob {path}: {e}") from e
    if raw[:4] != MAGIC:
        raise IoError(f"bad magic in {path}: {raw[:4]!r} (expected {MAGIC!r})")
    rank = int(np.frombuffer(raw, dtype="<u4", count=1, offset=4)[0])
    dims = np.frombuffer(raw, dtype="<u4", count=rank, offset=8)
    payload = np.frombuffer(raw, dtype="<f4", offset=8 + 4 * rank)
    n = int(np.prod(dims)) if rank else payload.size
    if payload.size != n:
        raise IoError(f"truncated blob {path}: expected {n} values, found {payload.size}")
    return payload.reshape(dims).copy()


def dump_json(path: Path, obj) -> None:
    try:
        Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e


def load_json(path: Path):
    try:
        return json.loads(Path(path).read_text())
    except OSError as e:
        raise IoError(f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise IoError(f"malformed JSON in {path}: {e}") from e


def save_checkpoint(path: Path, config: dict, params: ParamSet) -> None:
    """Write <path>.json manifest plus <path>.fjb with all segments flattened."""
    path = Path(path)
    blob_path = path.with_suffix(".fjb")
    flat = np.concatenate([t.data.reshape(-1) for _, t in params.segments]) if params.segments else np.zeros(0)
    write_blob(blob_path, flat)
    manifest = {
        "kind": "checkpoint",
        "version": 1,
        "config": config,
        "segments": [{"name": n, "shape": list(t.shape)} for n, t in params.segments],
        "blob": blob_path.name,
    }
    dump_json(path.with_suffix(".json"), manifest)


def load_checkpoint(path: Path) -> tuple[dict, ParamSet]:
    path = Path(path)
    manifest = load_json(path.with_suffix(".json") if path.suffix != ".json" else path)
    if not isinstance(manifest, dict) or manifest.get("kind") != "checkpoint":
        raise IoError(f"{path} is not a checkpoint manifest")
    blob = read_blob(path.parent / manifest["blob"])
    segs, off = [], 0
    for seg in manifest["segments"]:
        n = int(np.prod(seg["shape"])) if seg["shape"] else 1
        segs.append((seg["name"], blob[off:off + n].reshape(seg["shape"])))
        off += n
    if off != blob.size:
        raise IoError(f"checkpoint blob size mismatch in {path}: used {off} of {blob.size}")
    return manifest["config"], ParamSet.from_arrays(segs)
