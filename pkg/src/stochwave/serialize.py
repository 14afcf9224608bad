"""Deterministic on-disk formats: CSV tables, manifests, binary dumps.

Every run writes a manifest capturing the canonical config, its hash, the
seed and the checksums of all produced files; re-running the same
manifest inputs reproduces every CSV byte for byte.  Floats are rendered
with repr (shortest round-trip form), so formatting never depends on
locale or platform defaults.
"""

from __future__ import annotations

import datetime
import hashlib
import json
from pathlib import Path

import numpy as np

__all__ = [
    "canonical_json",
    "config_hash",
    "format_value",
    "write_csv",
    "sha256_file",
    "write_manifest",
    "write_binary_arrays",
    "read_binary_arrays",
]

TOOL_VERSION = "0.1.0"


def canonical_json(obj) -> str:
    """Stable serialization: sorted keys, tight separators."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=True)


# run-placement fields: they never change results, so they never change the hash
_NON_SEMANTIC_KEYS = ("output", "threads")


def config_hash(config: dict) -> str:
    trimmed = {k: v for k, v in config.items() if k not in _NON_SEMANTIC_KEYS}
    return hashlib.sha256(canonical_json(trimmed).encode()).hexdigest()


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_csv(path: Path, header: list[str], rows, preamble: str | None = None) -> Path:
    path = Path(path)
    lines = []
    if preamble:
        lines.append(f"# {preamble}")
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(format_value(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(
    out_dir: Path,
    subcommand: str,
    config: dict,
    seed: int,
    resolution: dict,
    outputs: list[Path],
) -> Path:
    out_dir = Path(out_dir)
    manifest = {
        "subcommand": subcommand,
        "config": config,
        "config_hash": config_hash(config),
        "seed": seed,
        "tool_version": TOOL_VERSION,
        "resolution": resolution,
        "created": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "outputs": [
            {"name": Path(p).name, "sha256": sha256_file(p)} for p in outputs
        ],
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def write_binary_arrays(path: Path, arrays: dict[str, np.ndarray]) -> Path:
    """Compact dump: one JSON header line, then flat little-endian float64."""
    path = Path(path)
    header = {
        "format": "stochwave-arrays-v1",
        "arrays": [
            {"name": name, "shape": list(arr.shape), "dtype": "<f8"}
            for name, arr in arrays.items()
        ],
    }
    with open(path, "wb") as fh:
        fh.write(canonical_json(header).encode() + b"\n")
        for arr in arrays.values():
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return path


def read_binary_arrays(path: Path) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode())
        if header.get("format") != "stochwave-arrays-v1":
            raise ValueError("not a stochwave binary dump")
        out = {}
        for spec in header["arrays"]:
            count = int(np.prod(spec["shape"])) if spec["shape"] else 1
            raw = fh.read(8 * count)
            if len(raw) != 8 * count:
                raise ValueError("truncated binary dump")
            out[spec["name"]] = np.frombuffer(raw, dtype="<f8").reshape(spec["shape"]).copy()
    return out
