"""Versioned parameter checkpoints: one .npz tensor dump plus a JSON manifest.

Layout inside a checkpoint directory:
  manifest.json  format marker, version, model name, tensor names/shapes/
                 dtypes, and free-form metadata (e.g. the run config digest)
  tensors.npz    the arrays, keyed by tensor name

Loading verifies the manifest against the dump; any mismatch is an error.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Mapping

import numpy as np

FORMAT = "crossrec-checkpoint"
VERSION = 1


def save_checkpoint(directory, tensors: Mapping[str, np.ndarray], model: str,
                    meta: dict | None = None) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {
        "format": FORMAT,
        "version": VERSION,
        "model": model,
        "tensors": [{"name": name, "shape": list(np.asarray(tensors[name]).shape),
                     "dtype": str(np.asarray(tensors[name]).dtype)}
                    for name in sorted(tensors)],
        "meta": meta or {},
    }
    with (directory / "manifest.json").open("w", encoding="utf-8") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True)
        handle.write("\n")
    np.savez(directory / "tensors.npz", **{k: np.asarray(v) for k, v in tensors.items()})


def load_checkpoint(directory) -> tuple[dict[str, np.ndarray], dict]:
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"no checkpoint manifest at {manifest_path}")
    with manifest_path.open("r", encoding="utf-8") as handle:
        manifest = json.load(handle)
    if manifest.get("format") != FORMAT:
        raise ValueError(f"{manifest_path}: not a {FORMAT} manifest")
    if manifest.get("version") != VERSION:
        raise ValueError(f"{manifest_path}: unsupported version {manifest.get('version')}")
    with np.load(directory / "tensors.npz") as dump:
        tensors = {name: dump[name].copy() for name in dump.files}
    declared = {entry["name"]: entry for entry in manifest["tensors"]}
    if set(declared) != set(tensors):
        raise ValueError(f"{directory}: manifest tensors {sorted(declared)} do not "
                         f"match dump contents {sorted(tensors)}")
    for name, entry in declared.items():
        if list(tensors[name].shape) != entry["shape"]:
            raise ValueError(f"{directory}: tensor {name!r} shape {tensors[name].shape} "
                             f"!= manifest {entry['shape']}")
    return tensors, manifest
