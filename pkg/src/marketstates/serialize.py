"""Deterministic artifact I/O: JSON, CSV, npz archives, and content hashes.

Every writer here is byte-stable: identical in-memory objects produce
identical files regardless of when or where they are written (np.savez is
avoided because it embeds zip timestamps).  Floats go through repr, so a
read-back is bit-exact.
"""

from __future__ import annotations

import hashlib
import io
import json
import zipfile
from pathlib import Path

import numpy as np

from .errors import DataError

_EPOCH_STAMP = (1980, 1, 1, 0, 0, 0)  # fixed zip timestamp


def format_float(value) -> str:
    return repr(float(value))


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def write_json(path: str | Path, payload) -> None:
    with Path(path).open("w", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path: str | Path):
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path} is not valid JSON: {exc}") from exc


def write_csv(path: str | Path, header: list[str], rows) -> None:
    """Plain CSV with a header row; floats via repr, everything else via str."""
    with Path(path).open("w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            cells = [
                format_float(cell) if isinstance(cell, (float, np.floating)) else str(cell)
                for cell in row
            ]
            fh.write(",".join(cells) + "\n")


def save_arrays(path: str | Path, **arrays) -> None:
    """npz-compatible archive with fixed timestamps (byte-stable across runs)."""
    with zipfile.ZipFile(Path(path), "w", compression=zipfile.ZIP_DEFLATED) as zf:
        for name in sorted(arrays):
            buffer = io.BytesIO()
            np.lib.format.write_array(buffer, np.asarray(arrays[name]), allow_pickle=False)
            info = zipfile.ZipInfo(f"{name}.npy", date_time=_EPOCH_STAMP)
            info.compress_type = zipfile.ZIP_DEFLATED
            zf.writestr(info, buffer.getvalue())


def load_arrays(path: str | Path) -> dict[str, np.ndarray]:
    path = Path(path)
    try:
        with np.load(path, allow_pickle=False) as archive:
            return {name: archive[name] for name in archive.files}
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except (ValueError, zipfile.BadZipFile) as exc:
        raise DataError(f"{path} is not a readable array archive: {exc}") from exc


def _avg_corr_sidecar(path: Path) -> Path:
    return path.with_name(path.stem + "_avg_corr.npz")


def save_state_model(model, path: str | Path) -> None:
    """State model as JSON plus an array sidecar for the average matrices.

    The JSON holds everything scalar or label-like; the per-state average
    correlation matrices go to ``<stem>_avg_corr.npz`` next to it.
    """
    path = Path(path)
    write_json(
        path,
        {
            "k": model.k,
            "epsilon": model.epsilon,
            "state_of": [int(s) for s in model.state_of],
            "state_mean_corr": [float(v) for v in model.state_mean_corr],
            "transition_counts": [[int(c) for c in row] for row in model.transition_counts],
            "labels": list(model.labels),
            "epoch_dates": list(model.epoch_dates),
        },
    )
    if model.avg_corr_matrix:
        save_arrays(_avg_corr_sidecar(path), avg_corr=np.stack(model.avg_corr_matrix))


def load_state_model(path: str | Path):
    from .states import StateModel

    path = Path(path)
    raw = read_json(path)
    try:
        sidecar = _avg_corr_sidecar(path)
        averages = []
        if sidecar.exists():
            averages = list(load_arrays(sidecar)["avg_corr"])
        return StateModel(
            k=int(raw["k"]),
            epsilon=float(raw["epsilon"]),
            state_of=np.array(raw["state_of"], dtype=int),
            state_mean_corr=[float(v) for v in raw["state_mean_corr"]],
            avg_corr_matrix=averages,
            transition_counts=np.array(raw["transition_counts"], dtype=int),
            labels=list(raw["labels"]),
            epoch_dates=list(raw["epoch_dates"]),
        )
    except KeyError as exc:
        raise DataError(f"{path} is missing state-model field {exc}") from exc
