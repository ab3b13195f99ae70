"""Text-based persistence: near-field matrices, indicator maps, manifests.

All files are plain text with floats printed as ``%.17g`` so that every value
round-trips bit-exactly.  Writes go through a temp-file-then-rename step so a
crashed run never leaves a truncated artifact behind.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile

import numpy as np

from .geometry import WaveParams
from .imaging import IndicatorMap
from .operators import NearFieldData

__all__ = [
    "atomic_write_text",
    "sha256_file",
    "save_near_field",
    "load_near_field",
    "save_indicator_csv",
    "load_indicator_csv",
    "save_indicator_pgm",
    "write_manifest",
    "near_field_filename",
]

_MAGIC = "defectscan-nearfield-v1"


def _g17(x: float) -> str:
    return "%.17g" % float(x)


def atomic_write_text(path, text: str):
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def near_field_filename(direction: str, side: str, variant: str = "perturbed") -> str:
    d = "up" if direction == "+" else "down"
    s = "top" if side == "+" else "bottom"
    suffix = "" if variant == "perturbed" else f"_{variant}"
    return f"nearfield_{d}_{s}{suffix}.dat"


def save_near_field(path, data: NearFieldData):
    wave = data.wave
    lines = [
        _MAGIC,
        f"k = {_g17(wave.k)}",
        f"L = {_g17(wave.L)}",
        f"M = {wave.M}",
        f"h = {_g17(wave.h)}",
        f"n_min = {wave.n_min}",
        f"n_max = {wave.n_max}",
        f"side = {data.side}",
        f"direction = {data.direction}",
        f"variant = {data.variant}",
        f"delta = {_g17(data.noise_level)}",
        f"seed = {'none' if data.seed is None else int(data.seed)}",
        f"size = {data.indices.size}",
    ]
    for row in data.matrix:
        lines.append(" ".join(f"{_g17(c.real)} {_g17(c.imag)}" for c in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_near_field(path) -> NearFieldData:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line.strip() for line in fh if line.strip()]
    if not lines or lines[0] != _MAGIC:
        raise ValueError(f"{path}: not a near-field data file")
    meta = {}
    pos = 1
    while pos < len(lines) and "=" in lines[pos]:
        key, _, value = lines[pos].partition("=")
        meta[key.strip()] = value.strip()
        pos += 1
    try:
        wave = WaveParams(
            k=float(meta["k"]),
            L=float(meta["L"]),
            M=int(meta["M"]),
            h=float(meta["h"]),
            n_min=int(meta["n_min"]),
            n_max=int(meta["n_max"]),
        )
        size = int(meta["size"])
        side = meta["side"]
        direction = meta["direction"]
        variant = meta["variant"]
        delta = float(meta["delta"])
        seed = None if meta["seed"] == "none" else int(meta["seed"])
    except (KeyError, ValueError) as exc:
        raise ValueError(f"{path}: malformed header ({exc})") from None
    rows = lines[pos : pos + size]
    if len(rows) != size:
        raise ValueError(f"{path}: expected {size} matrix rows")
    matrix = np.zeros((size, size), dtype=complex)
    for i, row in enumerate(rows):
        parts = row.split()
        if len(parts) != 2 * size:
            raise ValueError(f"{path}: row {i} has {len(parts)} values, expected {2 * size}")
        vals = np.array([float(p) for p in parts])
        matrix[i] = vals[0::2] + 1j * vals[1::2]
    return NearFieldData(
        wave=wave,
        side=side,
        direction=direction,
        variant=variant,
        indices=wave.indices,
        matrix=matrix,
        noise_level=delta,
        seed=seed,
    )


def save_indicator_csv(path, imap: IndicatorMap):
    lines = ["x,y,value,cost_full,cost_q,dterm"]
    for i, x in enumerate(imap.xs):
        for j, y in enumerate(imap.ys):
            lines.append(
                ",".join(
                    _g17(v)
                    for v in (
                        x,
                        y,
                        imap.values[i, j],
                        imap.cost_full[i, j],
                        imap.cost_q[i, j],
                        imap.dterm[i, j],
                    )
                )
            )
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_indicator_csv(path) -> IndicatorMap:
    raw = np.loadtxt(path, delimiter=",", skiprows=1)
    xs = np.unique(raw[:, 0])
    ys = np.unique(raw[:, 1])
    shape = (xs.size, ys.size)
    cols = [raw[:, c].reshape(shape) for c in range(2, 6)]
    return IndicatorMap(xs, ys, *cols)


def save_indicator_pgm(path, imap: IndicatorMap):
    """8-bit grayscale image of the map, normalized to [min, max]."""
    values = imap.values
    lo, hi = float(values.min()), float(values.max())
    span = hi - lo if hi > lo else 1.0
    # Image rows run top-down: flip the vertical axis.
    pixels = np.rint(255 * (values.T[::-1] - lo) / span).astype(int)
    lines = ["P2", f"{pixels.shape[1]} {pixels.shape[0]}", "255"]
    lines.extend(" ".join(str(v) for v in row) for row in pixels)
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_manifest(path, payload: dict):
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")
