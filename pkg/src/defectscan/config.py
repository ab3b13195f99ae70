"""TOML configuration files describing a full simulation/imaging run.

Schema (all lengths in the same unit, angular wavenumber ``k`` in 1/length)::

    [wave]                      # required
    k = 3.5                     # wavenumber, > 0
    L = 5.6                     # period length, > 0
    M = 3                       # number of periods in the truncated cell
    h = 2.7                     # half-height of the slab
    n_min = 5                   # mode truncation: indices in [-n_min, n_max]
    n_max = 5

    [solver]                    # optional, defaults shown
    nx = 255                    # transverse samples (multiple of M)
    ny = 256                    # vertical samples
    tol = 1e-8
    max_iter = 2000

    [imaging]                   # optional
    q = 1                       # Floquet mode used by the differential indicator
    alpha0 = 1e-4
    alpha_rule = "scaled"       # or "fixed"
    delta = 0.01                # noise level
    seed = 7
    sampling_spacing = 0.09     # optional, default lambda/20

    [[background]]              # repeated; components of one period cell
    shape = "disc"              # or "rectangle"
    center = [0.0, 0.5]
    radius = 0.5                # disc
    # extents = [w, h]          # rectangle
    mu_inv = 1.0                # scalar, [re, im], or 2x2 nested list
    n = 2.0

    [[defect]]                  # optional, repeated; lives in period cell 0
    shape = "disc"
    center = [0.0, -0.8]
    radius = 0.4
    mu_inv = 3.0                # omit to keep the background value
    n = 1.0                     # omit to keep the background value
    # mu_inv_overlap / n_overlap: values used where the defect overlaps a
    # background component (defaults to mu_inv / n)

Complex numbers are written as two-element ``[re, im]`` lists.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .geometry import DefectEntry, MediaConfig, Region, WaveParams
from .imaging import GlsmOptions

__all__ = ["ConfigError", "SolverOptions", "LoadedConfig", "load_config", "parse_config"]


class ConfigError(ValueError):
    """Invalid configuration file; the message names the offending field."""


@dataclass(frozen=True)
class SolverOptions:
    nx: int = 255
    ny: int = 256
    tol: float = 1e-8
    max_iter: int = 2000


@dataclass(frozen=True)
class LoadedConfig:
    media: MediaConfig
    solver: SolverOptions
    imaging: GlsmOptions
    seed: int
    text: str  # raw file contents, hashed into manifests


def _require(table: dict, key: str, path: str):
    if key not in table:
        raise ConfigError(f"{path}.{key}: missing required field")
    return table[key]


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    return float(value)


def _complex(value, path: str) -> complex:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return complex(value)
    if isinstance(value, list) and len(value) == 2:
        return complex(_number(value[0], path), _number(value[1], path))
    raise ConfigError(f"{path}: expected a number or [re, im] pair")


def _mu_inv(value, path: str):
    if isinstance(value, list) and len(value) == 2 and isinstance(value[0], list):
        try:
            return np.array(
                [[_complex(v, path) for v in row] for row in value], dtype=complex
            )
        except (TypeError, ConfigError):
            raise ConfigError(f"{path}: expected a 2x2 matrix of numbers") from None
    return _complex(value, path)


def _region(table: dict, path: str) -> Region:
    shape = _require(table, "shape", path)
    center = _require(table, "center", path)
    if not (isinstance(center, list) and len(center) == 2):
        raise ConfigError(f"{path}.center: expected [x, y]")
    cx, cy = (_number(v, f"{path}.center") for v in center)
    try:
        if shape == "disc":
            return Region.disc((cx, cy), _number(_require(table, "radius", path), f"{path}.radius"))
        if shape == "rectangle":
            extents = _require(table, "extents", path)
            if not (isinstance(extents, list) and len(extents) == 2):
                raise ConfigError(f"{path}.extents: expected [width, height]")
            return Region.rectangle(
                (cx, cy), tuple(_number(v, f"{path}.extents") for v in extents)
            )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    raise ConfigError(f"{path}.shape: unknown shape {shape!r}")


def parse_config(text: str) -> LoadedConfig:
    """Parse and validate a configuration document."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config syntax error: {exc}") from None

    wave_tbl = doc.get("wave")
    if not isinstance(wave_tbl, dict):
        raise ConfigError("wave: missing required section")
    try:
        wave = WaveParams(
            k=_number(_require(wave_tbl, "k", "wave"), "wave.k"),
            L=_number(_require(wave_tbl, "L", "wave"), "wave.L"),
            M=int(_require(wave_tbl, "M", "wave")),
            h=_number(_require(wave_tbl, "h", "wave"), "wave.h"),
            n_min=int(wave_tbl.get("n_min", 5)),
            n_max=int(wave_tbl.get("n_max", 5)),
        )
    except ValueError as exc:
        raise ConfigError(f"wave: {exc}") from None

    solver_tbl = doc.get("solver", {})
    solver = SolverOptions(
        nx=int(solver_tbl.get("nx", 255)),
        ny=int(solver_tbl.get("ny", 256)),
        tol=_number(solver_tbl.get("tol", 1e-8), "solver.tol"),
        max_iter=int(solver_tbl.get("max_iter", 2000)),
    )
    if solver.nx % wave.M != 0:
        raise ConfigError(f"solver.nx: {solver.nx} is not divisible by M = {wave.M}")

    imaging_tbl = doc.get("imaging", {})
    try:
        imaging = GlsmOptions(
            alpha0=_number(imaging_tbl.get("alpha0", 1e-4), "imaging.alpha0"),
            alpha_rule=str(imaging_tbl.get("alpha_rule", "scaled")),
            delta=_number(imaging_tbl.get("delta", 0.01), "imaging.delta"),
            q=int(imaging_tbl.get("q", 1)),
            sampling_spacing=(
                _number(imaging_tbl["sampling_spacing"], "imaging.sampling_spacing")
                if "sampling_spacing" in imaging_tbl
                else None
            ),
        )
    except ValueError as exc:
        raise ConfigError(f"imaging: {exc}") from None
    seed = int(imaging_tbl.get("seed", 0))

    background = []
    for i, tbl in enumerate(doc.get("background", [])):
        path = f"background[{i}]"
        region = _region(tbl, path)
        background.append(
            (
                region,
                _mu_inv(tbl.get("mu_inv", 1.0), f"{path}.mu_inv"),
                _complex(tbl.get("n", 1.0), f"{path}.n"),
            )
        )

    defects = []
    for i, tbl in enumerate(doc.get("defect", [])):
        path = f"defect[{i}]"
        defects.append(
            DefectEntry(
                region=_region(tbl, path),
                mu_inv=_mu_inv(tbl["mu_inv"], f"{path}.mu_inv") if "mu_inv" in tbl else None,
                n=_complex(tbl["n"], f"{path}.n") if "n" in tbl else None,
                mu_inv_overlap=(
                    _mu_inv(tbl["mu_inv_overlap"], f"{path}.mu_inv_overlap")
                    if "mu_inv_overlap" in tbl
                    else None
                ),
                n_overlap=(
                    _complex(tbl["n_overlap"], f"{path}.n_overlap")
                    if "n_overlap" in tbl
                    else None
                ),
            )
        )

    try:
        media = MediaConfig(
            wave=wave,
            background_cells=tuple(background),
            defects=tuple(defects),
            q_mode=imaging.q,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return LoadedConfig(media=media, solver=solver, imaging=imaging, seed=seed, text=text)


def load_config(path) -> LoadedConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)
