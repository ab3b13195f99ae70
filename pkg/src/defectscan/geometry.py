"""Geometry and material description of a locally perturbed periodic layer.

The background is an L-periodic arrangement of penetrable components
(anisotropic ``mu_inv`` and refractive index ``n``) confined to the slab
``|x_d| < h``.  A local defect may override the material inside one period
cell.  Everything is 2D: points are ``(x, y)`` with ``x`` the transverse
(periodic) coordinate and ``y`` the vertical one.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "WaveParams",
    "ModeIndex",
    "Region",
    "DefectEntry",
    "MediaConfig",
    "DerivedRegions",
    "eval_media",
    "sample_media",
    "sample_contrasts",
    "derived_regions",
]

#: Number of unit directions used to spot-check matrix passivity constraints.
_PASSIVITY_DIRECTIONS = 16

_IDENTITY = np.eye(2, dtype=complex)


@dataclass(frozen=True)
class WaveParams:
    """Wavenumber, periodicity and mode truncation of the layer problem.

    ``k`` is the free-space wavenumber, ``L`` the background period, ``M``
    the number of periods in the computational cell (so the full transverse
    period is ``M*L``) and ``h`` the half-height of the slab containing all
    inhomogeneities.  Measured/incident plane-wave modes are indexed by
    integers in ``[-n_min, n_max]``.
    """

    k: float
    L: float
    M: int
    h: float
    n_min: int = 5
    n_max: int = 5
    eps_cutoff_rel: float = 1e-10

    def __post_init__(self):
        if not (self.k > 0 and self.L > 0 and self.h > 0):
            raise ValueError("k, L and h must be positive")
        if self.M < 1:
            raise ValueError("M must be a positive integer")
        if self.n_min < 0 or self.n_max < 0:
            raise ValueError("mode truncation bounds must be non-negative")
        # Reject configurations with a mode at (or numerically near) cutoff:
        # every 1/beta below would degenerate.  Check a generous index range
        # covering both the data truncation and the default kernel truncation.
        n_check = max(self.n_min, self.n_max, 512)
        j = np.arange(-n_check, n_check + 1)
        alpha = 2.0 * np.pi * j / (self.M * self.L)
        gap = np.abs(self.k**2 - alpha**2)
        if np.any(gap <= self.eps_cutoff_rel * self.k**2):
            bad = j[gap <= self.eps_cutoff_rel * self.k**2]
            raise ValueError(
                f"mode(s) {bad.tolist()} are at cutoff (beta ~ 0); "
                "perturb k or L to avoid the degeneracy"
            )

    @property
    def wavelength(self) -> float:
        return 2.0 * np.pi / self.k

    @property
    def cell_width(self) -> float:
        """Width ``M*L`` of the truncated transverse cell."""
        return self.M * self.L

    @property
    def x_min(self) -> float:
        return (math.floor(-self.M / 2) + 0.5) * self.L

    @property
    def x_max(self) -> float:
        return (math.floor(self.M / 2) + 0.5) * self.L

    @property
    def cell_offsets(self) -> np.ndarray:
        """Integer shifts m with cell m spanning ``[-L/2, L/2] + m L``."""
        return np.arange(math.floor(-self.M / 2) + 1, math.floor(self.M / 2) + 1)

    @property
    def indices(self) -> np.ndarray:
        """The truncated measurement/incidence index set."""
        return np.arange(-self.n_min, self.n_max + 1)

    def alpha(self, j):
        return 2.0 * np.pi * np.asarray(j) / (self.M * self.L)

    def beta(self, j):
        """Vertical wavenumber with ``Im(beta) >= 0``."""
        a = self.alpha(j)
        return np.sqrt(np.asarray(self.k**2 - a**2, dtype=complex))

    def mode(self, j: int) -> "ModeIndex":
        return ModeIndex(j=j, alpha=float(self.alpha(j)), beta=complex(self.beta(j)))


@dataclass(frozen=True)
class ModeIndex:
    """One Rayleigh mode: index, transverse and vertical wavenumbers."""

    j: int
    alpha: float
    beta: complex


@dataclass(frozen=True)
class Region:
    """Disc / axis-aligned rectangle / union region with strict-interior membership."""

    kind: str
    center: tuple = (0.0, 0.0)
    radius: float = 0.0
    extents: tuple = (0.0, 0.0)
    children: tuple = ()

    @staticmethod
    def disc(center, radius) -> "Region":
        if radius <= 0:
            raise ValueError("disc radius must be positive")
        return Region(kind="disc", center=tuple(center), radius=float(radius))

    @staticmethod
    def rectangle(center, extents) -> "Region":
        if extents[0] <= 0 or extents[1] <= 0:
            raise ValueError("rectangle extents must be positive")
        return Region(kind="rectangle", center=tuple(center), extents=tuple(extents))

    @staticmethod
    def union(regions) -> "Region":
        return Region(kind="union", children=tuple(regions))

    @property
    def is_empty(self) -> bool:
        return self.kind == "union" and len(self.children) == 0

    def contains(self, x, y):
        """Strict-interior membership, vectorized over coordinate arrays."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind == "disc":
            cx, cy = self.center
            return (x - cx) ** 2 + (y - cy) ** 2 < self.radius**2
        if self.kind == "rectangle":
            cx, cy = self.center
            wx, wy = self.extents
            return (np.abs(x - cx) < wx / 2) & (np.abs(y - cy) < wy / 2)
        out = np.zeros(np.broadcast(x, y).shape, dtype=bool)
        for child in self.children:
            out |= child.contains(x, y)
        return out

    def bounding_box(self):
        """(xmin, xmax, ymin, ymax) containing every member point."""
        if self.kind == "disc":
            cx, cy = self.center
            r = self.radius
            return (cx - r, cx + r, cy - r, cy + r)
        if self.kind == "rectangle":
            cx, cy = self.center
            wx, wy = self.extents
            return (cx - wx / 2, cx + wx / 2, cy - wy / 2, cy + wy / 2)
        if not self.children:
            return (0.0, 0.0, 0.0, 0.0)
        boxes = [c.bounding_box() for c in self.children]
        return (
            min(b[0] for b in boxes),
            max(b[1] for b in boxes),
            min(b[2] for b in boxes),
            max(b[3] for b in boxes),
        )

    def shifted(self, dx: float) -> "Region":
        """Copy of the region translated horizontally by ``dx``."""
        if self.kind == "union":
            return Region.union(tuple(c.shifted(dx) for c in self.children))
        cx, cy = self.center
        return Region(
            kind=self.kind,
            center=(cx + dx, cy),
            radius=self.radius,
            extents=self.extents,
        )


def _as_mu_inv(value) -> np.ndarray:
    """Coerce a scalar or 2x2 array-like into a complex symmetric 2x2 matrix."""
    arr = np.asarray(value, dtype=complex)
    if arr.shape == ():
        arr = arr * np.eye(2)
    if arr.shape != (2, 2):
        raise ValueError("mu_inv must be a scalar or a 2x2 matrix")
    if not np.allclose(arr, arr.T):
        raise ValueError("mu_inv must be symmetric")
    return arr


def _check_material(mu_inv: np.ndarray, n: complex, where: str):
    """Spot-check passivity constraints on a fan of unit directions."""
    theta = np.linspace(0, np.pi, _PASSIVITY_DIRECTIONS, endpoint=False)
    xi = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    quad = np.einsum("di,ij,dj->d", xi.conj(), mu_inv, xi)
    if np.any(quad.real <= 0):
        raise ValueError(f"{where}: Re(xi.mu_inv.xi) must be positive")
    if np.any(quad.imag > 1e-14):
        raise ValueError(f"{where}: Im(xi.mu_inv.xi) must be <= 0")
    if not (np.real(n) > 0):
        raise ValueError(f"{where}: Re(n) must be positive")
    if np.imag(n) < 0:
        raise ValueError(f"{where}: Im(n) must be >= 0")


@dataclass(frozen=True)
class DefectEntry:
    """Material override inside the defect region (period cell 0 only).

    ``mu_inv``/``n`` set to None keep the background value.  The optional
    ``*_overlap`` values apply instead wherever the point also lies inside a
    background component, which lets the defect carry different material in
    and out of the background structure.
    """

    region: Region
    mu_inv: np.ndarray | None = None
    n: complex | None = None
    mu_inv_overlap: np.ndarray | None = None
    n_overlap: complex | None = None


@dataclass(frozen=True)
class MediaConfig:
    """Complete description of the perturbed periodic layer."""

    wave: WaveParams
    background_cells: tuple = ()  # of (Region, mu_inv 2x2 complex, n complex)
    defects: tuple = ()  # of DefectEntry
    q_mode: int = 1

    def __post_init__(self):
        lam = self.wave.wavelength
        half_l = self.wave.L / 2
        cells = []
        for i, (region, mu_inv, n) in enumerate(self.background_cells):
            mu_inv = _as_mu_inv(mu_inv)
            n = complex(n)
            _check_material(mu_inv, n, f"background[{i}]")
            _check_inside_cell(region, half_l, self.wave.h, lam, f"background[{i}]")
            cells.append((region, mu_inv, n))
        object.__setattr__(self, "background_cells", tuple(cells))
        entries = []
        for i, entry in enumerate(self.defects):
            if entry.mu_inv is not None:
                mu = _as_mu_inv(entry.mu_inv)
                _check_material(mu, entry.n if entry.n is not None else 1.0, f"defect[{i}]")
                entry = DefectEntry(
                    region=entry.region,
                    mu_inv=mu,
                    n=None if entry.n is None else complex(entry.n),
                    mu_inv_overlap=None
                    if entry.mu_inv_overlap is None
                    else _as_mu_inv(entry.mu_inv_overlap),
                    n_overlap=None
                    if entry.n_overlap is None
                    else complex(entry.n_overlap),
                )
            _check_inside_cell(entry.region, half_l, self.wave.h, lam, f"defect[{i}]")
            entries.append(entry)
        object.__setattr__(self, "defects", tuple(entries))
        if not (0 <= self.q_mode % self.wave.M < self.wave.M):
            raise ValueError("q_mode must be an integer (reduced modulo M)")

    @property
    def defect_region(self) -> Region:
        """The perturbation support (union of all defect entries)."""
        return Region.union(tuple(e.region for e in self.defects))

    @property
    def background_region_cell0(self) -> Region:
        return Region.union(tuple(r for r, _, _ in self.background_cells))

    def has_defect(self) -> bool:
        return len(self.defects) > 0

    def is_lossless(self) -> bool:
        for _, mu_inv, n in self.background_cells:
            if np.any(np.abs(mu_inv.imag) > 0) or n.imag != 0:
                return False
        for e in self.defects:
            for v in (e.mu_inv, e.mu_inv_overlap):
                if v is not None and np.any(np.abs(np.asarray(v).imag) > 0):
                    return False
            for v in (e.n, e.n_overlap):
                if v is not None and complex(v).imag != 0:
                    return False
        return True


def _check_inside_cell(region: Region, half_l: float, h: float, lam: float, where: str):
    if region.is_empty:
        return
    xmin, xmax, ymin, ymax = region.bounding_box()
    if not (-half_l < xmin and xmax < half_l and -h < ymin and ymax < h):
        raise ValueError(
            f"{where}: region must lie strictly inside one period cell "
            f"(|x| < {half_l}) and inside the slab (|y| < {h})"
        )
    clearance = min(xmin + half_l, half_l - xmax, ymin + h, h - ymax)
    if clearance < lam / 10:
        warnings.warn(
            f"{where}: clearance {clearance:.3g} to the cell boundary is below "
            f"lambda/10 = {lam / 10:.3g}",
            stacklevel=3,
        )


def _wrap(x, lo, width):
    return lo + np.mod(np.asarray(x, dtype=float) - lo, width)


def sample_media(cfg: MediaConfig, x, y, variant: str = "perturbed"):
    """Material fields at points ``(x, y)``.

    Returns ``(mu_inv, n)`` with shapes ``x.shape + (2, 2)`` and ``x.shape``.
    The periodic variant ignores the defect and wraps by L; the perturbed
    variant wraps by M*L and applies the defect override in cell 0.
    """
    if variant not in ("perturbed", "periodic"):
        raise ValueError(f"unknown variant {variant!r}")
    wave = cfg.wave
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    shape = np.broadcast(x, y).shape
    x = np.broadcast_to(x, shape)
    y = np.broadcast_to(y, shape)

    # Reduce to the reference period cell [-L/2, L/2) for the background.
    x_cell = _wrap(x, -wave.L / 2, wave.L)
    mu = np.broadcast_to(_IDENTITY, shape + (2, 2)).copy()
    n = np.ones(shape, dtype=complex)
    in_background = np.zeros(shape, dtype=bool)
    for region, mu_inv, n_val in cfg.background_cells:
        inside = region.contains(x_cell, y)
        mu[inside] = mu_inv
        n[inside] = n_val
        in_background |= inside

    if variant == "perturbed" and cfg.defects:
        # The defect lives in cell m = 0 of the ML-periodic domain.
        x_big = _wrap(x, wave.x_min, wave.cell_width)
        in_cell0 = np.abs(x_big) < wave.L / 2
        for entry in cfg.defects:
            inside = entry.region.contains(x_big, y) & in_cell0
            plain = inside & ~in_background
            overlap = inside & in_background
            if entry.mu_inv is not None:
                mu[plain] = entry.mu_inv
            if entry.n is not None:
                n[plain] = entry.n
            mu_o = entry.mu_inv_overlap if entry.mu_inv_overlap is not None else entry.mu_inv
            n_o = entry.n_overlap if entry.n_overlap is not None else entry.n
            if mu_o is not None:
                mu[overlap] = mu_o
            if n_o is not None:
                n[overlap] = n_o
    return mu, n


def eval_media(cfg: MediaConfig, point, variant: str = "perturbed"):
    """Material coefficients at a single point: ``(mu_inv 2x2, n)``."""
    mu, n = sample_media(cfg, point[0], point[1], variant)
    return mu, complex(n)


def sample_contrasts(cfg: MediaConfig, x, y, variant: str = "perturbed"):
    """Contrast fields ``q = mu_inv - I`` and ``p = n - 1`` plus a support mask."""
    mu, n = sample_media(cfg, x, y, variant)
    q = mu - _IDENTITY
    p = n - 1.0
    support = (np.abs(q).sum(axis=(-2, -1)) > 0) | (np.abs(p) > 0)
    return q, p, support


@dataclass(frozen=True)
class DerivedRegions:
    """Component decomposition induced by the defect placement.

    ``touched`` collects the background components of cell 0 meeting the
    defect, ``untouched`` the rest, ``combined`` their union with the defect
    itself, and ``periodic_supports`` the ML-periodic copies of the full
    per-cell contrast support.
    """

    touched: Region  # 'O': background components intersecting the defect
    untouched: Region  # 'O^c': the remaining background components
    combined: Region  # 'Lambda' = touched U defect
    periodic_supports: Region  # ML-periodic copies of (combined U untouched)


def derived_regions(cfg: MediaConfig, resolution: float | None = None) -> DerivedRegions:
    """Classify background components by intersection with the defect.

    Intersection is decided by dense sampling of the defect region's bounding
    box at the given resolution (default: lambda/100).
    """
    lam = cfg.wave.wavelength
    res = lam / 100 if resolution is None else resolution
    omega = cfg.defect_region

    touched, untouched = [], []
    if omega.is_empty:
        untouched = [r for r, _, _ in cfg.background_cells]
    else:
        xmin, xmax, ymin, ymax = omega.bounding_box()
        nx = max(2, int(np.ceil((xmax - xmin) / res)) + 1)
        ny = max(2, int(np.ceil((ymax - ymin) / res)) + 1)
        xs, ys = np.meshgrid(
            np.linspace(xmin, xmax, nx), np.linspace(ymin, ymax, ny), indexing="ij"
        )
        in_omega = omega.contains(xs, ys)
        for region, _, _ in cfg.background_cells:
            if bool(np.any(in_omega & region.contains(xs, ys))):
                touched.append(region)
            else:
                untouched.append(region)

    touched_r = Region.union(tuple(touched))
    untouched_r = Region.union(tuple(untouched))
    combined = Region.union(tuple(touched) + ((omega,) if not omega.is_empty else ()))
    hat = Region.union(tuple(touched) + tuple(untouched) + ((omega,) if not omega.is_empty else ()))
    copies = tuple(hat.shifted(m * cfg.wave.L) for m in cfg.wave.cell_offsets)
    return DerivedRegions(
        touched=touched_r,
        untouched=untouched_r,
        combined=combined,
        periodic_supports=Region.union(copies),
    )
