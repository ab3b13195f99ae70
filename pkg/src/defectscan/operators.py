"""Near-field data matrices, noise model, sharp operator and mode projections.

The data operator maps an incident-mode density to the measured Rayleigh
coefficients of the scattered field; its discrete version is the dense matrix
``N[l, j]`` of coefficients produced by one forward solve per incident mode.
The single-Floquet-mode machinery slices these matrices on a residue class
``j = q + M*l`` of the incident/measured indices.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .geometry import MediaConfig, WaveParams, sample_contrasts
from .kernels import incident_wave, reduced_indices
from .solver import (
    SolverGrid,
    SourcePair,
    incident_source,
    rayleigh_extract,
    solve_scattering,
)

__all__ = [
    "NearFieldData",
    "HerglotzDensity",
    "assemble_near_field",
    "assemble_near_field_all",
    "add_noise",
    "sharp",
    "project_embed",
    "project_restrict",
    "near_field_q",
    "herglotz_field",
    "check_factorization",
]


@dataclass(frozen=True)
class NearFieldData:
    """Measured multistatic matrix for one (incident direction, trace side).

    ``matrix[l, j]`` is the Rayleigh coefficient at measured index ``l`` of
    the scattered field generated by the incident wave of index ``j``.
    """

    wave: WaveParams
    side: str
    direction: str
    variant: str
    indices: np.ndarray
    matrix: np.ndarray
    noise_level: float = 0.0
    seed: int | None = None

    def __post_init__(self):
        if self.side not in ("+", "-") or self.direction not in ("+", "-"):
            raise ValueError("side and direction must be '+' or '-'")
        indices = np.asarray(self.indices, dtype=int)
        matrix = np.asarray(self.matrix, dtype=complex)
        n = indices.size
        if matrix.shape != (n, n):
            raise ValueError("matrix must be square over the index set")
        if self.noise_level < 0:
            raise ValueError("noise_level must be non-negative")
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "matrix", matrix)


@dataclass(frozen=True)
class HerglotzDensity:
    """Density over incident-mode indices, full or reduced to a residue class."""

    entries: np.ndarray
    kind: str = "full"  # 'full' or 'reduced'
    q: int | None = None

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=complex)
        if self.kind not in ("full", "reduced"):
            raise ValueError("kind must be 'full' or 'reduced'")
        if self.kind == "reduced" and self.q is None:
            raise ValueError("reduced densities must record their q")
        object.__setattr__(self, "entries", entries)


def _solver_workers() -> int:
    try:
        return max(1, int(os.environ.get("DEFECTSCAN_THREADS", "1")))
    except ValueError:
        return 1


def assemble_near_field_all(
    cfg: MediaConfig,
    variant: str,
    grid: SolverGrid,
    tol: float = 1e-8,
    max_iter: int = 2000,
) -> dict:
    """All four data matrices keyed by (direction, side), one pass per incident wave."""
    params = cfg.wave
    indices = params.indices
    n = indices.size
    matrices = {
        (d, s): np.zeros((n, n), dtype=complex) for d in "+-" for s in "+-"
    }

    def one_column(args):
        col, j, direction = args
        try:
            rhs = incident_source(grid, j, direction)
            sol = solve_scattering(cfg, variant, rhs, grid, tol=tol, max_iter=max_iter)
        except Exception as exc:
            raise type(exc)(f"incident mode j={j}, direction {direction}: {exc}") from exc
        return (
            col,
            direction,
            rayleigh_extract(params, sol.field, "+").coeffs,
            rayleigh_extract(params, sol.field, "-").coeffs,
        )

    jobs = [(col, int(j), d) for d in "+-" for col, j in enumerate(indices)]
    workers = _solver_workers()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one_column, jobs))
    else:
        results = [one_column(job) for job in jobs]
    for col, direction, top, bottom in results:
        matrices[(direction, "+")][:, col] = top
        matrices[(direction, "-")][:, col] = bottom
    return {
        key: NearFieldData(
            wave=params,
            side=key[1],
            direction=key[0],
            variant=variant,
            indices=indices,
            matrix=mat,
        )
        for key, mat in matrices.items()
    }


def assemble_near_field(
    cfg: MediaConfig,
    side: str,
    variant: str,
    grid: SolverGrid,
    tol: float = 1e-8,
    max_iter: int = 2000,
) -> NearFieldData:
    """Data matrix with incident direction matching the measured side."""
    return assemble_near_field_all(cfg, variant, grid, tol, max_iter)[(side, side)]


def add_noise(data: NearFieldData, delta: float, seed: int) -> NearFieldData:
    """Multiplicative uniform complex noise, reproducible from the seed.

    Each entry becomes ``N * (1 + delta * A)`` with ``Re(A)``, ``Im(A)``
    independent uniform on [-1, 1], drawn (real block first) from a PCG64
    generator, which is portable across platforms for a fixed seed.
    """
    if delta < 0:
        raise ValueError("delta must be non-negative")
    if delta == 0:
        return replace(data, noise_level=0.0, seed=int(seed))
    rng = np.random.Generator(np.random.PCG64(int(seed)))
    shape = data.matrix.shape
    a = rng.uniform(-1.0, 1.0, shape) + 1j * rng.uniform(-1.0, 1.0, shape)
    return replace(
        data,
        matrix=data.matrix * (1.0 + delta * a),
        noise_level=float(delta),
        seed=int(seed),
    )


def _abs_hermitian(m: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(m)
    return (vecs * np.abs(vals)) @ vecs.conj().T


def sharp(matrix: np.ndarray) -> np.ndarray:
    """Positively symmetrized operator ``|Re F| + |Im F|``.

    The Hermitian real/imaginary parts are diagonalized and their eigenvalues
    replaced by absolute values; the result is Hermitian PSD up to roundoff.
    """
    f = np.asarray(matrix, dtype=complex)
    if f.ndim != 2 or f.shape[0] != f.shape[1]:
        raise ValueError("sharp requires a square matrix")
    re = (f + f.conj().T) / 2.0
    im = (f - f.conj().T) / 2.0j
    return _abs_hermitian(re) + _abs_hermitian(im)


def project_embed(a: HerglotzDensity, params: WaveParams) -> HerglotzDensity:
    """Embed a reduced density into the full index set (zero off the class)."""
    if a.kind != "reduced":
        raise ValueError("project_embed expects a reduced density")
    ells, js = reduced_indices(params, a.q)
    if a.entries.size != ells.size:
        raise ValueError("reduced density has the wrong length")
    full = np.zeros(params.indices.size, dtype=complex)
    full[np.searchsorted(params.indices, js)] = a.entries
    return HerglotzDensity(full, kind="full")


def project_restrict(a: HerglotzDensity, q: int, params: WaveParams) -> HerglotzDensity:
    """Restrict a full density to the residue class ``j = q + M*l``."""
    if a.kind != "full":
        raise ValueError("project_restrict expects a full density")
    _, js = reduced_indices(params, q)
    reduced = a.entries[np.searchsorted(params.indices, js)]
    return HerglotzDensity(reduced, kind="reduced", q=q)


def near_field_q(data: NearFieldData, q: int) -> np.ndarray:
    """Single-mode data matrix: the submatrix on the residue class of q."""
    _, js = reduced_indices(data.wave, q)
    pos = np.searchsorted(data.indices, js)
    return data.matrix[np.ix_(pos, pos)]


def herglotz_field(
    cfg: MediaConfig,
    a: HerglotzDensity,
    direction: str,
    grid: SolverGrid,
    variant: str = "perturbed",
    masked: bool = True,
) -> SourcePair:
    """Superposition of incident pairs with density ``a`` on the grid.

    Reduced densities are embedded first.  With ``masked`` the pair is zeroed
    outside the contrast support.
    """
    if a.kind == "reduced":
        a = project_embed(a, cfg.wave)
    indices = cfg.wave.indices
    if a.entries.size != indices.size:
        raise ValueError("density length does not match the index set")
    xg, yg = grid.meshgrid()
    f1 = np.zeros(xg.shape + (2,), dtype=complex)
    f2 = np.zeros(xg.shape, dtype=complex)
    for weight, j in zip(a.entries, indices):
        if weight == 0:
            continue
        value, (gx, gy) = incident_wave(cfg.wave, int(j), direction, xg, yg)
        f1[..., 0] += weight * gx
        f1[..., 1] += weight * gy
        f2 += weight * value
    if masked:
        _, _, support = sample_contrasts(cfg, xg, yg, variant)
        f1 *= support[..., None]
        f2 *= support
    return SourcePair(f1, f2)


def _herglotz_adjoint(cfg: MediaConfig, phi1, phi2, direction: str, grid: SolverGrid):
    """Quadrature of the adjoint: integrate against conjugated incident pairs."""
    xg, yg = grid.meshgrid()
    area = grid.cell_area()
    out = np.zeros(cfg.wave.indices.size, dtype=complex)
    for pos, j in enumerate(cfg.wave.indices):
        value, (gx, gy) = incident_wave(cfg.wave, int(j), direction, xg, yg)
        out[pos] = area * np.sum(
            phi1[..., 0] * np.conj(gx) + phi1[..., 1] * np.conj(gy) + phi2 * np.conj(value)
        )
    return out


def check_factorization(
    cfg: MediaConfig,
    side: str,
    n_probe: int,
    grid: SolverGrid,
    tol: float = 1e-8,
    seed: int = 0,
    data: NearFieldData | None = None,
) -> dict:
    """Compare the data matrix against its middle-operator factorization.

    For random densities the matrix route ``N a`` is checked against the
    quadrature route: build the incident superposition, apply the contrast
    operator through one forward solve, integrate against conjugated incident
    pairs and radiate each measured mode with its exact modal factor
    ``exp(i*beta*h) / (M*L)``.  The same identity is verified on the residue
    class of the configured Floquet mode.
    """
    params = cfg.wave
    if data is None:
        data = assemble_near_field(cfg, side, "perturbed", grid, tol=tol)
    rng = np.random.Generator(np.random.PCG64(seed))
    n = params.indices.size
    beta = params.beta(params.indices)
    radiation = np.exp(1j * beta * params.h) / (params.M * params.L)
    q = cfg.q_mode
    _, js = reduced_indices(params, q)
    pos_q = np.searchsorted(params.indices, js)
    n_q = near_field_q(data, q)

    xg, yg = grid.meshgrid()
    qf, pf, support = sample_contrasts(cfg, xg, yg, "perturbed")
    k2 = params.k**2

    full_errs, reduced_errs = [], []
    for _ in range(n_probe):
        a = rng.normal(size=n) + 1j * rng.normal(size=n)
        lhs = data.matrix @ a
        src = herglotz_field(cfg, HerglotzDensity(a), side, grid)
        sol = solve_scattering(cfg, "perturbed", src, grid, tol=tol)
        t1 = -np.einsum("xyij,xyj->xyi", qf, src.f1 + sol.gradient.data)
        t2 = k2 * pf * (src.f2 + sol.field.data)
        t1 *= support[..., None]
        t2 *= support
        rhs = radiation * _herglotz_adjoint(cfg, t1, t2, side, grid)
        full_errs.append(np.linalg.norm(lhs - rhs) / np.linalg.norm(lhs))

        a_red = a[pos_q]
        lhs_q = n_q @ a_red
        emb = np.zeros(n, dtype=complex)
        emb[pos_q] = a_red
        src_q = herglotz_field(cfg, HerglotzDensity(emb), side, grid)
        sol_q = solve_scattering(cfg, "perturbed", src_q, grid, tol=tol)
        t1q = -np.einsum("xyij,xyj->xyi", qf, src_q.f1 + sol_q.gradient.data)
        t2q = k2 * pf * (src_q.f2 + sol_q.field.data)
        t1q *= support[..., None]
        t2q *= support
        rhs_q = (radiation * _herglotz_adjoint(cfg, t1q, t2q, side, grid))[pos_q]
        reduced_errs.append(np.linalg.norm(lhs_q - rhs_q) / np.linalg.norm(lhs_q))

    return {
        "full_max_rel": float(max(full_errs)),
        "full_rel": [float(e) for e in full_errs],
        "reduced_max_rel": float(max(reduced_errs)),
        "reduced_rel": [float(e) for e in reduced_errs],
    }
