"""Spectral volume-integral solver for the ML-periodic scattering problem.

The scattered field satisfies the fixed-point (Lippmann-Schwinger) relation

    w = div int G (q (grad w + f1)) + k^2 int G (p (w + f2))

which is discretized on a uniform grid: transverse FFT diagonalizes the
ML-periodic convolution into Rayleigh modes; per mode the vertical convolution
with ``(i/(2*beta)) * exp(i*beta*|y - y'|)`` is evaluated exactly over grid
cells assuming a piecewise-constant source (midpoint-exponential rule).  The
kernel singularity is never touched pointwise.  The resulting linear system on
the contrast support is solved by restarted GMRES.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft
import scipy.sparse.linalg as spla

from .geometry import MediaConfig, WaveParams, sample_contrasts
from .kernels import RayleighSeq

__all__ = [
    "GridField",
    "SourcePair",
    "SolverGrid",
    "SolverError",
    "volume_potential",
    "solve_scattering",
    "rayleigh_extract",
    "propagating_indices",
    "energy_balance",
    "incident_source",
]


class SolverError(RuntimeError):
    """Krylov iteration failed to reach the requested residual."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = [] if residuals is None else list(residuals)


@dataclass(frozen=True)
class GridField:
    """Complex samples on the uniform grid over the truncated cell.

    Transverse samples sit at cell midpoints (periodic wrap-around); vertical
    samples are the ``ny`` nodes from ``-h`` to ``+h`` inclusive.  ``data``
    has shape ``(nx, ny)`` for scalar fields or ``(nx, ny, 2)`` for vector
    fields.
    """

    params: WaveParams
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        if data.ndim not in (2, 3) or (data.ndim == 3 and data.shape[2] != 2):
            raise ValueError("data must have shape (nx, ny) or (nx, ny, 2)")
        if data.shape[0] % self.params.M != 0:
            raise ValueError("nx must be divisible by M")
        object.__setattr__(self, "data", data)

    @property
    def nx(self) -> int:
        return self.data.shape[0]

    @property
    def ny(self) -> int:
        return self.data.shape[1]

    @property
    def x(self) -> np.ndarray:
        p = self.params
        dx = p.cell_width / self.nx
        return p.x_min + (np.arange(self.nx) + 0.5) * dx

    @property
    def y(self) -> np.ndarray:
        return np.linspace(-self.params.h, self.params.h, self.ny)


@dataclass(frozen=True)
class SourcePair:
    """Volumetric sources: a complex 2-vector field f1 and a scalar field f2."""

    f1: np.ndarray  # (nx, ny, 2)
    f2: np.ndarray  # (nx, ny)

    def __post_init__(self):
        f1 = np.asarray(self.f1, dtype=complex)
        f2 = np.asarray(self.f2, dtype=complex)
        if f1.shape != f2.shape + (2,):
            raise ValueError("f1 must have shape f2.shape + (2,)")
        object.__setattr__(self, "f1", f1)
        object.__setattr__(self, "f2", f2)


def _cell_integrals(beta, t, half):
    """Exact integrals J, J', J'' of exp(i*beta*|t - s|) over s in [-half, half].

    ``beta`` has shape (nm, 1) and ``t`` shape (1, nt); results broadcast.
    The returned values omit the i/(2*beta) kernel prefactor.
    """
    ib = 1j * beta
    above = t >= half
    below = t <= -half
    inside = ~(above | below)
    ea = np.exp(ib * (t + half))  # exp(i b (t - a)), a = -half
    eb = np.exp(ib * (t - half))  # exp(i b (t - b)), b = +half
    j0 = np.where(above, (ea - eb) / ib, 0.0 + 0.0j)
    j1 = np.where(above, ea - eb, 0.0 + 0.0j)
    j2 = np.where(above, ib * (ea - eb), 0.0 + 0.0j)
    eam = np.exp(-ib * (t + half))  # exp(i b (a - t))
    ebm = np.exp(-ib * (t - half))  # exp(i b (b - t))
    j0 = np.where(below, (ebm - eam) / ib, j0)
    j1 = np.where(below, -(ebm - eam), j1)
    j2 = np.where(below, ib * (ebm - eam), j2)
    # Inside the cell the kernel kink is integrated analytically.
    j0 = np.where(inside, (ea + ebm - 2.0) / ib, j0)
    j1 = np.where(inside, ea - ebm, j1)
    j2 = np.where(inside, ib * (ea + ebm), j2)
    return j0, j1, j2


class SolverGrid:
    """Precomputed spectral machinery for one (params, nx, ny) discretization."""

    def __init__(self, params: WaveParams, nx: int, ny: int):
        if nx % params.M != 0:
            raise ValueError("nx must be divisible by M")
        if ny < 8:
            raise ValueError("ny too small")
        self.params = params
        self.nx = nx
        self.ny = ny
        self.dx = params.cell_width / nx
        self.dy = 2.0 * params.h / (ny - 1)
        self.x = params.x_min + (np.arange(nx) + 0.5) * self.dx
        self.y = np.linspace(-params.h, params.h, ny)
        self.modes = np.fft.fftfreq(nx, d=1.0 / nx).astype(int)
        self.alpha = params.alpha(self.modes)
        self.beta = params.beta(self.modes)
        if np.any(np.abs(self.beta) ** 2 <= params.eps_cutoff_rel * params.k**2):
            raise ValueError("grid mode at cutoff; adjust nx, k or L")
        # Phase aligning the FFT with Fourier coefficients on x = x0 + i*dx.
        self._phase = np.exp(-1j * self.alpha * self.x[0])

        # Vertical convolution kernels K, K', K'' as Toeplitz tables over the
        # node offsets m = -(ny-1) .. ny-1, stored as FFTs for fast apply.
        offsets = np.arange(-(ny - 1), ny) * self.dy
        j0, j1, j2 = _cell_integrals(self.beta[:, None], offsets[None, :], self.dy / 2)
        pref = 1j / (2.0 * self.beta[:, None])
        self._nfft = sfft.next_fast_len(3 * ny - 2)
        self._kf0 = sfft.fft(pref * j0, self._nfft, axis=1)
        self._kf1 = sfft.fft(pref * j1, self._nfft, axis=1)
        self._kf2 = sfft.fft(pref * j2, self._nfft, axis=1)

    def meshgrid(self):
        return np.meshgrid(self.x, self.y, indexing="ij")

    def cell_area(self) -> float:
        return self.dx * self.dy

    def to_modes(self, g: np.ndarray) -> np.ndarray:
        """Fourier coefficients along the transverse axis."""
        return sfft.fft(g, axis=0) * self._phase[:, None] / self.nx

    def from_modes(self, gh: np.ndarray) -> np.ndarray:
        return sfft.ifft(gh / self._phase[:, None], axis=0) * self.nx

    def _vconv(self, gh_fft: np.ndarray, kf: np.ndarray) -> np.ndarray:
        out = sfft.ifft(gh_fft * kf, axis=1)
        return out[:, self.ny - 1 : 2 * self.ny - 1]

    def potential_modes(self, g1x, g1y, g2):
        """Mode-space potential (V, Vx, Vy) of physical-space sources.

        V = div(vector potential of g1) + k^2 (scalar potential of g2); the
        divergence and gradient act analytically per mode (i*alpha transverse,
        exact kernel derivatives vertically).
        """
        k2 = self.params.k**2
        ia = 1j * self.alpha[:, None]
        g1xh = sfft.fft(self.to_modes(g1x), self._nfft, axis=1)
        g1yh = sfft.fft(self.to_modes(g1y), self._nfft, axis=1)
        g2h = sfft.fft(self.to_modes(g2), self._nfft, axis=1)
        pot_x = self._vconv(g1xh, self._kf0)
        vh = ia * pot_x + self._vconv(g1yh, self._kf1) + k2 * self._vconv(g2h, self._kf0)
        vyh = (
            ia * self._vconv(g1xh, self._kf1)
            + self._vconv(g1yh, self._kf2)
            + k2 * self._vconv(g2h, self._kf1)
        )
        return vh, ia * vh, vyh

    def potential(self, g1x, g1y, g2):
        vh, vxh, vyh = self.potential_modes(g1x, g1y, g2)
        return self.from_modes(vh), self.from_modes(vxh), self.from_modes(vyh)


def volume_potential(
    grid: SolverGrid,
    src: SourcePair,
    cfg: MediaConfig | None = None,
    variant: str = "perturbed",
    contrasts_applied: bool = False,
):
    """Volume potential of a source pair, optionally contrast-weighted.

    With ``contrasts_applied`` the sources are multiplied pointwise by the
    contrasts (``q . f1``, ``p * f2``) of ``cfg`` before radiating.  Returns
    ``(value, gradient)`` as GridFields.
    """
    f1, f2 = src.f1, src.f2
    if contrasts_applied:
        if cfg is None:
            raise ValueError("cfg required when applying contrasts")
        xg, yg = grid.meshgrid()
        q, p, _ = sample_contrasts(cfg, xg, yg, variant)
        f1 = np.einsum("xyij,xyj->xyi", q, f1)
        f2 = p * f2
    v, vx, vy = grid.potential(f1[..., 0], f1[..., 1], f2)
    return (
        GridField(grid.params, v),
        GridField(grid.params, np.stack([vx, vy], axis=-1)),
    )


def incident_source(grid: SolverGrid, j: int, direction: str) -> SourcePair:
    """Incident-wave source pair ``(grad u_inc, u_inc)`` on the grid."""
    from .kernels import incident_wave

    xg, yg = grid.meshgrid()
    value, (gx, gy) = incident_wave(grid.params, j, direction, xg, yg)
    return SourcePair(np.stack([gx, gy], axis=-1), value)


@dataclass(frozen=True)
class ScatterSolution:
    """Scattered field, its gradient and the Krylov convergence history."""

    field: GridField
    gradient: GridField
    residuals: tuple = ()


def solve_scattering(
    cfg: MediaConfig,
    variant: str,
    rhs: SourcePair,
    grid: SolverGrid,
    tol: float = 1e-8,
    max_iter: int = 2000,
) -> ScatterSolution:
    """Solve the volume-integral scattering problem for one source pair.

    The unknowns are ``(w, grad w)`` restricted to the contrast support; the
    full-grid field and gradient are reconstructed by one final potential
    application.
    """
    xg, yg = grid.meshgrid()
    q, p, support = sample_contrasts(cfg, xg, yg, variant)
    nx, ny = grid.nx, grid.ny
    if not np.any(support):
        zero = np.zeros((nx, ny), dtype=complex)
        return ScatterSolution(
            GridField(cfg.wave, zero),
            GridField(cfg.wave, np.zeros((nx, ny, 2), dtype=complex)),
        )

    idx = np.flatnonzero(support.ravel())
    nsup = idx.size
    qs = q.reshape(-1, 2, 2)[idx]
    ps = p.ravel()[idx]

    def weigh(w_s, g_s):
        """Contrast-weighted sources on the support, scattered to the grid."""
        g1 = np.zeros((nx * ny, 2), dtype=complex)
        g2 = np.zeros(nx * ny, dtype=complex)
        g1[idx] = np.einsum("sij,sj->si", qs, g_s)
        g2[idx] = ps * w_s
        return g1.reshape(nx, ny, 2), g2.reshape(nx, ny)

    def potential_on_support(g1, g2):
        v, vx, vy = grid.potential(g1[..., 0], g1[..., 1], g2)
        return v.ravel()[idx], np.stack([vx.ravel()[idx], vy.ravel()[idx]], axis=-1)

    def unpack(u):
        return u[:nsup], u[nsup:].reshape(nsup, 2)

    def matvec(u):
        w_s, g_s = unpack(u)
        g1, g2 = weigh(w_s, g_s)
        v_s, dv_s = potential_on_support(g1, g2)
        return u - np.concatenate([v_s, dv_s.ravel()])

    f1_s = rhs.f1.reshape(-1, 2)[idx]
    f2_s = rhs.f2.ravel()[idx]
    b1, b2 = weigh(f2_s, f1_s)
    bv, bg = potential_on_support(b1, b2)
    b = np.concatenate([bv, bg.ravel()])

    op = spla.LinearOperator((3 * nsup, 3 * nsup), matvec=matvec, dtype=complex)
    residuals = []
    bnorm = np.linalg.norm(b)

    def callback(res):
        residuals.append(float(res))

    restart = min(300, max(1, max_iter))
    sol, info = spla.gmres(
        op,
        b,
        rtol=tol,
        atol=0.0,
        restart=restart,
        maxiter=max(1, -(-max_iter // restart)),
        callback=callback,
        callback_type="pr_norm",
    )
    if info != 0:
        raise SolverError(
            f"GMRES failed to converge to {tol:g} within {max_iter} iterations "
            f"(last residual {residuals[-1] if residuals else float('nan'):.3e})",
            residuals,
        )

    w_s, g_s = unpack(sol)
    g1, g2 = weigh(w_s + f2_s, g_s + f1_s)
    v, vx, vy = grid.potential(g1[..., 0], g1[..., 1], g2)
    return ScatterSolution(
        GridField(cfg.wave, v),
        GridField(cfg.wave, np.stack([vx, vy], axis=-1)),
        tuple(residuals),
    )


def rayleigh_extract(
    params: WaveParams, field: GridField, side: str, indices=None
) -> RayleighSeq:
    """Rayleigh coefficients of the field trace at ``y = +h`` or ``y = -h``.

    The discrete transverse Fourier transform of the trace row is exact for
    traces band-limited to the grid modes.  ``indices`` defaults to the
    truncated measurement set; pass a wider set (e.g. every propagating mode)
    for energy accounting.
    """
    if side == "+":
        trace = field.data[:, -1]
    elif side == "-":
        trace = field.data[:, 0]
    else:
        raise ValueError("side must be '+' or '-'")
    x = field.x
    indices = params.indices if indices is None else np.asarray(indices, dtype=int)
    alpha = params.alpha(indices)
    basis = np.exp(-1j * np.outer(alpha, x))
    coeffs = basis @ trace / field.nx
    return RayleighSeq(side, indices, coeffs)


def propagating_indices(params: WaveParams) -> np.ndarray:
    """All mode indices with real vertical wavenumber (|alpha(j)| < k)."""
    jmax = int(np.floor(params.k * params.cell_width / (2.0 * np.pi)))
    j = np.arange(-jmax, jmax + 1)
    return j[params.beta(j).imag == 0]


def energy_balance(
    params: WaveParams,
    incident_j: int,
    direction: str,
    us_top: RayleighSeq,
    us_bottom: RayleighSeq,
) -> float:
    """Relative propagating-flux imbalance for one incident wave.

    Valid for lossless media only.  The specular Rayleigh coefficient of the
    incident wave (referenced to the trace height it crosses) is added to the
    scattered ones before the flux is evaluated; the flux of mode ``l`` with
    coefficient ``c`` is ``beta(l) |c|^2``.  The sequences must cover every
    propagating mode (extract with ``indices=propagating_indices(params)``),
    otherwise outgoing flux is silently lost.
    """
    if us_top.side != "+" or us_bottom.side != "-":
        raise ValueError("expected a '+' (top) and a '-' (bottom) sequence")
    needed = propagating_indices(params)
    if not (np.isin(needed, us_top.indices).all() and np.isin(needed, us_bottom.indices).all()):
        raise ValueError(
            "sequences must contain every propagating mode for flux accounting"
        )
    beta_j = params.beta(incident_j)
    if beta_j.imag != 0:
        raise ValueError("incident mode must be propagating")
    beta_j = beta_j.real
    amp = -1j / (2.0 * beta_j)
    flux_in = beta_j * abs(amp) ** 2

    top = us_top.coeffs.copy()
    bottom = us_bottom.coeffs.copy()
    # The transmitted direction keeps the (phase-shifted) incident wave.
    spec = amp * np.exp(1j * beta_j * params.h)
    pos = np.flatnonzero(us_top.indices == incident_j)
    if pos.size == 0:
        raise ValueError("incident index outside the truncated set")
    if direction == "+":
        top[pos[0]] += spec
    else:
        bottom[pos[0]] += spec

    beta = params.beta(us_top.indices)
    prop = beta.imag == 0
    flux_out = float(
        np.sum(beta[prop].real * (np.abs(top[prop]) ** 2 + np.abs(bottom[prop]) ** 2))
    )
    return abs(flux_in - flux_out) / flux_in
