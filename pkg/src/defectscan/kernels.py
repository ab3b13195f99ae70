"""Modal Green functions, incident plane waves and trace operators.

All kernels are evaluated through their Rayleigh (plane-wave) expansions.
With ``alpha(j) = 2*pi*j/(M*L)`` and ``beta(j) = sqrt(k^2 - alpha^2)``
(``Im(beta) >= 0``), the ML-periodic outgoing Green function is

    G(x; z) = i/(2*M*L) * sum_l exp(i*alpha(l)*(x - z) + i*beta(l)*|y - z_y|) / beta(l)

and its quasi-periodic sibling ``G_q`` keeps only the indices ``l = q + M*m``.
Both carry the same ``i/(2*M*L)`` prefactor, so summing ``G_q`` over the M
residue classes reproduces ``G`` exactly; the Rayleigh coefficients of ``G_q``
are normalized accordingly.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .geometry import WaveParams

__all__ = [
    "RayleighSeq",
    "incident_wave",
    "green_ml",
    "green_q",
    "rayleigh_of_point_source",
    "rayleigh_of_point_source_q",
    "reduced_indices",
    "dtn_apply",
]

#: Default modal truncation for pointwise kernel evaluation.
N_GREEN_DEFAULT = 200


@dataclass(frozen=True)
class RayleighSeq:
    """Finite family of Rayleigh coefficients on one side of the layer.

    ``side`` is '+' (trace at ``y = +h``) or '-' (trace at ``y = -h``);
    ``indices`` is the truncated integer index set and ``coeffs`` the matching
    complex values.
    """

    side: str
    indices: np.ndarray
    coeffs: np.ndarray

    def __post_init__(self):
        if self.side not in ("+", "-"):
            raise ValueError("side must be '+' or '-'")
        indices = np.asarray(self.indices, dtype=int)
        coeffs = np.asarray(self.coeffs, dtype=complex)
        if indices.shape != coeffs.shape:
            raise ValueError("indices and coeffs must have matching shapes")
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "coeffs", coeffs)

    def _compatible(self, other: "RayleighSeq"):
        if self.side != other.side or not np.array_equal(self.indices, other.indices):
            raise ValueError("Rayleigh sequences are not index-compatible")

    def __add__(self, other: "RayleighSeq") -> "RayleighSeq":
        self._compatible(other)
        return RayleighSeq(self.side, self.indices, self.coeffs + other.coeffs)

    def __sub__(self, other: "RayleighSeq") -> "RayleighSeq":
        self._compatible(other)
        return RayleighSeq(self.side, self.indices, self.coeffs - other.coeffs)

    def scale(self, c: complex) -> "RayleighSeq":
        return RayleighSeq(self.side, self.indices, c * self.coeffs)

    def inner(self, other: "RayleighSeq") -> complex:
        """l2 inner product, conjugate-linear in ``other``."""
        self._compatible(other)
        return complex(np.sum(self.coeffs * np.conj(other.coeffs)))

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))


def _sign(direction: str) -> float:
    if direction == "+":
        return 1.0
    if direction == "-":
        return -1.0
    raise ValueError("direction must be '+' or '-'")


def incident_wave(params: WaveParams, j: int, direction: str, x, y):
    """Scaled incident plane wave of mode ``j`` and its gradient.

    Direction '+' travels upward (down-to-up), '-' downward.  Returns
    ``(value, (d/dx, d/dy))``; all outputs broadcast over ``x``/``y``.
    """
    s = _sign(direction)
    alpha = params.alpha(j)
    beta_c = np.conj(params.beta(j))
    if beta_c == 0:
        raise ValueError(f"mode {j} is at cutoff")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    value = (-1j / (2.0 * beta_c)) * np.exp(1j * alpha * x + s * 1j * beta_c * y)
    grad = (1j * alpha * value, s * 1j * beta_c * value)
    return value, grad


def _modal_sum(params: WaveParams, indices, x, y, zx, zy):
    alpha = params.alpha(indices)
    beta = params.beta(indices)
    dx = np.asarray(x, dtype=float) - zx
    dy = np.abs(np.asarray(y, dtype=float) - zy)
    terms = np.exp(
        1j * alpha * dx[..., None] + 1j * beta * dy[..., None]
    ) / beta
    pref = 1j / (2.0 * params.M * params.L)
    return pref * terms.sum(axis=-1)


def green_ml(params: WaveParams, x, y, zx, zy, n_green: int = N_GREEN_DEFAULT):
    """ML-periodic outgoing Green function, truncated modal sum.

    The evanescent tail converges like ``exp(-|beta| |y - zy|)``; for
    near-coincident heights the principal truncated sum is returned with a
    reduced-accuracy warning.
    """
    if np.any((np.asarray(x) == zx) & (np.asarray(y) == zy)):
        raise ValueError("Green function evaluated at its singularity")
    if np.any(np.abs(np.asarray(y) - zy) < params.wavelength / 100):
        warnings.warn(
            "modal sum evaluated at near-coincident heights; accuracy reduced",
            stacklevel=2,
        )
    indices = np.arange(-n_green, n_green + 1)
    return _modal_sum(params, indices, x, y, zx, zy)


def green_q(params: WaveParams, q: int, x, y, zx, zy, n_green: int = N_GREEN_DEFAULT):
    """Quasi-periodic component of the modal Green function.

    Sums only the indices ``j = q + M*l`` with ``|j| <= n_green``.  The result
    is ``alpha_q``-quasi-periodic with period L, ``alpha_q = 2*pi*q/(M*L)``.
    """
    M = params.M
    lo = int(np.ceil((-n_green - q) / M))
    hi = int(np.floor((n_green - q) / M))
    indices = q + M * np.arange(lo, hi + 1)
    return _modal_sum(params, indices, x, y, zx, zy)


def _point_source_coeffs(params: WaveParams, indices, zx, zy, side: str):
    s = _sign(side)
    alpha = params.alpha(indices)
    beta = params.beta(indices)
    dist = np.abs(zy - s * params.h)
    pref = 1j / (2.0 * params.M * params.L * beta)
    return pref * np.exp(-1j * (alpha * zx - beta * dist))


def rayleigh_of_point_source(params: WaveParams, zx, zy, side: str) -> RayleighSeq:
    """Closed-form Rayleigh coefficients of ``G(.; z)`` on the given side."""
    if abs(zy) >= params.h:
        raise ValueError("source must lie inside the slab |y| < h")
    indices = params.indices
    return RayleighSeq(side, indices, _point_source_coeffs(params, indices, zx, zy, side))


def reduced_indices(params: WaveParams, q: int):
    """Indices ``(l, j = q + M*l)`` of the residue class q inside the truncation."""
    M = params.M
    lo = int(np.ceil((-params.n_min - q) / M))
    hi = int(np.floor((params.n_max - q) / M))
    ells = np.arange(lo, hi + 1)
    return ells, q + M * ells


def rayleigh_of_point_source_q(params: WaveParams, q: int, zx, zy, side: str) -> RayleighSeq:
    """Rayleigh coefficients of ``G_q(.; z)``: sparse on the residue class q.

    Coefficients inherit the ``1/(M*L)`` normalization of ``green_q`` (the
    quasi-periodic kernel is defined here as the residue-class part of the
    ML-periodic one, so its Rayleigh sequence is the restriction of the full
    point-source sequence).
    """
    if abs(zy) >= params.h:
        raise ValueError("source must lie inside the slab |y| < h")
    indices = params.indices
    coeffs = np.zeros(indices.shape, dtype=complex)
    _, js = reduced_indices(params, q)
    mask = np.isin(indices, js)
    coeffs[mask] = _point_source_coeffs(params, indices[mask], zx, zy, side)
    return RayleighSeq(side, indices, coeffs)


def dtn_apply(params: WaveParams, trace: RayleighSeq) -> RayleighSeq:
    """Dirichlet-to-Neumann map on a horizontal trace: multiply by i*beta."""
    beta = params.beta(trace.indices)
    return RayleighSeq(trace.side, trace.indices, 1j * beta * trace.coeffs)
