"""Regularized minimization, the side solver and the differential indicator."""

import numpy as np
import pytest
import scipy.optimize

from defectscan import (
    GlsmOptions,
    NearFieldData,
    SideSolver,
    WaveParams,
    glsm_minimize,
    image,
    indicator_at,
    rayleigh_of_point_source,
    reduced_indices,
    sampling_grid,
    sharp,
)
from defectscan.geometry import MediaConfig
from defectscan.operators import near_field_q


@pytest.fixture
def params():
    return WaveParams(k=2.3, L=2.0, M=3, h=1.2, n_min=2, n_max=2)


def _data(params, rng, matrix=None, side="+"):
    n = params.indices.size
    if matrix is None:
        matrix = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return NearFieldData(
        wave=params, side=side, direction=side, variant="perturbed",
        indices=params.indices, matrix=matrix,
    )


def _cost(nm, ns, phi, alpha, delta, norm):
    def f(v):
        r = nm @ v - phi
        return float(
            alpha * (np.real(np.vdot(v, ns @ v)) + delta * norm * np.vdot(v, v).real)
            + np.vdot(r, r).real
        )

    return f


class TestGlsmMinimize:
    def test_zeroes_the_gradient(self, rng):
        n = 6
        nm = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        ns = sharp(nm)
        phi = rng.normal(size=n) + 1j * rng.normal(size=n)
        alpha, delta = 1e-3, 0.01
        a = glsm_minimize(nm, ns, phi, alpha, delta).entries
        norm = float(np.linalg.norm(ns, 2))
        cost = _cost(nm, ns, phi, alpha, delta, norm)
        base = cost(a)
        eps = 1e-6 * (np.linalg.norm(a) + 1)
        for _ in range(20):
            d = rng.normal(size=n) + 1j * rng.normal(size=n)
            d /= np.linalg.norm(d)
            grad = (cost(a + eps * d) - cost(a - eps * d)) / (2 * eps)
            assert abs(grad) / (abs(base) + 1) < 1e-10

    def test_matches_descent_oracle(self, rng):
        # Steepest descent with exact line search on the (convex quadratic)
        # cost must land on the same minimizer.
        n = 6
        nm = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        ns = sharp(nm)
        phi = rng.normal(size=n) + 1j * rng.normal(size=n)
        alpha, delta = 1e-2, 0.01
        norm = float(np.linalg.norm(ns, 2))
        a_direct = glsm_minimize(nm, ns, phi, alpha, delta).entries

        # quadratic form: cost(v) = Re<v, A v> - 2 Re<b, v> + |phi|^2
        a_mat = alpha * (ns + delta * norm * np.eye(n)) + nm.conj().T @ nm
        b_vec = nm.conj().T @ phi
        v = np.zeros(n, dtype=complex)
        for _ in range(8000):
            g = a_mat @ v - b_vec  # half the Wirtinger gradient
            denom = np.real(np.vdot(g, a_mat @ g))
            if denom <= 0:
                break
            step = np.real(np.vdot(g, g)) / denom
            v = v - step * g
        assert np.linalg.norm(v - a_direct) / np.linalg.norm(a_direct) < 1e-6

    def test_sharp_norm_override(self, rng):
        n = 4
        nm = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        ns = sharp(nm)
        phi = rng.normal(size=n) + 1j * rng.normal(size=n)
        a1 = glsm_minimize(nm, ns, phi, 1e-2, 0.5).entries
        a2 = glsm_minimize(nm, ns, phi, 1e-2, 0.5, sharp_norm=100.0).entries
        assert not np.allclose(a1, a2)  # the penalty scale matters
        assert np.linalg.norm(a2) < np.linalg.norm(a1)

    def test_input_validation(self, rng):
        n = 4
        nm = np.eye(n, dtype=complex)
        ns = np.eye(n, dtype=complex)
        phi = np.ones(n, dtype=complex)
        with pytest.raises(ValueError):
            glsm_minimize(nm, ns, phi, 0.0, 0.0)
        with pytest.raises(ValueError):
            glsm_minimize(nm * np.nan, ns, phi, 1e-3, 0.0)


class TestGlsmOptions:
    def test_alpha_rules(self):
        scaled = GlsmOptions(alpha0=1e-3, alpha_rule="scaled")
        fixed = GlsmOptions(alpha0=1e-3, alpha_rule="fixed")
        assert scaled.alpha(10.0) == pytest.approx(1e-2)
        assert fixed.alpha(10.0) == pytest.approx(1e-3)

    def test_validation(self):
        with pytest.raises(ValueError):
            GlsmOptions(alpha0=0.0)
        with pytest.raises(ValueError):
            GlsmOptions(alpha_rule="other")
        with pytest.raises(ValueError):
            GlsmOptions(delta=-0.1)


class TestSideSolver:
    def test_full_minimizer_matches_direct(self, params, rng):
        data = _data(params, rng)
        opts = GlsmOptions(alpha0=1e-3, delta=0.01, q=1)
        solver = SideSolver(data, opts)
        phi = rng.normal(size=(params.indices.size, 1)) + 1j * rng.normal(
            size=(params.indices.size, 1)
        )
        a_solver = solver.minimize_full(phi)[:, 0]
        a_direct = glsm_minimize(
            data.matrix, solver.n_sharp, phi[:, 0], solver.alpha, 0.01
        ).entries
        assert np.allclose(a_solver, a_direct, rtol=1e-10)

    def test_reduced_penalty_keeps_full_norm(self, params, rng):
        data = _data(params, rng)
        opts = GlsmOptions(alpha0=1e-3, delta=0.3, q=1)
        solver = SideSolver(data, opts)
        _, js = reduced_indices(params, 1)
        phi_red = rng.normal(size=(js.size, 1)) + 1j * rng.normal(size=(js.size, 1))
        a_solver = solver.minimize_reduced(phi_red)[:, 0]
        n_q = near_field_q(data, 1)
        a_direct = glsm_minimize(
            n_q, solver.n_q_sharp, phi_red[:, 0], solver.alpha, 0.3,
            sharp_norm=solver.sharp_norm,  # penalty uses the FULL operator norm
        ).entries
        assert np.allclose(a_solver, a_direct, rtol=1e-10)

    def test_point_source_rhs_matches_kernel(self, params, rng):
        data = _data(params, rng, side="+")
        solver = SideSolver(data, GlsmOptions(alpha0=1e-3, q=1))
        zx, zy = 0.4, -0.3
        phi = solver.point_source_rhs([zx], [zy], quasi=False)[:, 0]
        ref = rayleigh_of_point_source(params, zx, zy, "+").coeffs
        assert np.allclose(phi, ref)

    def test_quasi_rhs_sparsity(self, params, rng):
        data = _data(params, rng)
        solver = SideSolver(data, GlsmOptions(alpha0=1e-3, q=1))
        phi = solver.point_source_rhs([0.4], [-0.3], quasi=True)[:, 0]
        _, js = reduced_indices(params, 1)
        on = np.isin(params.indices, js)
        assert np.all(phi[~on] == 0)
        assert np.all(phi[on] != 0)

    def test_block_structured_data_has_zero_dterm(self, params, rng):
        # If the data couples only modes in the same residue class (exactly
        # what an unperturbed periodic medium produces), the full minimizer
        # of a class-supported trace equals the reduced one: D must vanish.
        idx = params.indices
        n = idx.size
        matrix = np.zeros((n, n), dtype=complex)
        same = (idx[:, None] - idx[None, :]) % params.M == 0
        matrix[same] = rng.normal(size=int(same.sum())) + 1j * rng.normal(
            size=int(same.sum())
        )
        data = _data(params, rng, matrix=matrix)
        solver = SideSolver(data, GlsmOptions(alpha0=1e-4, delta=0.0, q=1))
        _, g, _, d = solver.indicator([0.3, -0.5], [0.1, -0.4])
        assert np.all(d < 1e-20 * g)

    def test_generic_data_has_positive_dterm(self, params, rng):
        data = _data(params, rng)
        solver = SideSolver(data, GlsmOptions(alpha0=1e-3, delta=0.0, q=1))
        value, g, cost_q, d = solver.indicator([0.3], [0.1])
        assert d[0] > 0 and g[0] > 0 and cost_q[0] > 0
        assert value[0] == pytest.approx(1.0 / (g[0] * (1.0 + g[0] / d[0])))

    def test_indicator_at_single_point(self, params, rng):
        data = _data(params, rng)
        value, diag = indicator_at(data, (0.3, 0.1), GlsmOptions(alpha0=1e-3, q=1))
        assert value >= 0
        assert set(diag) == {"cost_full", "cost_q", "dterm"}


class TestSamplingGrid:
    def test_default_extent_and_spacing(self, params):
        opts = GlsmOptions(alpha0=1e-3)
        xs, ys = sampling_grid(params, opts)
        assert xs[0] == pytest.approx(params.x_min)
        assert xs[-1] == pytest.approx(params.x_max)
        assert ys[0] == pytest.approx(-params.h)
        assert ys[-1] == pytest.approx(params.h)
        spacing = params.wavelength / 20
        assert xs[1] - xs[0] <= spacing * 1.01

    def test_custom_extent(self, params):
        opts = GlsmOptions(alpha0=1e-3, extent=(-1, 1, -0.5, 0.5), sampling_spacing=0.25)
        xs, ys = sampling_grid(params, opts)
        assert xs.min() == -1 and xs.max() == 1
        assert ys.min() == -0.5 and ys.max() == 0.5


class TestImage:
    def test_shapes_and_sides(self, params, rng):
        cfg = MediaConfig(wave=params, background_cells=())
        plus = _data(params, rng, side="+")
        minus = _data(params, rng, side="-")
        opts = GlsmOptions(alpha0=1e-3, q=1, sampling_spacing=0.4)
        imap = image(cfg, plus, minus, opts)
        assert imap.values.shape == (imap.xs.size, imap.ys.size)
        assert np.all(imap.values >= 0)
        x, y = imap.argmax_point()
        i = np.argmin(np.abs(imap.xs - x))
        j = np.argmin(np.abs(imap.ys - y))
        assert imap.values[i, j] == imap.values.max()

    def test_side_mismatch_rejected(self, params, rng):
        cfg = MediaConfig(wave=params, background_cells=())
        plus = _data(params, rng, side="+")
        opts = GlsmOptions(alpha0=1e-3, q=1, sampling_spacing=0.4)
        with pytest.raises(ValueError, match="side"):
            image(cfg, plus, plus, opts)

    def test_truncation_mismatch_rejected(self, params, rng):
        cfg = MediaConfig(wave=params, background_cells=())
        other = WaveParams(k=2.3, L=2.0, M=3, h=1.2, n_min=3, n_max=3)
        plus = _data(other, rng, side="+")
        minus = _data(other, rng, side="-")
        opts = GlsmOptions(alpha0=1e-3, q=1, sampling_spacing=0.4)
        with pytest.raises(ValueError, match="truncation"):
            image(cfg, plus, minus, opts)
