"""Matrix-free operator, right-hand side and GMRES."""

import math

import numpy as np
import pytest

from tmgrating.contrast import PRESETS, Strip, contrast_coeffs, support_halfheight
from tmgrating.kernel import WaveParameters
from tmgrating.oracles import dense_operator, direct_convolution
from tmgrating.solver import (
    KRYLOV_MEMORY_BYTES,
    apply_L,
    apply_operator,
    assemble_rhs,
    build_setup,
    gmres_solve,
    incident_gradient_samples,
    multiply_contrast_gradient,
)
from tmgrating.spectral import Discretization, SpectralField, derivative_multipliers, grid_nodes

W = WaveParameters(math.pi / 2, math.pi / 4)


def random_field(disc, alpha, seed):
    rng = np.random.default_rng(seed)
    N = disc.N
    return SpectralField(disc, alpha, rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N)))


def preset_disc(name, N):
    spec = PRESETS[name]()
    h = support_halfheight(spec)
    if h > 0.9:
        return spec, Discretization(N, 2.0, h, smooth_cutoff=False)
    return spec, Discretization(N, 2.0, h + 0.05)


class TestIncidentField:
    def test_gradient_at_origin(self):
        disc = Discretization(8, 2.0, 0.8)
        g1, g2 = incident_gradient_samples(W, disc, 8)
        d1, d2 = W.direction
        assert g1.values[0, 0] == pytest.approx(1j * W.k * d1, rel=1e-15)
        assert g2.values[0, 0] == pytest.approx(1j * W.k * d2, rel=1e-15)
        mag = np.hypot(np.abs(g1.values), np.abs(g2.values))
        assert np.allclose(mag, W.k, rtol=1e-14, atol=0)

    def test_quasi_periodic(self):
        disc = Discretization(8, 2.0, 0.8)
        g1, _ = incident_gradient_samples(W, disc, 8)
        x1, x2 = grid_nodes(disc)
        d1, d2 = W.direction
        shifted = 1j * W.k * d1 * np.exp(1j * W.k * (d1 * (x1 + 2 * np.pi) + d2 * x2))
        assert np.allclose(shifted, np.exp(2j * np.pi * W.alpha) * g1.values, rtol=1e-13, atol=0)


class TestProductRule:
    def test_unit_contrast_is_multiplier(self):
        # q = 1 everywhere: only q^(0, 0) is non-zero
        disc = Discretization(8, 2.0, 0.8)
        qc = np.zeros((16, 16), dtype=complex)
        qc[0, 0] = math.sqrt(4 * math.pi * disc.R)
        from tmgrating.contrast import ContrastSpectrum

        qhat = ContrastSpectrum(disc.with_N(16), qc)
        u = random_field(disc, W.alpha, 0)
        f1, f2 = multiply_contrast_gradient(u, qhat)
        w1, w2 = derivative_multipliers(8, W.alpha, disc.R)
        assert np.allclose(f1.coeffs, w1 * u.coeffs, rtol=0, atol=1e-12)
        assert np.allclose(f2.coeffs, w2 * u.coeffs, rtol=0, atol=1e-12)

    @pytest.mark.parametrize("N", [4, 8])
    @pytest.mark.parametrize("name", sorted(PRESETS))
    def test_matches_direct_convolution(self, name, N):
        spec, disc = preset_disc(name, N)
        qhat = contrast_coeffs(spec, 2 * N, disc)
        u = random_field(disc, W.alpha, N)
        fast = multiply_contrast_gradient(u, qhat)
        slow = direct_convolution(u, qhat)
        for f, s in zip(fast, slow):
            assert np.linalg.norm(f.coeffs - s) <= 1e-10 * np.linalg.norm(s)

    def test_size_mismatch(self):
        disc = Discretization(8, 2.0, 0.8)
        qhat = contrast_coeffs(Strip(2.0, 0.75), 8, disc)
        with pytest.raises(ValueError):
            multiply_contrast_gradient(random_field(disc, 0.0, 1), qhat)


class TestOperator:
    def setup_method(self):
        self.disc = Discretization(8, 2.0, 0.8)
        self.setup = build_setup(W, self.disc, PRESETS["smooth_rect"]())

    def test_apply_L_single_mode(self):
        j = (2, -1)
        f1 = SpectralField.unit(self.disc, W.alpha, j)
        f2 = SpectralField.zeros(self.disc, W.alpha)
        out = apply_L(f1, f2, self.setup.ksm)
        expected = math.sqrt(4 * math.pi * 2.0) * self.setup.ksm[j] * 1j * (j[0] + W.alpha)
        assert out[j] == pytest.approx(expected, rel=1e-14)
        assert np.count_nonzero(out.coeffs) == 1

    def test_linear(self):
        u, v = random_field(self.disc, W.alpha, 2), random_field(self.disc, W.alpha, 3)
        lhs = apply_operator(u * 2.0 + v * (1 - 3j), self.setup)
        rhs = apply_operator(u, self.setup) * 2.0 + apply_operator(v, self.setup) * (1 - 3j)
        assert np.linalg.norm(lhs.coeffs - rhs.coeffs) <= 1e-12 * np.linalg.norm(rhs.coeffs)

    def test_zero_contrast_is_identity(self):
        setup = build_setup(W, self.disc, Strip(0.0, 0.5))
        u = random_field(self.disc, W.alpha, 4)
        assert np.array_equal(apply_operator(u, setup).coeffs, u.coeffs)
        assert not np.any(assemble_rhs(setup).coeffs)
        rep = gmres_solve(setup)
        assert rep.iterations == 0 and not np.any(rep.solution.coeffs)

    def test_rejects_wood(self):
        with pytest.raises(ValueError):
            build_setup(WaveParameters(2.5, math.acos(0.6)), self.disc, Strip(2.0, 0.5))

    def test_rhs_amplitude_linear(self):
        a = assemble_rhs(self.setup, 1.0).coeffs
        b = assemble_rhs(self.setup, 2 - 1j).coeffs
        assert np.allclose(b, (2 - 1j) * a, rtol=1e-13, atol=0)


class TestGMRES:
    def test_matches_dense_solve(self):
        disc = Discretization(8, 2.0, 0.8)
        setup = build_setup(W, disc, PRESETS["stepped_strip"]())
        A = dense_operator(setup)
        ref = np.linalg.solve(A, assemble_rhs(setup).coeffs.ravel())
        rep = gmres_solve(setup, tol=1e-12)
        assert rep.converged
        assert np.linalg.norm(rep.solution.coeffs.ravel() - ref) <= 1e-8 * np.linalg.norm(ref)

    def test_strip_stays_in_j1_zero_column(self):
        setup = build_setup(W, Discretization(16, 2.0, 0.8), Strip(2.0, 0.75))
        rep = gmres_solve(setup, tol=1e-10)
        assert np.abs(rep.solution.coeffs[1:, :]).max() <= 1e-12 * np.abs(rep.solution.coeffs).max()

    def test_residual_history(self):
        setup = build_setup(W, Discretization(16, 2.0, 0.8), PRESETS["smooth_rect"]())
        rep = gmres_solve(setup, tol=1e-8)
        h = np.array(rep.residual_history)
        assert h[0] == 1.0 and len(h) == rep.iterations + 1
        assert np.all(np.diff(h) <= 1e-14)
        assert h[-1] <= 1e-8
        assert rep.final_residual <= 1e-7

    def test_amplitude_scales_solution(self):
        setup = build_setup(W, Discretization(8, 2.0, 0.8), PRESETS["smooth_rect"]())
        a = gmres_solve(setup, tol=1e-12).solution.coeffs
        b = gmres_solve(setup, tol=1e-12, amplitude=3j).solution.coeffs
        assert np.linalg.norm(b - 3j * a) <= 1e-10 * np.linalg.norm(b)

    def test_strip_iterations(self):
        setup = build_setup(W, Discretization(64, 2.0, 0.8), Strip(2.0, 0.75))
        assert gmres_solve(setup, tol=1e-5).iterations <= 10

    def test_non_convergence_is_reported(self):
        setup = build_setup(W, Discretization(16, 2.0, 0.8), PRESETS["stepped_strip"]())
        rep = gmres_solve(setup, tol=1e-12, maxit=2)
        assert not rep.converged
        assert rep.final_residual > 1e-12

    def test_restart(self):
        setup = build_setup(W, Discretization(16, 2.0, 0.8), PRESETS["smooth_rect"]())
        full = gmres_solve(setup, tol=1e-10).solution.coeffs
        restarted = gmres_solve(setup, tol=1e-10, restart=3).solution.coeffs
        assert np.linalg.norm(full - restarted) <= 1e-8 * np.linalg.norm(full)

    def test_bad_tolerance(self):
        setup = build_setup(W, Discretization(8, 2.0, 0.8), Strip(2.0, 0.75))
        with pytest.raises(ValueError):
            gmres_solve(setup, tol=0.0)

    def test_memory_cap_falls_back_to_restarts(self, monkeypatch):
        import tmgrating.solver as solver

        assert KRYLOV_MEMORY_BYTES == 2**30
        setup = build_setup(W, Discretization(16, 2.0, 0.8), PRESETS["stepped_strip"]())
        full = gmres_solve(setup, tol=1e-10)
        # room for fewer vectors than full GMRES needs here
        monkeypatch.setattr(solver, "KRYLOV_MEMORY_BYTES", 16 * 256 * 4)
        capped = gmres_solve(setup, tol=1e-10)
        assert capped.converged and capped.iterations >= full.iterations
        diff = np.linalg.norm(capped.solution.coeffs - full.solution.coeffs)
        assert diff <= 1e-8 * np.linalg.norm(full.solution.coeffs)
