"""Index sets, the quasi-periodic DFT pair, padding and Sobolev norms."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tmgrating.oracles import direct_dft
from tmgrating.spectral import (
    Discretization,
    GridValues,
    SpectralField,
    derivative_multiplier,
    derivative_multipliers,
    embed,
    forward_dft,
    grid_nodes,
    index_grid,
    indices,
    inverse_dft,
    position,
    read_coeffs_csv,
    resize,
    restrict,
    sobolev_norm,
    write_coeffs_csv,
)


def random_field(disc, alpha, rng):
    N = disc.N
    return SpectralField(disc, alpha, rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N)))


def basis_samples(disc, alpha, j):
    x1, x2 = grid_nodes(disc)
    phase = np.exp(1j * (j[0] + alpha) * x1 + 1j * j[1] * np.pi * x2 / disc.R)
    return GridValues(disc, alpha, phase / math.sqrt(4 * math.pi * disc.R) + 0 * x1 * x2)


class TestDiscretization:
    def test_index_set_size_and_range(self):
        for N in (4, 6, 16):
            j = indices(N)
            assert len(set(j)) == N
            assert j.min() == -N // 2 + 1 and j.max() == N // 2
            assert j1_pairs(N) == N * N

    @pytest.mark.parametrize("N", [3, 2, 0, 7])
    def test_rejects_odd_or_small(self, N):
        with pytest.raises(ValueError):
            Discretization(N, 2.0, 0.8)

    def test_rejects_box_violation(self):
        with pytest.raises(ValueError):
            Discretization(8, 2.0, 1.0)
        with pytest.raises(ValueError):
            Discretization(8, 2.0, 0.9, margin=0.2)
        # the uncut kernel only needs 2 rho <= R
        Discretization(8, 2.0, 1.0, smooth_cutoff=False)

    def test_position_is_bijection(self):
        N = 8
        for n, j in enumerate(indices(N)):
            assert position(int(j), N) == n
        with pytest.raises(IndexError):
            position(5, N)

    def test_spacing(self):
        d = Discretization(16, 2.0, 0.8)
        assert d.spacing == pytest.approx((2 * math.pi / 16, 4.0 / 16))


def j1_pairs(N):
    j1, j2 = np.broadcast_arrays(*index_grid(N))
    return len({(int(a), int(b)) for a, b in zip(j1.ravel(), j2.ravel())})


class TestForwardDFT:
    def test_constant_maps_to_single_mode(self):
        d = Discretization(8, 2.0, 0.8)
        g = GridValues(d, 0.0, np.full((8, 8), 3.0 + 0j))
        u = forward_dft(g)
        assert u[0, 0] == pytest.approx(3.0 * math.sqrt(4 * math.pi * d.R), rel=1e-14)
        rest = u.coeffs.copy()
        rest[0, 0] = 0
        assert np.abs(rest).max() < 1e-13

    @pytest.mark.parametrize("alpha", [0.0, 0.3, -0.71])
    def test_basis_reproduction(self, alpha):
        d = Discretization(8, 2.0, 0.8)
        for j in [(0, 0), (1, -1), (4, 4), (-3, 2)]:
            u = forward_dft(basis_samples(d, alpha, j))
            e = SpectralField.unit(d, alpha, j)
            assert np.abs(u.coeffs - e.coeffs).max() < 1e-12

    @pytest.mark.parametrize("N", [4, 8])
    def test_matches_direct_double_sum(self, N):
        rng = np.random.default_rng(1)
        d = Discretization(N, 2.0, 0.8)
        g = GridValues(d, 0.3, rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N)))
        fast = forward_dft(g).coeffs
        slow = direct_dft(g)
        assert np.linalg.norm(fast - slow) / np.linalg.norm(slow) < 1e-12


class TestInverseDFT:
    def test_unit_mode_is_constant(self):
        d = Discretization(8, 2.0, 0.8)
        g = inverse_dft(SpectralField.unit(d, 0.0, (0, 0)))
        assert np.allclose(g.values, 1 / math.sqrt(4 * math.pi * d.R), rtol=0, atol=1e-15)

    @pytest.mark.parametrize("N", [16, 64, 256])
    def test_roundtrips(self, N):
        rng = np.random.default_rng(N)
        d = Discretization(N, 2.0, 0.8)
        u = random_field(d, 0.37, rng)
        assert np.abs(forward_dft(inverse_dft(u)).coeffs - u.coeffs).max() <= 1e-12 * math.sqrt(N)
        g = GridValues(d, 0.37, rng.normal(size=(N, N)) + 0j)
        assert np.abs(inverse_dft(forward_dft(g)).values - g.values).max() <= 1e-12

    def test_parseval(self):
        rng = np.random.default_rng(2)
        d = Discretization(16, 2.0, 0.8)
        u = random_field(d, 0.2, rng)
        g = inverse_dft(u)
        h1, h2 = d.spacing
        quad = h1 * h2 * np.sum(np.abs(g.values) ** 2)
        assert quad == pytest.approx(np.sum(np.abs(u.coeffs) ** 2), rel=1e-12)

    def test_shape_mismatch(self):
        d = Discretization(8, 2.0, 0.8)
        with pytest.raises(ValueError):
            GridValues(d, 0.0, np.zeros((4, 4)))
        with pytest.raises(ValueError):
            SpectralField(d, 0.0, np.zeros((8, 6)))


class TestPadding:
    def test_embed_unit_vector(self):
        d = Discretization(4, 2.0, 0.8)
        e = embed(SpectralField.unit(d, 0.1, (1, -1)), 8)
        assert e.N == 8 and e[1, -1] == 1
        assert np.count_nonzero(e.coeffs) == 1

    def test_embed_restrict_identity_and_norm(self):
        rng = np.random.default_rng(3)
        u = random_field(Discretization(8, 2.0, 0.8), 0.4, rng)
        for M in (10, 16, 24):
            e = embed(u, M)
            assert e.norm() == pytest.approx(u.norm(), rel=1e-15)
            assert np.array_equal(restrict(e, 8).coeffs, u.coeffs)

    def test_restrict_matches_index_filter(self):
        rng = np.random.default_rng(4)
        u = random_field(Discretization(8, 2.0, 0.8), 0.0, rng)
        r = restrict(u, 4)
        for a in indices(4):
            for b in indices(4):
                assert r[a, b] == u[a, b]

    def test_restrict_of_high_modes_is_zero(self):
        d = Discretization(8, 2.0, 0.8)
        u = SpectralField.unit(d, 0.0, (4, 0)) + SpectralField.unit(d, 0.0, (-3, 3))
        assert not np.any(restrict(u, 4).coeffs)

    def test_adjointness(self):
        rng = np.random.default_rng(5)
        u = random_field(Discretization(8, 2.0, 0.8), 0.3, rng)
        v = random_field(Discretization(16, 2.0, 0.8), 0.3, rng)
        assert embed(u, 16).vdot(v) == u.vdot(restrict(v, 8))

    def test_bad_sizes(self):
        u = SpectralField.zeros(Discretization(8, 2.0, 0.8), 0.0)
        for M in (8, 6, 9):
            with pytest.raises(ValueError):
                embed(u, M)
        for M in (8, 10, 5):
            with pytest.raises(ValueError):
                restrict(u, M)
        assert resize(u, 8) is u


class TestDerivatives:
    def test_examples(self):
        assert derivative_multiplier((0, 0), 0.0, 2.0) == (0, 0)
        w1, w2 = derivative_multiplier((2, 1), 0.5, 2.0)
        assert w1 == pytest.approx(2.5j) and w2 == pytest.approx(1j * math.pi / 2)

    def test_spectral_derivative_of_basis_function(self):
        d = Discretization(8, 2.0, 0.8)
        alpha, j = 0.3, (2, -3)
        w1, w2 = derivative_multipliers(8, alpha, d.R)
        u = SpectralField.unit(d, alpha, j)
        phi = basis_samples(d, alpha, j).values
        d1 = inverse_dft(u.with_coeffs(w1 * u.coeffs)).values
        d2 = inverse_dft(u.with_coeffs(w2 * u.coeffs)).values
        assert np.abs(d1 - 1j * (j[0] + alpha) * phi).max() < 1e-12
        assert np.abs(d2 - 1j * j[1] * math.pi / d.R * phi).max() < 1e-12


class TestSobolevNorm:
    def test_s0_is_coefficient_norm(self):
        rng = np.random.default_rng(6)
        u = random_field(Discretization(8, 2.0, 0.8), 0.0, rng)
        assert sobolev_norm(u, 0) == pytest.approx(np.linalg.norm(u.coeffs), rel=1e-14)

    def test_single_mode(self):
        d = Discretization(16, 2.0, 0.8)
        u = SpectralField.unit(d, 0.0, (3, 4)) * 2.0
        assert sobolev_norm(u, 1) == pytest.approx(2 * math.sqrt(26), rel=1e-14)
        assert sobolev_norm(u, 0.5) == pytest.approx(2 * 26**0.25, rel=1e-14)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_monotone_in_s(self, seed):
        u = random_field(Discretization(8, 2.0, 0.8), 0.1, np.random.default_rng(seed))
        assert sobolev_norm(u, 1) >= sobolev_norm(u, 0.5) >= sobolev_norm(u, 0)

    def test_negative_s(self):
        with pytest.raises(ValueError):
            sobolev_norm(SpectralField.zeros(Discretization(4, 2.0, 0.8), 0.0), -0.5)


def test_coeff_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(7)
    d = Discretization(8, 2.0, 0.8)
    u = random_field(d, 0.25, rng)
    path = tmp_path / "c.csv"
    write_coeffs_csv(u, path)
    text = path.read_bytes()
    assert text.startswith(b"j1,j2,re,im\n") and b"\r" not in text
    rows = text.decode().splitlines()[1:]
    assert len(rows) == 64
    assert rows[0].startswith("-3,-3,") and rows[1].startswith("-3,-2,")
    back = read_coeffs_csv(path, d, 0.25)
    assert np.array_equal(back.coeffs, u.coeffs)
