import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bnlslab.errors import BadResolution, InadmissiblePower, WrongRepresentation
from bnlslab.evolution import linear_flow
from bnlslab.spectral import (
    Rep,
    apply_symbol,
    as_spectral,
    coordinates,
    dealias,
    fft_workers,
    gradient,
    hs_norm,
    l2_norm,
    laplacian,
    lp_norm,
    make_grid,
    norms,
    outer_shell_max,
    pad_spectral,
    physical_field,
    to_physical,
    to_spectral,
    wavenumbers,
)

from conftest import random_smooth_field


def gaussian(prm):
    r2 = sum(x * x for x in coordinates(prm))
    return physical_field(np.exp(-r2), prm)


class TestMakeGrid:
    def test_reference_grid(self):
        prm = make_grid(2, 9, 256, 16)
        assert prm.s_c == pytest.approx(0.5, abs=1e-15)
        assert prm.mu == pytest.approx(1.5, abs=1e-15)
        assert prm.dx == 0.125
        assert prm.shape == (256, 256)

    def test_3d_spot_grid(self):
        prm = make_grid(3, 5, 64, 12)
        assert prm.s_c == pytest.approx(0.5, abs=1e-15)

    @pytest.mark.parametrize("N,p", [(2, 5), (2, 3), (3, 3.5), (4, 9)])
    def test_inadmissible_power(self, N, p):
        with pytest.raises(InadmissiblePower):
            make_grid(N, p, 64, 8)

    @pytest.mark.parametrize("n", [100, 2, 0, 63, 64.5, True])
    def test_bad_resolution(self, n):
        with pytest.raises(BadResolution):
            make_grid(2, 9, n, 8)

    def test_bad_box(self):
        with pytest.raises(BadResolution):
            make_grid(2, 9, 64, 0.0)


class TestGaussianOracles:
    """Closed-form integrals of exp(-|x|^2) in two dimensions."""

    def test_l2_norm(self, prm2):
        # int exp(-2|x|^2) dx = pi/2
        assert l2_norm(gaussian(prm2)) ** 2 == pytest.approx(math.pi / 2, rel=1e-13)

    def test_lp_norm(self, prm2):
        # int exp(-q|x|^2) dx = pi/q
        for q in (3.0, 10.0, 12.0):
            assert lp_norm(gaussian(prm2), q) ** q == pytest.approx(math.pi / q, rel=1e-13)

    def test_gradient(self, prm2):
        g = gaussian(prm2)
        xs = coordinates(prm2)
        for j, dj in enumerate(gradient(g)):
            exact = -2.0 * xs[j] * g.data.real
            assert np.max(np.abs(dj.data - exact)) < 1e-12

    def test_gradient_of_real_field_is_real(self, prm_small, rng):
        # white noise carries a Nyquist component, which must not turn imaginary
        u = physical_field(rng.normal(size=prm_small.shape), prm_small)
        for d in gradient(u):
            assert np.max(np.abs(d.data.imag)) < 1e-12

    def test_laplacian(self, prm2):
        g = gaussian(prm2)
        r2 = sum(x * x for x in coordinates(prm2))
        exact = (4.0 * r2 - 4.0) * np.exp(-r2)
        assert np.max(np.abs(laplacian(g).data - exact)) < 1e-11

    def test_biharmonic_seminorm(self, prm2):
        # ||Delta exp(-|x|^2)||_2^2 = 4 pi in 2D
        assert hs_norm(gaussian(prm2), 2) ** 2 == pytest.approx(4 * math.pi, rel=1e-12)

    def test_norms_dict(self, prm2):
        d = norms(gaussian(prm2))
        assert set(d) == {"l2", "hs", "lp"}
        assert d["lp"] ** 10 == pytest.approx(math.pi / 10, rel=1e-13)

    def test_outer_shell_small(self, prm2):
        assert outer_shell_max(gaussian(prm2)) < 1e-80


class TestTransforms:
    def test_round_trip(self, prm_small, rng):
        u = random_smooth_field(prm_small, rng)
        back = to_physical(to_spectral(u))
        assert np.max(np.abs(back.data - u.data)) < 1e-14

    def test_wrong_representation(self, prm_small, rng):
        u = random_smooth_field(prm_small, rng)
        with pytest.raises(WrongRepresentation):
            to_physical(u)
        with pytest.raises(WrongRepresentation):
            to_spectral(to_spectral(u))
        with pytest.raises(WrongRepresentation):
            dealias(u)
        with pytest.raises(WrongRepresentation):
            apply_symbol(u, 1.0)

    def test_hs_zero_is_l2(self, prm_small, rng):
        u = random_smooth_field(prm_small, rng)
        assert hs_norm(u, 0) == l2_norm(u)

    def test_sobolev_order_range(self, prm_small, rng):
        with pytest.raises(ValueError):
            norms(random_smooth_field(prm_small, rng), s=2.5)

    def test_symbol_callable_matches_array(self, prm_small, rng):
        uh = to_spectral(random_smooth_field(prm_small, rng))
        a = apply_symbol(uh, lambda k: np.exp(-(k**2)))
        b = apply_symbol(uh, np.exp(-wavenumbers(prm_small).k2))
        assert np.max(np.abs(a.data - b.data)) < 1e-15

    def test_fft_workers_env(self, monkeypatch):
        monkeypatch.setenv("BNLS_THREADS", "3")
        assert fft_workers() == 3
        monkeypatch.setenv("BNLS_THREADS", "junk")
        assert fft_workers() == 1
        monkeypatch.delenv("BNLS_THREADS")
        assert fft_workers() == 1


class TestPadding:
    def test_pad_then_truncate_identity(self, prm_small, rng):
        uh = to_spectral(random_smooth_field(prm_small, rng)).data
        back = pad_spectral(pad_spectral(uh, 64, 128), 128, 64)
        assert np.max(np.abs(back - uh)) < 1e-14

    def test_interpolant_agrees_on_coarse_points(self, prm_small, rng):
        u = random_smooth_field(prm_small, rng)
        fine = np.fft.ifftn(pad_spectral(to_spectral(u).data, 64, 128), norm="ortho")
        assert np.max(np.abs(fine[::2, ::2] - u.data)) < 1e-13

    def test_real_field_stays_real(self, prm_small, rng):
        u = random_smooth_field(prm_small, rng)
        real = physical_field(u.data.real, prm_small)
        fine = np.fft.ifftn(pad_spectral(to_spectral(real).data, 64, 256), norm="ortho")
        assert np.max(np.abs(fine.imag)) < 1e-15


seeds = st.integers(min_value=0, max_value=2**32 - 1)


@settings(max_examples=25, deadline=None)
@given(seed=seeds)
def test_plancherel(seed):
    prm = make_grid(2, 9, 32, 4)
    u = random_smooth_field(prm, np.random.default_rng(seed), bandwidth=4.0)
    uh = to_spectral(u)
    a = float(np.sum(np.abs(u.data) ** 2))
    b = float(np.sum(np.abs(uh.data) ** 2))
    assert b == pytest.approx(a, rel=1e-13)


@settings(max_examples=25, deadline=None)
@given(
    seed=seeds,
    s=st.floats(min_value=0.0, max_value=2.0),
    tau=st.floats(min_value=-10.0, max_value=10.0),
)
def test_unimodular_symbol_is_isometry(seed, s, tau):
    prm = make_grid(2, 9, 32, 4)
    u = random_smooth_field(prm, np.random.default_rng(seed), bandwidth=4.0)
    before = hs_norm(u, s)
    after = hs_norm(linear_flow(as_spectral(u), tau), s)
    assert after == pytest.approx(before, rel=1e-13)


@settings(max_examples=25, deadline=None)
@given(seed=seeds)
def test_dealias_idempotent(seed):
    prm = make_grid(2, 9, 32, 4)
    u = random_smooth_field(prm, np.random.default_rng(seed), bandwidth=50.0)
    once = dealias(to_spectral(u))
    twice = dealias(once)
    assert np.array_equal(once.data, twice.data)
    assert once.rep is Rep.SPECTRAL
    k = np.fft.fftfreq(32, 1 / 32)
    kept = (np.abs(k)[:, None] <= 32 / 3) & (np.abs(k)[None, :] <= 32 / 3)
    assert not np.any(once.data[~kept])
