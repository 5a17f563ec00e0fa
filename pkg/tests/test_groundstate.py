import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from bnlslab.diagnostics import rescale
from bnlslab.errors import DivergedIteration, MaxIterationsExceeded, ZeroField
from bnlslab.groundstate import (
    BoxTooSmall,
    gaussian_seed,
    gn_constant_closed_form,
    petviashvili_step,
    pohozaev_targets,
    solve_ground_state,
    threshold_f,
    threshold_fprime,
    weinstein_J,
)
from bnlslab.spectral import make_grid, physical_field

from conftest import random_smooth_field


class TestPohozaevTargets:
    def test_reference_values(self):
        t = pohozaev_targets(make_grid(2, 9, 64, 16))
        assert t == pytest.approx((0.4, 0.4, 0.1), abs=1e-15)

    def test_3d_values(self):
        t = pohozaev_targets(make_grid(3, 5, 32, 12))
        assert t == pytest.approx((0.5, 1 / 3, 1 / 12), abs=1e-15)

    def test_energy_identity_consistent(self):
        # E/P = K/(2P) - 1/(p+1) must equal the third target
        for N, p in [(2, 9), (3, 5), (1, 11), (2, 7.5)]:
            t1, _, t3 = pohozaev_targets(make_grid(N, p, 32, 8))
            assert t3 == pytest.approx(t1 / 2 - 1 / (p + 1), abs=1e-15)


class TestGroundState:
    def test_residual(self, gs2):
        assert gs2.residual <= 1e-10
        assert gs2.iterations < 100

    def test_profile_real_and_normalised(self, gs2):
        Q = np.fft.ifftn(gs2.Q.data, norm="ortho")
        assert np.max(np.abs(Q.imag)) < 1e-14
        n = gs2.params.n
        assert Q.real[n // 2, n // 2] > 0
        assert gs2.Q.data.flat[0].real > 0

    def test_radial(self, gs2):
        Q = gs2.physical()
        # symmetric under x -> -x and under swapping axes (grid centre at index n/2)
        assert np.max(np.abs(Q - Q.T)) < 1e-12
        inner = Q[1:, 1:]
        assert np.max(np.abs(inner - inner[::-1, ::-1])) < 1e-12

    def test_pohozaev(self, gs2):
        assert max(gs2.pohozaev.values()) <= 1e-6

    def test_seed_independent(self, prm2, gs2):
        other = solve_ground_state(prm2, seed=gaussian_seed(prm2, width=1.0))
        assert np.max(np.abs(other.physical() - gs2.physical())) < 1e-9

    def test_fixed_point_step(self, gs2):
        nxt, S = petviashvili_step(gs2.Q)
        assert S == pytest.approx(1.0, abs=1e-10)
        scale = np.max(np.abs(gs2.Q.data))
        assert np.max(np.abs(nxt.data - gs2.Q.data)) < 1e-9 * scale

    def test_constants_block(self, gs2):
        c = gs2.constants()
        for key in ("s_c", "mu", "residual", "CGN", "JQ", "ME_crit", "K_crit", "pohozaev"):
            assert key in c
        assert c["mu"] == 1.5
        assert len(c["pohozaev"]) == 3

    def test_sharp_constant_consistency(self, gs2):
        assert gs2.CGN * gs2.JQ == pytest.approx(1.0, abs=1e-8)
        assert gn_constant_closed_form(gs2) == gs2.CGN

    def test_threshold_identity(self, gs2):
        th = gs2.thresholds
        prm = gs2.params
        assert float(threshold_f(th.K_crit, prm, gs2.CGN)) == pytest.approx(th.ME_crit, rel=1e-8)
        assert abs(float(threshold_fprime(th.K_crit, prm, gs2.CGN))) <= 1e-6 * th.K_crit

    def test_threshold_is_maximum(self, gs2):
        prm = gs2.params
        K = gs2.thresholds.K_crit
        xs = K * np.array([0.5, 0.9, 0.99, 1.01, 1.1, 2.0])
        assert np.all(threshold_f(xs, prm, gs2.CGN) < gs2.thresholds.ME_crit)

    def test_3d_coarse_converges(self):
        prm = make_grid(3, 5, 32, 12)
        gs = solve_ground_state(prm, pad=2, shell_tol=None, strict=False)
        assert gs.residual <= 1e-10
        assert max(gs.pohozaev.values()) < 1e-2


class TestErrors:
    def test_zero_field_weinstein(self, prm_small):
        with pytest.raises(ZeroField):
            weinstein_J(physical_field(np.zeros(prm_small.shape), prm_small))

    def test_zero_seed_diverges(self, prm_small):
        with pytest.raises(DivergedIteration):
            solve_ground_state(prm_small, seed=physical_field(np.zeros(prm_small.shape), prm_small))

    def test_max_iterations(self, prm2):
        with pytest.raises(MaxIterationsExceeded):
            solve_ground_state(prm2, maxit=2)

    def test_box_too_small(self):
        with pytest.raises(BoxTooSmall):
            solve_ground_state(make_grid(2, 9, 64, 3))

    def test_bad_tolerance(self, prm_small):
        with pytest.raises(ValueError):
            solve_ground_state(prm_small, tol=0)


@settings(max_examples=20, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(a=st.floats(min_value=1e-3, max_value=1e3), lam=st.floats(min_value=0.5, max_value=2.0))
def test_weinstein_invariant_under_amplitude_and_dilation(gs2, a, lam):
    Q = physical_field(gs2.physical(), gs2.params)
    J = weinstein_J(Q)
    assert weinstein_J(Q.with_data(a * Q.data)) == pytest.approx(J, rel=1e-12)
    assert weinstein_J(rescale(Q, lam)) == pytest.approx(J, rel=1e-12)


@settings(max_examples=30, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(seed=st.integers(min_value=0, max_value=2**32 - 1))
def test_gn_inequality_random_fields(gs2, seed):
    u = random_smooth_field(gs2.params, np.random.default_rng(seed))
    assert gs2.CGN * weinstein_J(u) >= 1.0 - 1e-6
    assert math.isfinite(weinstein_J(u))
