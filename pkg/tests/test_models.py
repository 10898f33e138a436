from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from uniattr.models import (
    LinearModel,
    WaveModel,
    energy,
    energy_ball_cloud,
    energy_distance,
    energy_values,
    linear_kernel_oracle,
    model_from_dict,
    scale_to_energy,
    tail_energy,
    wave_jvp,
    wave_rhs,
    weak_distance,
)
from uniattr.process_core import ProcessSpec, propagate
from uniattr.symbol_space import CircleHull, TorusHull

W = WaveModel(16, math.pi)
TWO_PI = 2 * math.pi
COS = CircleHull.from_function(TWO_PI, math.cos, 16)
small = st.floats(-0.5, 0.5, allow_nan=False)


def mode_state(W, j, amp, part="u"):
    x = np.zeros(W.state_dim)
    x[(j - 1) if part == "u" else W.modes + j - 1] = amp
    return x


class TestConstruction:
    @pytest.mark.parametrize("bad", [dict(modes=0), dict(L=0.0), dict(L=-1.0)])
    def test_wave_rejects(self, bad):
        with pytest.raises(ValueError):
            WaveModel(**bad)

    def test_linear_rejects(self):
        with pytest.raises(ValueError):
            LinearModel(lam=0.0)

    def test_dims(self):
        assert W.state_dim == 32 and W.n_nodes == 64

    @pytest.mark.parametrize("M", [LinearModel(2.0, 3), WaveModel(8, 2.0, False)])
    def test_dict_round_trip(self, M):
        assert model_from_dict(M.to_dict()) == M

    def test_basis_orthonormal_under_projector(self):
        np.testing.assert_allclose(W.basis.T @ W.projector, np.eye(W.modes), atol=1e-13)


class TestRhs:
    def test_origin_is_equilibrium(self):
        assert np.all(wave_rhs(W, np.zeros(32), np.zeros(16)) == 0.0)

    def test_linearization_mode1(self):
        L = 2.0
        Wl = WaveModel(8, L)
        mu1 = (math.pi / L) ** 2
        eps = np.array([1e-3, 5e-4, 2.5e-4])
        vdot = np.array([wave_rhs(Wl, mode_state(Wl, 1, e))[Wl.modes] for e in eps])
        # remainder O(eps^3): divided by eps it shrinks 4x per halving
        rem = np.abs(vdot / eps - (1.0 - mu1))
        assert rem[0] < 1e-5
        assert rem[1] / rem[2] == pytest.approx(4.0, rel=1e-3)

    def test_sin_cubed_identity(self):
        # sin^3 = (3 sin - sin 3x) / 4 on the orthonormal basis
        a = 0.7
        x = mode_state(W, 1, a)
        Wu = WaveModel(16, math.pi, damping=False)
        nonlin = -(wave_rhs(Wu, x)[16:] + W.mu * x[:16]) - a * np.eye(16)[0] * -1.0
        c = math.sqrt(2.0 / math.pi)
        expect = np.zeros(16)
        expect[0] = a ** 3 * c * c * 3.0 / 4.0
        expect[2] = -a ** 3 * c * c / 4.0
        np.testing.assert_allclose(nonlin, expect, atol=1e-12)

    def test_forcing_added(self):
        f = np.arange(1.0, 3.0)
        out = wave_rhs(W, np.zeros(32), f)
        assert out[16:18].tolist() == [1.0, 2.0] and np.all(out[18:] == 0)

    def test_row_wise(self, rng):
        X = 0.1 * rng.standard_normal((5, 32))
        batch = wave_rhs(W, X)
        for i in range(5):
            np.testing.assert_allclose(batch[i], wave_rhs(W, X[i]), atol=1e-14)

    @given(arrays(np.float64, 32, elements=small), arrays(np.float64, 32, elements=small))
    def test_jvp_matches_central_differences(self, x, d):
        h = 1e-5
        fd = (wave_rhs(W, x + h * d) - wave_rhs(W, x - h * d)) / (2 * h)
        np.testing.assert_allclose(wave_jvp(W, x, d), fd, atol=1e-7)

    def test_rejects_wrong_dim(self):
        with pytest.raises(ValueError):
            wave_rhs(W, np.zeros(10))


class TestEnergy:
    def test_zero(self):
        rep = energy(W, np.zeros(32))
        assert rep.total == 0.0 and rep.tail == 0.0

    def test_pure_kinetic(self):
        rep = energy(W, mode_state(W, 1, 1.0, "v"))
        assert rep.total == pytest.approx(0.5, abs=1e-14)
        assert rep.kinetic == pytest.approx(0.5)

    def test_quartic_term_by_quadrature(self):
        from scipy.integrate import quad
        a = 0.8
        x = mode_state(W, 2, a)
        phi = lambda s: math.sqrt(2 / math.pi) * math.sin(2 * s)
        pot = quad(lambda s: (a * phi(s)) ** 4 / 4 - (a * phi(s)) ** 2 / 2, 0, math.pi)[0]
        assert energy(W, x).total == pytest.approx(0.5 * 4 * a * a + pot, abs=1e-12)

    @given(arrays(np.float64, 32, elements=st.floats(-2, 2)))
    def test_parts_add_up(self, x):
        rep = energy(W, x)
        assert rep.kinetic + rep.potential == pytest.approx(rep.total, abs=1e-12)

    @given(arrays(np.float64, 32, elements=st.floats(-2, 2)))
    def test_nonnegative_when_L_is_pi(self, x):
        assert energy(W, x).total >= -1e-12

    @pytest.mark.parametrize("steps", [1000])
    def test_undamped_conservation_order(self, steps):
        Wu = WaveModel(8, math.pi, damping=False)
        S = CircleHull(TWO_PI, ((0.0,) * 8,))
        x0 = energy_ball_cloud(Wu, 0.5, 1, seed=2)[1]
        drift = []
        for dt in (0.02, 0.01):
            P = ProcessSpec(Wu, dt=dt)
            out = propagate(P, S, [S.point(0.0)], [0.0], x0[None], [2.0])[0, 0]
            drift.append(abs(energy_values(Wu, out)[0] - energy_values(Wu, x0)[0]))
        assert drift[1] <= 1e-6
        assert drift[0] / drift[1] >= 16 - 4

    def test_damped_unforced_decreases(self):
        S = CircleHull(TWO_PI, ((0.0,) * 16,))
        x0 = energy_ball_cloud(W, 1.0, 1, seed=4)[1]
        out = propagate(ProcessSpec(W, dt=1e-3), S, [S.point(0.0)], [0.0], x0[None], [0.5, 1.0, 1.5])
        E = energy_values(W, out[:, 0])
        assert np.all(np.diff(np.concatenate([[1.0], E])) < 0)


class TestDistances:
    def test_weak_self(self, rng):
        x = rng.standard_normal(32)
        assert weak_distance(W, x, x) == 0.0

    @pytest.mark.parametrize("j", [1, 3, 9])
    def test_weak_v_mode(self, j):
        d = mode_state(W, j, 0.3, "v")
        assert weak_distance(W, d, np.zeros(32)) == pytest.approx(energy_distance(W, d, np.zeros(32)) / math.sqrt(W.mu[j - 1]))

    @given(arrays(np.float64, 32, elements=st.floats(-3, 3)), arrays(np.float64, 32, elements=st.floats(-3, 3)))
    def test_weak_bounded_by_energy(self, a, b):
        for Wx in (W, WaveModel(16, 2 * math.pi)):
            C = max(1.0, 1.0 / math.sqrt(Wx.mu[0]))
            assert weak_distance(Wx, a, b) <= C * energy_distance(Wx, a, b) + 1e-12

    def test_metrics_agree(self, rng):
        a, b = rng.standard_normal(32), rng.standard_normal(32)
        assert W.weak_metric().dist(a, b) == pytest.approx(weak_distance(W, a, b))
        assert W.energy_metric().dist(a, b) == pytest.approx(energy_distance(W, a, b))

    def test_tail_low_modes(self):
        x = np.zeros(32)
        x[:4] = 1.0
        x[16:20] = 1.0
        assert tail_energy(W, x, 4) == 0.0

    def test_tail_full_cutoff(self, rng):
        assert tail_energy(W, rng.standard_normal(32), 16) == 0.0

    def test_tail_bad_cutoff(self):
        with pytest.raises(ValueError):
            tail_energy(W, np.zeros(32), 0)


class TestBallCloud:
    def test_levels(self):
        pts = energy_ball_cloud(W, 2.0, 3, seed=1, shells=(1.0, 0.25))
        E = energy_values(W, pts)
        assert E[0] == 0.0
        np.testing.assert_allclose(E[1:4], 2.0, rtol=1e-12)
        np.testing.assert_allclose(E[4:], 0.5, rtol=1e-12)

    def test_deterministic(self):
        assert energy_ball_cloud(W, 1.0, 4, seed=7).tobytes() == energy_ball_cloud(W, 1.0, 4, seed=7).tobytes()

    def test_scale_zero(self):
        assert np.all(scale_to_energy(W, np.ones(32), 0.0) == 0)


class TestLinearOracle:
    def test_zero_forcing(self):
        S = CircleHull(TWO_PI, ((0.0,),))
        assert linear_kernel_oracle(1.0, S, S.point(0.0), 3.0).tolist() == [0.0]

    def test_closed_form_at_zero(self):
        assert linear_kernel_oracle(1.0, COS, COS.point(0.0), 0.0)[0] == pytest.approx(0.5, abs=1e-9)

    @given(st.floats(-10, 10))
    def test_closed_form_everywhere(self, t):
        expect = 0.5 * (math.cos(t) + math.sin(t))
        assert linear_kernel_oracle(1.0, COS, COS.point(0.0), t)[0] == pytest.approx(expect, abs=1e-9)

    @given(st.floats(0, TWO_PI, exclude_max=True), st.floats(-5, 5), st.floats(-5, 5))
    def test_shift_identity(self, ph, h, t):
        s = COS.point(ph)
        a = linear_kernel_oracle(1.0, COS, COS.translate(s, h), t)
        b = linear_kernel_oracle(1.0, COS, s, t + h)
        assert abs(a[0] - b[0]) <= 1e-9

    def test_torus_two_frequencies(self):
        S = TorusHull((1.0, 2.0), (1.0, 0.5), (1, 1))
        lam = 2.0
        t = 0.3
        # int_0^inf e^{-lam r} cos(w (t - r)) dr = (lam cos wt + w sin wt) / (lam^2 + w^2)
        expect = sum(a * (lam * math.cos(w * t) + w * math.sin(w * t)) / (lam ** 2 + w ** 2)
                     for a, w in ((1.0, 1.0), (0.5, 2.0)))
        assert linear_kernel_oracle(lam, S, S.point(0.0, 0.0), t)[0] == pytest.approx(expect, abs=1e-10)
