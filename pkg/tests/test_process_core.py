from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from uniattr.finite_oracle import make_finite_system
from uniattr.metric_sets import PointCloud
from uniattr.models import LinearModel, WaveModel, energy_ball_cloud, linear_kernel_oracle
from uniattr.process_core import (
    CHUNK,
    DivergenceError,
    GridError,
    ProcessSpec,
    SkewState,
    axiom_sweep,
    cocycle_residual,
    evolve,
    evolve_cloud,
    order_ratio,
    propagate,
    skew_step,
    snap,
    translation_residual,
)
from uniattr.symbol_space import CircleHull, FiniteShift, ShiftWord, TorusHull

TWO_PI = 2 * math.pi
ZERO = CircleHull(TWO_PI, ((0.0,),))
COS = CircleHull.from_function(TWO_PI, math.cos, 16)
LIN = ProcessSpec(LinearModel(1.0, 1), dt=0.05)
W = WaveModel(16, math.pi)
WAVE = ProcessSpec(W, dt=1e-3)
TORUS = TorusHull((1.0, 0.5 * (1 + 5 ** 0.5)), (0.8, 0.04), (1, 2))


@pytest.fixture(scope="module")
def wave_states():
    return energy_ball_cloud(W, 0.5, 2, seed=3)


class TestSpec:
    @pytest.mark.parametrize("kw", [{"dt": 0.0}, {"dt": -1.0}, {"order": 3}, {"guard": 0.0}])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            ProcessSpec(LinearModel(), **kw)

    def test_snap(self):
        assert snap(WAVE, 0.25) == 0.25
        with pytest.raises(GridError):
            snap(WAVE, 0.0005)


class TestEvolve:
    def test_homogeneous_decay(self):
        x = evolve(LIN, ZERO, ZERO.point(0.0), 0.0, math.log(2), [1.0])
        assert x[0] == pytest.approx(0.5, abs=1e-9)

    @pytest.mark.parametrize("P,S,x", [(LIN, COS, [0.3]), (WAVE, TORUS, np.full(32, 0.01))])
    def test_identity_bitwise(self, P, S, x):
        sig = S.sample(1)[0]
        x = np.asarray(x, float)
        out = evolve(P, S, sig, 1.0, 1.0, x)
        assert out.tobytes() == x.tobytes()
        assert out is not x

    def test_periodic_solution(self):
        x = evolve(LIN, COS, COS.point(0.0), 0.0, TWO_PI, [0.5])
        assert x[0] == pytest.approx(0.5, abs=1e-6)

    def test_backward_rejected(self):
        with pytest.raises(ValueError):
            evolve(LIN, COS, COS.point(0.0), 1.0, 0.5, [0.0])

    def test_off_grid_wave_rejected(self):
        with pytest.raises(GridError):
            evolve(WAVE, TORUS, TORUS.point(0.0, 0.0), 0.0, 0.0105, np.zeros(32))

    def test_linear_accepts_off_grid(self):
        x = evolve(LIN, ZERO, ZERO.point(0.0), 0.013, 0.713, [2.0])
        assert x[0] == pytest.approx(2.0 * math.exp(-0.7), abs=1e-12)

    @given(st.floats(0, 6), st.floats(0.1, 8))
    def test_cbt_property(self, tau, span):
        # the oracle trajectory is carried into itself by the process
        sig = COS.point(0.7)
        x_tau = linear_kernel_oracle(1.0, COS, sig, tau)
        x_t = evolve(LIN, COS, sig, tau, tau + span, x_tau)
        assert abs(x_t[0] - linear_kernel_oracle(1.0, COS, sig, tau + span)[0]) <= 1e-8

    def test_guard_raises_with_time(self):
        P = ProcessSpec(LinearModel(1.0, 1), dt=0.05, guard=1.5)
        S = CircleHull(TWO_PI, ((3.0,),))
        with pytest.raises(DivergenceError) as err:
            evolve(P, S, S.point(0.0), 0.0, 5.0, [0.0])
        assert 0.0 < err.value.time < 5.0

    def test_guard_tags_point_index(self):
        P = ProcessSpec(W, dt=1e-3, guard=1.0)
        B = PointCloud(np.vstack([np.zeros(32), np.full(32, 0.5), np.zeros(32)]))
        with pytest.raises(DivergenceError) as err:
            evolve_cloud(P, TORUS, TORUS.point(0.0, 0.0), 0.0, 0.01, B)
        assert err.value.index == 1


class TestEvolveCloud:
    def test_singleton(self):
        B = PointCloud(np.array([[0.4]]))
        out = evolve_cloud(LIN, COS, COS.point(1.0), 0.0, 2.0, B)
        assert out.points[0, 0] == evolve(LIN, COS, COS.point(1.0), 0.0, 2.0, [0.4])[0]

    def test_unchanged_at_tau(self):
        B = PointCloud(np.array([[1.0], [2.0]]))
        assert evolve_cloud(LIN, COS, COS.point(0.0), 1.0, 1.0, B).points.tolist() == [[1.0], [2.0]]

    def test_radii_shrink(self, rng):
        P = ProcessSpec(LinearModel(0.7, 3), dt=0.1)
        S = CircleHull(TWO_PI, ((0.0, 0.0, 0.0),))
        B = PointCloud(rng.standard_normal((10, 3)))
        out = evolve_cloud(P, S, S.point(0.0), 0.0, 2.5, B)
        np.testing.assert_allclose(np.linalg.norm(out.points, axis=1),
                                   np.linalg.norm(B.points, axis=1) * math.exp(-0.7 * 2.5), atol=1e-9)


class TestSkew:
    def test_identity(self):
        z = SkewState(np.array([0.3]), COS.point(1.0))
        out = skew_step(LIN, COS, z, 0.0)
        assert out.sigma == z.sigma and out.x.tolist() == [0.3]

    def test_semigroup_linear(self):
        z = SkewState(np.array([0.9]), COS.point(2.0))
        a = skew_step(LIN, COS, skew_step(LIN, COS, z, 1.3), 2.1)
        b = skew_step(LIN, COS, z, 3.4)
        assert abs(a.x[0] - b.x[0]) <= 1e-12
        assert COS.metric(a.sigma, b.sigma) <= 1e-12

    def test_semigroup_wave(self, wave_states):
        z = SkewState(wave_states[1], TORUS.point(0.4, 1.1))
        a = skew_step(WAVE, TORUS, skew_step(WAVE, TORUS, z, 0.7), 1.2)
        b = skew_step(WAVE, TORUS, z, 1.9)
        assert W.energy_metric().dist(a.x, b.x) <= 1e-6
        assert TORUS.metric(a.sigma, b.sigma) <= 1e-12

    def test_decay_and_rotation(self):
        z = SkewState(np.array([1.0]), ZERO.point(0.5))
        out = skew_step(LIN, ZERO, z, 1.0)
        assert out.x[0] == pytest.approx(math.exp(-1.0), abs=1e-12)
        assert out.sigma.phase == pytest.approx(1.5)

    @given(st.integers(0, 50), st.integers(0, 6), st.integers(0, 6), st.integers(0, 4))
    def test_semigroup_finite_exact(self, seed, h1, h2, x0):
        FS = make_finite_system(5, 2, 3, seed)
        P, S = FS.process()
        z = SkewState(np.array([float(x0)]), ShiftWord(seed % 3))
        a = skew_step(P, S, skew_step(P, S, z, h1), h2)
        b = skew_step(P, S, z, h1 + h2)
        assert a.x.tolist() == b.x.tolist() and a.sigma == b.sigma


class TestResiduals:
    def test_endpoints_exact(self):
        sig = COS.point(0.3)
        assert cocycle_residual(LIN, COS, sig, 0.0, 0.0, 2.0, [1.0]) == 0.0
        assert cocycle_residual(LIN, COS, sig, 0.0, 2.0, 2.0, [1.0]) == 0.0
        assert translation_residual(LIN, COS, sig, 0.0, 0.0, 2.0, [1.0]) == 0.0

    def test_ordering(self):
        with pytest.raises(ValueError):
            cocycle_residual(LIN, COS, COS.point(0.0), 0.0, 3.0, 2.0, [1.0])

    @given(st.floats(0, 3), st.floats(0, 1), st.floats(0, 1), st.floats(-4, 4), st.floats(-2, 2))
    def test_linear_cocycle(self, tau, a, b, x, ph):
        s, t = tau + 3 * min(a, b), tau + 3 * max(a, b)
        assert cocycle_residual(LIN, COS, COS.point(ph % TWO_PI), tau, s, t, [x]) <= 1e-12

    @given(st.floats(-5, 5), st.floats(0, 3), st.floats(0, 3), st.floats(-4, 4))
    def test_linear_translation(self, h, tau, span, x):
        assert translation_residual(LIN, COS, COS.point(0.2), h, tau, tau + span, [x]) <= 1e-12

    def test_wave_cocycle(self, wave_states):
        r = cocycle_residual(WAVE, TORUS, TORUS.point(1.0, 2.0), 0.5, 2.25, 4.0, wave_states[2])
        assert r <= 1e-6

    def test_wave_translation(self, wave_states):
        r = translation_residual(WAVE, TORUS, TORUS.point(0.1, 0.2), 1.75, 0.5, 3.0, wave_states[1])
        assert r <= 1e-6

    def test_finite_residuals_zero(self):
        FS = make_finite_system(6, 3, 4, 11)
        P, S = FS.process()
        rep = axiom_sweep(P, S, np.arange(6.0)[:, None], 20, 12.0, seed=1)
        assert rep.max_residual == 0.0

    def test_wave_order(self, wave_states):
        ratio = order_ratio(WAVE, TORUS, TORUS.point(0.3, 0.3), 0.0, 1.0, wave_states[1], 0.02)
        assert ratio >= 16 - 4

    def test_heun_order(self, wave_states):
        P = ProcessSpec(W, dt=1e-3, order=2)
        ratio = order_ratio(P, TORUS, TORUS.point(0.3, 0.3), 0.0, 1.0, wave_states[1], 0.02)
        assert ratio >= 4 - 1


class TestPropagate:
    def test_snapshots_match_evolve(self):
        sig = [COS.point(0.0), COS.point(1.0)]
        out = propagate(LIN, COS, sig, [0.0, 0.5], np.array([[1.0], [-1.0]]), [0.0, 1.0, 2.5])
        assert out.shape == (3, 2, 1)
        assert out[0, :, 0].tolist() == [1.0, -1.0]
        assert out[2, 1, 0] == pytest.approx(evolve(LIN, COS, sig[1], 0.5, 3.0, [-1.0])[0], abs=1e-13)

    def test_thread_count_irrelevant(self, rng):
        n = 2 * CHUNK + 17
        sig = [COS.point(p) for p in rng.uniform(0, TWO_PI, n)]
        X = rng.standard_normal((n, 1))
        a = propagate(LIN, COS, sig, [0.0] * n, X, [1.0, 2.0], threads=1)
        b = propagate(LIN, COS, sig, [0.0] * n, X, [1.0, 2.0], threads=4)
        assert a.tobytes() == b.tobytes()

    def test_wave_thread_count_irrelevant(self, wave_states):
        n = CHUNK + 3
        sig = TORUS.sample(n)[:n]
        X = np.tile(wave_states[1], (n, 1))
        a = propagate(WAVE, TORUS, sig, [0.0] * n, X, [0.02], threads=1)
        b = propagate(WAVE, TORUS, sig, [0.0] * n, X, [0.02], threads=3)
        assert a.tobytes() == b.tobytes()

    def test_finite_matches_tables(self):
        FS = make_finite_system(7, 2, 5, 3)
        P, S = FS.process()
        out = propagate(P, S, [ShiftWord(2)] * 7, [1.0] * 7, np.arange(7.0)[:, None], [4.0])
        for x in range(7):
            assert out[0, x, 0] == FS.evolve(2, 1, 5, 1 << x).bit_length() - 1

    def test_lag_validation(self):
        with pytest.raises(ValueError):
            propagate(LIN, COS, [COS.point(0.0)], [0.0], np.zeros((1, 1)), [1.0, 0.5])
        with pytest.raises(ValueError):
            propagate(LIN, COS, [COS.point(0.0)], [0.0], np.zeros((1, 2)), [1.0])
