from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from uniattr.metric_sets import (
    EUCLIDEAN,
    MetricSpec,
    PointCloud,
    covering_diameter,
    eps_net,
    hausdorff,
    is_in_eps_neighborhood,
    read_cloud_csv,
    semidist,
    state_vector,
    write_cloud_csv,
)


def cloud(pts):
    return PointCloud(np.asarray(pts, float))


coords = st.floats(-10, 10, allow_nan=False, width=64)


@st.composite
def clouds(draw, dim=None, max_size=12):
    d = dim or draw(st.integers(1, 3))
    n = draw(st.integers(1, max_size))
    return PointCloud(draw(arrays(np.float64, (n, d), elements=coords)))


@st.composite
def cloud_pair(draw):
    d = draw(st.integers(1, 3))
    return draw(clouds(dim=d)), draw(clouds(dim=d))


@st.composite
def cloud_triple(draw):
    d = draw(st.integers(1, 3))
    return draw(clouds(dim=d)), draw(clouds(dim=d)), draw(clouds(dim=d))


def brute_semidist(B, C):
    return max(min(np.linalg.norm(b - c) for c in C.points) for b in B.points)


class TestTypes:
    def test_state_vector_rejects_nan(self):
        with pytest.raises(ValueError):
            state_vector([0.0, np.nan])

    def test_state_vector_rejects_empty(self):
        with pytest.raises(ValueError):
            state_vector([])

    def test_cloud_rejects_empty_and_inf(self):
        with pytest.raises(ValueError):
            PointCloud(np.zeros((0, 2)))
        with pytest.raises(ValueError):
            PointCloud(np.array([[np.inf]]))

    def test_weights_must_be_positive(self):
        with pytest.raises(ValueError):
            MetricSpec.weighted([1.0, 0.0])
        with pytest.raises(ValueError):
            MetricSpec("weighted")

    def test_weight_length_checked(self):
        m = MetricSpec.weighted([1.0, 2.0, 3.0])
        with pytest.raises(ValueError):
            semidist(cloud([[0, 0]]), cloud([[1, 1]]), m)

    def test_weighted_distance(self):
        m = MetricSpec.weighted([4.0, 1.0])
        assert m.dist(np.array([1.0, 0.0]), np.zeros(2)) == pytest.approx(2.0)


class TestSemidist:
    def test_pythagoras(self):
        assert semidist(cloud([[0, 0]]), cloud([[3, 4]])) == 5.0

    def test_subset(self):
        C = cloud([[0, 1], [2, 3], [4, 5]])
        assert semidist(cloud([[2, 3]]), C) == 0.0

    def test_two_points(self):
        assert semidist(cloud([[0], [10]]), cloud([[1], [2]])) == 8.0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            semidist(cloud([[0, 0]]), cloud([[0]]))

    @given(cloud_pair())
    def test_matches_brute_force(self, pair):
        B, C = pair
        assert semidist(B, C) == pytest.approx(brute_semidist(B, C), abs=1e-12)

    def test_blocked_path_matches(self, rng):
        B = cloud(rng.standard_normal((3000, 2)))
        C = cloud(rng.standard_normal((700, 2)))
        from scipy.spatial.distance import cdist
        assert semidist(B, C) == cdist(B.points, C.points).min(axis=1).max()


class TestHausdorff:
    def test_equal(self):
        C = cloud([[1.0], [2.0]])
        assert hausdorff(C, C) == 0.0

    def test_by_hand(self):
        assert hausdorff(cloud([[0]]), cloud([[0], [5]])) == 5.0

    @given(cloud_pair())
    def test_symmetric(self, pair):
        B, C = pair
        assert hausdorff(B, C) == hausdorff(C, B)

    @given(cloud_triple())
    def test_triangle(self, triple):
        A, B, C = triple
        assert hausdorff(A, C) <= hausdorff(A, B) + hausdorff(B, C) + 1e-9

    @given(cloud_triple())
    def test_semidist_triangle(self, triple):
        A, B, C = triple
        assert semidist(A, C) <= semidist(A, B) + hausdorff(B, C) + 1e-9


class TestNeighborhood:
    def test_inside(self):
        assert is_in_eps_neighborhood(cloud([[0.4]]), cloud([[0.0]]), 0.5)

    def test_strict(self):
        assert not is_in_eps_neighborhood(cloud([[0.5]]), cloud([[0.0]]), 0.5)

    def test_subset_any_eps(self):
        K = cloud([[0.0], [1.0]])
        assert is_in_eps_neighborhood(cloud([[1.0]]), K, 1e-300)

    @pytest.mark.parametrize("eps", [0.0, -1.0])
    def test_nonpositive_eps(self, eps):
        with pytest.raises(ValueError):
            is_in_eps_neighborhood(cloud([[0.0]]), cloud([[0.0]]), eps)


class TestEpsNet:
    def test_hand_run(self):
        C = cloud([[0.0], [0.5], [1.0], [1.5], [2.0]])
        assert eps_net(C, 0.6).points.ravel().tolist() == [0.0, 1.0, 2.0]

    def test_singleton(self):
        C = cloud([[3.0, 1.0]])
        np.testing.assert_array_equal(eps_net(C, 0.1).points, C.points)

    @given(clouds(max_size=40), st.floats(0.05, 5.0))
    def test_cover_and_separation(self, C, eps):
        M = eps_net(C, eps)
        assert semidist(C, M) < eps
        assert semidist(M, C) == 0.0
        if len(M) > 1:
            from scipy.spatial.distance import pdist
            assert pdist(M.points).min() >= eps

    def test_weighted_metric_respected(self):
        m = MetricSpec.weighted([100.0])
        C = cloud([[0.0], [0.05]])
        assert len(eps_net(C, 0.1)) == 1
        assert len(eps_net(C, 0.1, m)) == 2

    def test_large_cloud_blocks(self, rng):
        C = cloud(rng.uniform(0, 1, (2000, 2)))
        M = eps_net(C, 0.05)
        assert semidist(C, M) < 0.05


def brute_cover_1d(x, m):
    """Optimal m-cover diameter of sorted 1-D points: best split into m runs."""
    x = np.sort(x)
    n = len(x)
    best = np.inf
    for cuts in itertools.combinations(range(1, n), min(m, n) - 1):
        edges = [0, *cuts, n]
        best = min(best, max(x[b - 1] - x[a] for a, b in zip(edges[:-1], edges[1:])))
    return best


class TestCoveringDiameter:
    def test_two_clusters(self, rng):
        a = np.linspace(0, 0.1, 6)
        pts = np.concatenate([a, 10 + a])[:, None]
        assert covering_diameter(cloud(pts), 2, tol=1e-6) == pytest.approx(0.1, abs=1e-6)

    def test_singleton(self):
        assert covering_diameter(cloud([[1.0, 2.0]]), 1) == 0.0

    def test_m_at_least_n(self):
        assert covering_diameter(cloud([[0.0], [5.0]]), 2) == 0.0

    def test_m1_is_diameter(self, rng):
        P = rng.standard_normal((30, 3))
        from scipy.spatial.distance import pdist
        assert covering_diameter(cloud(P), 1) == pytest.approx(pdist(P).max(), abs=1e-12)

    @given(arrays(np.float64, st.integers(2, 8), elements=st.floats(0, 10)), st.integers(1, 3))
    def test_upper_bounds_optimal_cover_1d(self, x, m):
        val = covering_diameter(cloud(x[:, None]), m, tol=1e-9)
        assert val >= brute_cover_1d(x, m) - 1e-9

    @given(clouds(max_size=15), st.integers(1, 5))
    def test_monotone_in_m(self, C, m):
        assert covering_diameter(C, m + 1) <= covering_diameter(C, m) + 1e-12

    def test_rejects_bad_args(self):
        with pytest.raises(ValueError):
            covering_diameter(cloud([[0.0]]), 0)
        with pytest.raises(ValueError):
            covering_diameter(cloud([[0.0]]), 1, tol=0.0)


class TestCsv:
    @given(clouds())
    def test_round_trip_exact(self, C):
        back = read_cloud_csv(write_cloud_csv(C))
        np.testing.assert_array_equal(back.points, C.points)

    def test_header(self):
        assert write_cloud_csv(cloud([[1.5, 2.0]])).startswith("dim,2\n")

    def test_rejects_ragged(self):
        with pytest.raises(ValueError, match="ragged"):
            read_cloud_csv("dim,2\n1.0,2.0\n3.0\n")

    def test_rejects_missing_header(self):
        with pytest.raises(ValueError):
            read_cloud_csv("1.0,2.0\n3.0,4.0\n")

    def test_file_round_trip(self, tmp_path, rng):
        C = cloud(rng.standard_normal((5, 4)))
        write_cloud_csv(C, tmp_path / "c.csv")
        np.testing.assert_array_equal(read_cloud_csv(tmp_path / "c.csv").points, C.points)
