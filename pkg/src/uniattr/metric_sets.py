"""Set geometry on finite point clouds.

Clouds stand in for bounded subsets of the phase space.  Distances are
(weighted) Euclidean; the weighted kind is how the energy norm and the weak
norm of the wave model are expressed on Galerkin coefficients.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial.distance import cdist

# rows per distance block; keeps block x |C| matrices small
_BLOCK = 1024


def state_vector(coords: Iterable[float]) -> np.ndarray:
    """Validate and return a 1-D float state."""
    x = np.asarray(list(coords) if not isinstance(coords, np.ndarray) else coords, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("a state vector must be a nonempty 1-D sequence")
    if not np.all(np.isfinite(x)):
        raise ValueError("state vector has non-finite entries")
    return x


@dataclass(frozen=True)
class MetricSpec:
    """Euclidean or diagonally weighted Euclidean distance."""

    kind: str = "euclidean"
    weights: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("euclidean", "weighted"):
            raise ValueError(f"unknown metric kind {self.kind!r}")
        if self.kind == "weighted":
            if not self.weights:
                raise ValueError("weighted metric needs weights")
            w = np.asarray(self.weights, dtype=float)
            if np.any(~np.isfinite(w)) or np.any(w <= 0):
                raise ValueError("metric weights must be finite and strictly positive")
            object.__setattr__(self, "weights", tuple(float(v) for v in w))
        elif self.weights is not None:
            raise ValueError("euclidean metric takes no weights")

    @classmethod
    def weighted(cls, weights: Sequence[float]) -> "MetricSpec":
        return cls("weighted", tuple(weights))

    def scale(self, pts: np.ndarray) -> np.ndarray:
        """Map points so that plain Euclidean distance realizes this metric."""
        if self.kind == "euclidean":
            return pts
        w = np.sqrt(np.asarray(self.weights))
        if pts.shape[-1] != w.size:
            raise ValueError(f"metric has {w.size} weights but points have dim {pts.shape[-1]}")
        return pts * w

    def dist(self, x: np.ndarray, y: np.ndarray) -> float:
        d = self.scale(np.atleast_2d(np.asarray(x, float))) - self.scale(np.atleast_2d(np.asarray(y, float)))
        return float(np.sqrt(np.sum(d * d)))

    def norm(self, pts: np.ndarray) -> np.ndarray:
        """Row-wise norms of an (N, d) array."""
        s = self.scale(np.atleast_2d(pts))
        return np.sqrt(np.sum(s * s, axis=1))


EUCLIDEAN = MetricSpec()


@dataclass
class PointCloud:
    """A finite, nonempty, homogeneous sample of a set in X."""

    points: np.ndarray
    label: str = ""

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2 or pts.shape[0] == 0 or pts.shape[1] == 0:
            raise ValueError("a point cloud must be a nonempty (N, d) array")
        if not np.all(np.isfinite(pts)):
            raise ValueError("point cloud has non-finite coordinates")
        self.points = pts

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]

    @classmethod
    def from_points(cls, pts: Iterable[Sequence[float]], label: str = "") -> "PointCloud":
        return cls(np.array([list(p) for p in pts], dtype=float), label)

    def union(self, other: "PointCloud", label: str = "") -> "PointCloud":
        _check_dims(self, other)
        return PointCloud(np.vstack([self.points, other.points]), label or self.label)


def _check_dims(B: PointCloud, C: PointCloud) -> None:
    if B.dim != C.dim:
        raise ValueError(f"dimension mismatch: {B.dim} vs {C.dim}")


def _min_dists(B: np.ndarray, C: np.ndarray) -> np.ndarray:
    """For each row of B, the distance to the nearest row of C (already scaled)."""
    out = np.empty(B.shape[0])
    step = max(1, (_BLOCK * _BLOCK) // max(1, C.shape[0]))
    for lo in range(0, B.shape[0], step):
        out[lo:lo + step] = cdist(B[lo:lo + step], C).min(axis=1)
    return out


def semidist(B: PointCloud, C: PointCloud, m: MetricSpec = EUCLIDEAN) -> float:
    """Hausdorff semidistance sup_{x in B} dist(x, C)."""
    _check_dims(B, C)
    return float(_min_dists(m.scale(B.points), m.scale(C.points)).max())


def hausdorff(B: PointCloud, C: PointCloud, m: MetricSpec = EUCLIDEAN) -> float:
    return max(semidist(B, C, m), semidist(C, B, m))


def is_in_eps_neighborhood(B: PointCloud, K: PointCloud, eps: float, m: MetricSpec = EUCLIDEAN) -> bool:
    """True iff B lies in the open eps-neighborhood of K."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    return semidist(B, K, m) < eps


def eps_net(C: PointCloud, eps: float, m: MetricSpec = EUCLIDEAN) -> PointCloud:
    """Greedy eps-net of C in input order.

    A point is kept when its distance to every kept point is >= eps, so the
    result is eps-separated and every dropped point lies strictly within eps
    of a kept one; a single pass therefore already leaves nothing uncovered.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    pts = m.scale(C.points)
    n = pts.shape[0]
    chosen = np.empty(n, dtype=np.intp)
    count = 0
    block = 256
    for lo in range(0, n, block):
        cand = pts[lo:lo + block]
        if count:
            covered = _min_dists(cand, pts[chosen[:count]]) < eps
        else:
            covered = np.zeros(cand.shape[0], bool)
        start = count
        for j in np.flatnonzero(~covered):
            if count > start:
                d = pts[chosen[start:count]] - cand[j]
                if np.sqrt(np.min(np.sum(d * d, axis=1))) < eps:
                    continue
            chosen[count] = lo + j
            count += 1
    return PointCloud(C.points[chosen[:count]].copy(), C.label)


def _greedy_clusters(D: np.ndarray, d: float, limit: int) -> tuple[int, float]:
    """Greedy complete-linkage cover: a point joins the first cluster whose
    members are all within d of it.  Returns (cluster count, largest realized
    cluster diameter); stops early once the count exceeds ``limit``."""
    n = D.shape[0]
    far = np.empty((limit + 1, n))  # far[c, i] = max distance from i to cluster c
    diam = np.zeros(limit + 1)
    ncl = 0
    for i in range(n):
        if ncl:
            ok = np.flatnonzero(far[:ncl, i] <= d)
            if ok.size:
                c = ok[0]
                diam[c] = max(diam[c], far[c, i])
                np.maximum(far[c], D[i], out=far[c])
                continue
        if ncl == limit:
            return limit + 1, np.inf
        far[ncl] = D[i]
        ncl += 1
    return ncl, float(diam[:ncl].max())


def covering_diameter(C: PointCloud, m_balls: int, metric: MetricSpec = EUCLIDEAN, tol: float = 1e-6) -> float:
    """Smallest d (bisection to ``tol``) whose greedy cover of C needs at most
    ``m_balls`` sets of diameter <= d.

    An upper-bound proxy for the Kuratowski measure restricted to
    m-element covers.  Every cover with j <= m_balls sets is admissible, so
    the result is the minimum over j, which makes it non-increasing in
    ``m_balls``.  The reported value is the largest diameter actually
    realized by the winning cover, hence exactly the cloud diameter when
    ``m_balls == 1``.
    """
    if m_balls < 1:
        raise ValueError("m_balls must be >= 1")
    if not tol > 0:
        raise ValueError("tol must be positive")
    n = len(C)
    if m_balls >= n:
        return 0.0
    s = metric.scale(C.points)
    D = cdist(s, s)
    diameter = float(D.max())
    best = diameter
    for j in range(1, m_balls + 1):
        if _greedy_clusters(D, 0.0, j)[0] <= j:
            return 0.0
        # at d = diameter everything joins the first cluster
        lo, hi, hi_real = 0.0, diameter, diameter
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            ncl, realized = _greedy_clusters(D, mid, j)
            if ncl <= j:
                hi, hi_real = mid, realized
            else:
                lo = mid
        best = min(best, hi_real)
    return best


def write_cloud_csv(C: PointCloud, path: str | Path | None = None) -> str:
    """Serialize as ``dim,<d>`` followed by one point per row (repr floats)."""
    buf = io.StringIO()
    buf.write(f"dim,{C.dim}\n")
    for row in C.points:
        buf.write(",".join(repr(float(v)) for v in row))
        buf.write("\n")
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def read_cloud_csv(source: str | Path, label: str = "") -> PointCloud:
    """Parse the CSV produced by :func:`write_cloud_csv`; ragged rows are rejected."""
    p = Path(source) if not (isinstance(source, str) and "\n" in source) else None
    text = p.read_text() if p is not None else source
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or len(rows[0]) != 2 or rows[0][0].strip() != "dim":
        raise ValueError("cloud CSV must start with a 'dim,<d>' header")
    d = int(rows[0][1])
    pts = []
    for k, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != d:
            raise ValueError(f"ragged row {k}: expected {d} fields, got {len(row)}")
        pts.append([float(v) for v in row])
    return PointCloud(np.array(pts, dtype=float).reshape(-1, d), label)
