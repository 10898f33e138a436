"""Exact attractor objects for finite integer-time systems.

States are 0..n-1, subsets are int bitmasks.  The symbol space is the set of
cyclic shifts of one periodic word; symbol i reads letter word[(i + t) % p]
at time t, and

    U_i(t, tau) x = F_{word[(i+t-1) % p]} o ... o F_{word[(i+tau) % p]} (x).

By the translation identity every uniform quantity only depends on the
"current phase" q = (i + t) % p, so the reachable sets from C are tracked as
a p-tuple H_s with H_{s+1}[q+1] = F_{word[q]}(H_s[q]).
"""

from __future__ import annotations

import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .process_core import FiniteMaps, ProcessSpec
from .symbol_space import FiniteShift

MAX_N, MAX_P, MAX_K = 10, 6, 3


@dataclass(frozen=True)
class FiniteSystem:
    n: int
    k: int
    word: tuple[int, ...]
    tables: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        if self.n < 1 or self.k < 1:
            raise ValueError("n and k must be >= 1")
        if len(self.word) < 1:
            raise ValueError("word period must be >= 1")
        if len(self.tables) != self.k or any(len(t) != self.n for t in self.tables):
            raise ValueError("need one table of length n per letter")
        if any(not 0 <= v < self.n for t in self.tables for v in t):
            raise ValueError("table entries must lie in [0, n)")
        if any(not 0 <= a < self.k for a in self.word):
            raise ValueError("word letters must lie in [0, k)")
        object.__setattr__(self, "word", tuple(int(a) for a in self.word))
        object.__setattr__(self, "tables", tuple(tuple(int(v) for v in t) for t in self.tables))

    @property
    def p(self) -> int:
        return len(self.word)

    @property
    def full(self) -> int:
        return (1 << self.n) - 1

    @cached_property
    def images(self) -> np.ndarray:
        """images[a, mask] = bitmask of F_a(mask)."""
        out = np.zeros((self.k, 1 << self.n), dtype=np.int64)
        for a, tab in enumerate(self.tables):
            row = out[a]
            for m in range(1, 1 << self.n):
                low = (m & -m).bit_length() - 1
                row[m] = row[m & (m - 1)] | (1 << tab[low])
        return out

    def image(self, a: int, mask: int) -> int:
        return int(self.images[a, mask])

    def step(self, H: tuple[int, ...]) -> tuple[int, ...]:
        p, w = self.p, self.word
        return tuple(self.image(w[(q - 1) % p], H[(q - 1) % p]) for q in range(p))

    def evolve(self, sigma: int, tau: int, t: int, mask: int) -> int:
        """U_sigma(t, tau) applied to a subset."""
        if t < tau:
            raise ValueError("need t >= tau")
        for s in range(tau, t):
            mask = self.image(self.word[(sigma + s) % self.p], mask)
        return mask

    def period_map(self, sigma: int, t: int) -> tuple[int, ...]:
        """Table of U_sigma(t, t - p)."""
        x = list(range(self.n))
        for s in range(t - self.p, t):
            tab = self.tables[self.word[(sigma + s) % self.p]]
            x = [tab[v] for v in x]
        return tuple(x)

    def process(self) -> tuple[ProcessSpec, FiniteShift]:
        return ProcessSpec(FiniteMaps(self.tables), dt=1.0), FiniteShift(self.k, self.word)

    def to_dict(self) -> dict:
        return {"n": self.n, "k": self.k, "word": list(self.word), "tables": [list(t) for t in self.tables]}


def make_finite_system(n: int, k: int, p: int, seed: int) -> FiniteSystem:
    if min(n, k, p) < 1:
        raise ValueError("n, k, p must be >= 1")
    rng = np.random.default_rng([seed, n, k, p])
    tables = rng.integers(0, n, size=(k, n))
    word = rng.integers(0, k, size=p)
    return FiniteSystem(n, k, tuple(word.tolist()), tuple(map(tuple, tables.tolist())))


def random_finite_system(seed: int) -> FiniteSystem:
    """Sizes drawn from the seed within the verification bounds."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, MAX_N + 1))
    k = int(rng.integers(1, MAX_K + 1))
    p = int(rng.integers(1, MAX_P + 1))
    return make_finite_system(n, k, p, seed)


def to_set(mask: int) -> list[int]:
    return [i for i in range(mask.bit_length()) if mask >> i & 1]


def to_mask(states) -> int:
    m = 0
    for x in states:
        m |= 1 << int(x)
    return m


# ------------------------------------------------------------- exact sets

def _layers(FS: FiniteSystem, start: tuple[int, ...]) -> tuple[list[tuple[int, ...]], int]:
    """Iterate H until a repeat; returns (history, index where the cycle starts)."""
    seen: dict[tuple[int, ...], int] = {}
    hist = []
    H = start
    while H not in seen:
        seen[H] = len(hist)
        hist.append(H)
        H = FS.step(H)
    return hist, seen[H]


def exact_omega(FS: FiniteSystem, C, start_phases=None) -> int:
    """Uniform omega-limit of C over all symbols and initial times.

    ``start_phases`` restricts the phases (sigma + tau) % p the evolution may
    start from; by default every phase is allowed.  The layer
    union_{s >= h} H_s is constant once h reaches the cycle of H, so the
    nested intersection equals the union over one cycle.
    """
    C = C if isinstance(C, int) else to_mask(C)
    if C == 0:
        raise ValueError("C must be nonempty")
    ph = range(FS.p) if start_phases is None else set(start_phases)
    hist, c0 = _layers(FS, tuple(C if q in ph else 0 for q in range(FS.p)))
    out = 0
    for H in hist[c0:]:
        for m in H:
            out |= m
    return out


def exact_Astar(FS: FiniteSystem) -> int:
    return exact_omega(FS, FS.full)


def exact_kernel_sections(FS: FiniteSystem, sigma: int, t: int) -> int:
    """Intersection over T of U_sigma(t, t - T) X: the stable image of the
    period map U_sigma(t, t - p)."""
    M = FS.period_map(sigma % FS.p, t)
    cur = FS.full
    while True:
        nxt = to_mask(M[v] for v in to_set(cur))
        if nxt == cur:
            return cur
        cur = nxt


def exact_skew_attractor(FS: FiniteSystem) -> set[tuple[int, int]]:
    """Eventual image of X x Sigma under S(1)(x, i) = (F_{word[i]} x, i + 1)."""
    H = tuple(FS.full for _ in range(FS.p))
    while True:
        nxt = FS.step(H)
        if nxt == H:
            break
        H = nxt
    return {(x, i) for i in range(FS.p) for x in to_set(H[i])}


def omega_all_subsets(FS: FiniteSystem) -> np.ndarray:
    """omega(C) for every mask C = 1 .. 2^n - 1, computed in one vectorized
    pass without cycle detection.

    Each p-step map is a self-map of [n]; after n periods every image lies in
    its recurrent part, where it acts as a permutation whose order divides
    L = lcm of its cycle lengths.  So H_s is periodic for s >= n p with
    period dividing p L, and the union over that window is exact.
    """
    p, n = FS.p, FS.n
    L = 1
    for q in range(p):
        L = math.lcm(L, _cycle_lcm(FS.period_map(0, q)))
    masks = np.arange(1, 1 << n, dtype=np.int64)
    H = np.repeat(masks[:, None], p, axis=1)
    out = np.zeros_like(masks)
    start = n * p
    for s in range(start + p * L):
        if s >= start:
            out |= np.bitwise_or.reduce(H, axis=1)
        nxt = np.empty_like(H)
        for q in range(p):
            nxt[:, (q + 1) % p] = FS.images[FS.word[q], H[:, q]]
        H = nxt
    return out


def _cycle_lcm(tab: tuple[int, ...]) -> int:
    n = len(tab)
    x = list(range(n))
    for _ in range(n):
        x = [tab[v] for v in x]
    rec = set(x)
    L = 1
    for v in rec:
        c, w = 1, tab[v]
        while w != v:
            w, c = tab[w], c + 1
        L = math.lcm(L, c)
    return L


# -------------------------------------------------------------- checklist

def _cycle_sets(FS: FiniteSystem) -> tuple[list[tuple[int, ...]], int]:
    return _layers(FS, tuple(FS.full for _ in range(FS.p)))


def is_uniformly_attracting(FS: FiniteSystem, K: int, hist=None, c0=None) -> bool:
    """With the discrete metric, K attracts X uniformly iff every reachable
    set is inside K from some lag on, i.e. on the whole cycle of H."""
    if hist is None:
        hist, c0 = _cycle_sets(FS)
    return all(m & ~K == 0 for H in hist[c0:] for m in H)


def entering_lags(FS: FiniteSystem, K: int) -> list[int | None]:
    """Per starting phase, the first lag after which U(tau + s, tau) X stays in K."""
    hist, c0 = _cycle_sets(FS)
    out = []
    for ph in range(FS.p):
        # start phase ph at lag s sits at slot (ph + s) % p of hist[s]
        def inside(s):
            return hist[s][(ph + s) % FS.p] & ~K == 0
        cyc = range(c0, len(hist))
        if not all(inside(s) for s in cyc) or not _phase_stable(FS, hist, c0, ph, K):
            out.append(None)
            continue
        last_bad = max((s for s in range(c0) if not inside(s)), default=-1)
        out.append(last_bad + 1)
    return out


def _phase_stable(FS, hist, c0, ph, K) -> bool:
    # after one full cycle of H the slot pattern repeats up to lcm with p
    per = len(hist) - c0
    for s in range(c0, c0 + per * FS.p):
        idx = c0 + (s - c0) % per
        if hist[idx][(ph + s) % FS.p] & ~K:
            return False
    return True


def admissible_limit_set(FS: FiniteSystem, xs, sigmas, taus, a: int, b: int) -> int:
    """Limit set of y_j = U_{sigma_j}(tau_j + a j + b, tau_j) x_j with the
    data (x_j, sigma_j, tau_j) periodic in j with period r.

    A single-point orbit has preperiod <= n p and period <= n p; for j large
    enough that a j + b exceeds n p, every residue class of j is periodic,
    so the values over r n p consecutive such j are exactly those recurring.
    """
    if a < 1:
        raise ValueError("lag must grow: a >= 1")
    r = len(xs)
    np_ = FS.n * FS.p
    j0 = max(0, -(-(np_ - b) // a))
    out = 0
    for j in range(j0, j0 + r * np_ + r):
        i = j % r
        out |= FS.evolve(sigmas[i], taus[i], taus[i] + a * j + b, 1 << xs[i])
    return out


def verify_theory(FS: FiniteSystem, n_sequences: int = 8, seed: int = 0,
                  max_n: int = MAX_N, max_p: int = MAX_P, max_k: int = MAX_K) -> dict:
    """Exhaustive checklist; returns claim id -> {"pass": bool, "witness": ...}."""
    if FS.n > max_n or FS.p > max_p or FS.k > max_k:
        raise ValueError(f"system too large for exhaustive checks (n={FS.n}, p={FS.p}, k={FS.k})")
    cert: dict[str, dict] = {}
    A = exact_Astar(FS)
    hist, c0 = _cycle_sets(FS)

    # attraction of A* with its entering-lag table
    lags = entering_lags(FS, A)
    cert["attracting"] = {"pass": all(l is not None for l in lags) and is_uniformly_attracting(FS, A, hist, c0),
                          "witness": {"entering_lags": lags}}

    # minimality by search over every subset
    attracting = [K for K in range(1 << FS.n) if is_uniformly_attracting(FS, K, hist, c0)]
    not_super = [to_set(K) for K in attracting if K & A != A]
    inter = FS.full
    for K in attracting:
        inter &= K
    cert["minimal"] = {"pass": not not_super and inter == A,
                       "witness": {"attracting_sets": len(attracting), "counterexamples": not_super[:3],
                                   "intersection": to_set(inter)}}
    proper = [to_set(K) for K in attracting if K != A and K & A == K]
    cert["no_proper_attracting_subset"] = {"pass": not proper, "witness": proper[:3]}

    # omega over every C against A*
    omegas = omega_all_subsets(FS)
    union = int(np.bitwise_or.reduce(omegas))
    escaped = [(to_set(c + 1), to_set(int(o))) for c, o in enumerate(omegas) if int(o) & ~A]
    cert["omega_subsets"] = {"pass": not escaped and union == A and int(omegas[-1]) == A,
                             "witness": {"union": to_set(union), "escapes": escaped[:3]}}
    cert["omega_invariant"] = {"pass": exact_omega(FS, A) == A, "witness": to_set(exact_omega(FS, A))}

    # limit sets of admissible sequences
    rng = np.random.default_rng([seed, FS.n, FS.p, FS.k, 7])
    bad = []
    for _ in range(n_sequences):
        r = int(rng.integers(1, 4))
        xs = rng.integers(0, FS.n, r).tolist()
        sig = rng.integers(0, FS.p, r).tolist()
        taus = rng.integers(-2 * FS.p, 2 * FS.p + 1, r).tolist()
        a, b = int(rng.integers(1, 4)), int(rng.integers(0, 5))
        L = admissible_limit_set(FS, xs, sig, taus, a, b)
        if L == 0 or L & ~A:
            bad.append({"x": xs, "sigma": sig, "tau": taus, "a": a, "b": b, "limit": to_set(L)})
    cert["limit_sets"] = {"pass": not bad, "witness": {"sequences": n_sequences, "failures": bad[:2]}}

    # kernel sections: invariance, union, skew projections
    K = [[exact_kernel_sections(FS, i, t) for t in range(FS.p + 1)] for i in range(FS.p)]
    inv_bad = [(i, t) for i in range(FS.p) for t in range(FS.p)
               if FS.image(FS.word[(i + t) % FS.p], K[i][t]) != K[i][t + 1]]
    cert["kernel_invariance"] = {"pass": not inv_bad, "witness": inv_bad[:3]}
    kunion = 0
    for i in range(FS.p):
        kunion |= K[i][0]
    cert["kernel_union"] = {"pass": kunion == A and all(K[i][0] for i in range(FS.p)),
                            "witness": {"union": to_set(kunion), "A_star": to_set(A)}}
    skew = exact_skew_attractor(FS)
    pi1 = to_mask(x for x, _ in skew)
    pi2 = {i for _, i in skew}
    fibers_ok = all(to_mask(x for x, j in skew if j == i) == K[i][0] for i in range(FS.p))
    cert["skew_projections"] = {"pass": pi1 == A and pi2 == set(range(FS.p)) and fibers_ok,
                                "witness": {"pi1": to_set(pi1), "pi2": sorted(pi2)}}

    # subfamilies: fixed initial time is a genuine subset, all initial times recover A*
    sub_bad = []
    for r in range(1, FS.p + 1):
        for fam in itertools.combinations(range(FS.p), r):
            fixed = exact_omega(FS, FS.full, start_phases=fam)
            swept = exact_omega(FS, FS.full, start_phases={(i + t) % FS.p for i in fam for t in range(FS.p)})
            if fixed & ~swept or swept & ~A or swept != A:
                sub_bad.append({"family": list(fam), "fixed_tau": to_set(fixed), "all_tau": to_set(swept)})
    cert["subfamily"] = {"pass": not sub_bad, "witness": sub_bad[:2]}

    # structural facts that hold for every finite system
    cert["closed_maps"] = {"pass": True, "witness": "every map of a finite discrete space is closed"}
    cert["dense_subfamily"] = {"pass": True, "witness": "Sigma is finite, so the only dense subfamily is Sigma"}
    return cert


def certificate_passed(cert: dict) -> bool:
    return all(c["pass"] for c in cert.values())


def _verify_seed(seed: int) -> dict:
    FS = random_finite_system(seed)
    cert = verify_theory(FS, seed=seed)
    return {"seed": seed, "system": FS.to_dict(), "pass": certificate_passed(cert), "claims": cert}


def verify_many(seeds, workers: int = 1) -> list[dict]:
    """Certificates for ``random_finite_system(seed)``, in seed order."""
    seeds = list(seeds)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_verify_seed, seeds, chunksize=16))
    return [_verify_seed(s) for s in seeds]


def certificate_json(cert: dict) -> str:
    return json.dumps(cert, sort_keys=True, indent=1)
