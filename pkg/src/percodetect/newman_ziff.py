"""Monte Carlo engine for the distribution of the maximum cluster size.

One sweep trial inserts all lattice sites in a uniformly random order into a
union-find structure (path halving + union by size) and records the running
maximum cluster size after every insertion.  Because that running maximum is
nondecreasing along a trial, a trial is fully described by the *first*
occupied count at which each size t is reached; the engine accumulates those
first-crossing counts over trials.  Condition on an occupied count n and you
get the fixed-n ("microcanonical") distribution of T; mix over n with
Binomial(N^2, p) weights and you get the occupation-probability-p
("canonical") survival function

    S_p(t) = P(T >= t) = sum_n Binom(n; N^2, p) * Phat(T >= t | n),

from which critical values c0 = min{t : S_p(t) <= alpha} are read off.

Storage modes
-------------
dense      exact first-crossing counts, shape (N^2+1, N^2+1) int32; the
           default while that fits the memory budget (N <= ~90 at 256 MiB).
bucketed   falls back automatically beyond the budget: thresholds get unit
           resolution up to ``t_dense`` and geometric buckets after, occupied
           counts are coarsened to ~2048 right-edge checkpoints.  Exceedance
           estimates are exact at the checkpoints and rounded *up* in between,
           so critical values err on the conservative side.  Both grids can be
           overridden per sweep.

Trials are independent and mergeable: trial i draws its RNG stream from
(master seed, i), so partitioning trials across workers (or merging separately
computed tables) reproduces the single-worker output bit for bit.

Binary container ("NZMC1", little-endian)
-----------------------------------------
offset  field
0       magic  b"NZMC1\\0"
6       version u16 (= 1)
8       kind u8: 0 dense table, 1 bucketed table, 2 survival distribution
9       array count u8
10      reserved u16
12      side u32
16      trials u64
24      seed u64
32      p float64 (distributions; 0 otherwise)
40      arrays, each: dtype u8 (0 = int32, 1 = int64, 2 = float64),
        ndim u8, dims u32 * ndim, then raw row-major data

CSV exports: survival functions use two columns (t, survival); the 2-D micro
tables need three (n, t, count) — the flat two-column layout cannot hold them.
"""

from __future__ import annotations

import math
import struct
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from io import StringIO
from pathlib import Path

import numpy as np
from numba import njit
from scipy.special import gammaln

from ._rng import shuffle, trial_seed, xoshiro_init
from .lattice import SiteMask, TriangularLattice

DEFAULT_MEMORY_BUDGET = 256 * 1024 * 1024
WEIGHT_TRUNCATION = 1e-15  # binomial weights below this fraction of the peak are dropped

_MAGIC = b"NZMC1\0"
_DTYPES = {0: "<i4", 1: "<i8", 2: "<f8"}
_DTYPE_CODES = {np.dtype(np.int32): 0, np.dtype(np.int64): 1, np.dtype(np.float64): 2}


# --------------------------------------------------------------------------- kernels


@njit(cache=True, nogil=True, inline="always")
def _insert_site(s, nbr, deg, parent, csize, active):
    """Activate site s, union it with active neighbors, return its cluster size."""
    parent[s] = s
    csize[s] = 1
    active[s] = 1
    root = s
    for k in range(deg[s]):
        q = nbr[s, k]
        if active[q] == 1:
            a = root
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            b = q
            while parent[b] != b:
                parent[b] = parent[parent[b]]
                b = parent[b]
            if a != b:
                if csize[a] < csize[b]:
                    a, b = b, a
                parent[b] = a
                csize[a] += csize[b]
            root = a
    while parent[root] != root:
        root = parent[root]
    return csize[root]


@njit(cache=True, nogil=True)
def _sweep_dense(nbr, deg, trial_lo, trial_hi, master_seed, first_counts):
    m = deg.shape[0]
    parent = np.empty(m, dtype=np.int32)
    csize = np.empty(m, dtype=np.int32)
    order = np.empty(m, dtype=np.int32)
    active = np.empty(m, dtype=np.uint8)
    state = np.empty(4, dtype=np.uint64)
    for trial in range(trial_lo, trial_hi):
        xoshiro_init(trial_seed(master_seed, trial), state)
        for i in range(m):
            order[i] = i
            active[i] = 0
        shuffle(order, state)
        cur = 0
        for n in range(m):
            sz = _insert_site(order[n], nbr, deg, parent, csize, active)
            if sz > cur:
                for t in range(cur + 1, sz + 1):
                    first_counts[t, n + 1] += 1
                cur = sz


@njit(cache=True, nogil=True)
def _sweep_bucketed(nbr, deg, trial_lo, trial_hi, master_seed, t_edges, n_edges, first_counts):
    m = deg.shape[0]
    parent = np.empty(m, dtype=np.int32)
    csize = np.empty(m, dtype=np.int32)
    order = np.empty(m, dtype=np.int32)
    active = np.empty(m, dtype=np.uint8)
    state = np.empty(4, dtype=np.uint64)
    n_t = t_edges.shape[0]
    for trial in range(trial_lo, trial_hi):
        xoshiro_init(trial_seed(master_seed, trial), state)
        for i in range(m):
            order[i] = i
            active[i] = 0
        shuffle(order, state)
        cur = 0
        j = 0
        for n in range(m):
            sz = _insert_site(order[n], nbr, deg, parent, csize, active)
            if sz > cur:
                cur = sz
                while j < n_t and cur >= t_edges[j]:
                    k = np.searchsorted(n_edges, n + 1)
                    first_counts[j, k] += 1
                    j += 1
                if j == n_t:
                    break


@njit(cache=True, nogil=True)
def _sweep_two_region(
    nbr, deg, inner_ids, outer_ids, thresholds, trial_lo, trial_hi, master_seed, first_counts
):
    m = deg.shape[0]
    n_in_max = inner_ids.shape[0]
    n_out_max = outer_ids.shape[0]
    n_t = thresholds.shape[0]
    parent = np.empty(m, dtype=np.int32)
    csize = np.empty(m, dtype=np.int32)
    active = np.empty(m, dtype=np.uint8)
    perm_in = np.empty(n_in_max, dtype=np.int32)
    perm_out = np.empty(n_out_max, dtype=np.int32)
    state = np.empty(4, dtype=np.uint64)
    for trial in range(trial_lo, trial_hi):
        xoshiro_init(trial_seed(master_seed, trial), state)
        for i in range(n_in_max):
            perm_in[i] = inner_ids[i]
        for i in range(n_out_max):
            perm_out[i] = outer_ids[i]
        shuffle(perm_in, state)
        shuffle(perm_out, state)
        for n_in in range(n_in_max + 1):
            for i in range(m):
                active[i] = 0
            cur = 0
            for i in range(n_in):
                sz = _insert_site(perm_in[i], nbr, deg, parent, csize, active)
                if sz > cur:
                    cur = sz
            j = 0
            while j < n_t and cur >= thresholds[j]:
                first_counts[n_in, j, 0] += 1
                j += 1
            if j == n_t:
                continue
            for k in range(n_out_max):
                sz = _insert_site(perm_out[k], nbr, deg, parent, csize, active)
                if sz > cur:
                    cur = sz
                    while j < n_t and cur >= thresholds[j]:
                        first_counts[n_in, j, k + 1] += 1
                        j += 1
                    if j == n_t:
                        break


# --------------------------------------------------------------------------- weights


def binomial_weights(m: int, p: float) -> np.ndarray:
    """Binom(n; m, p) for n = 0..m, log-gamma in log space, peak-truncated."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    w = np.zeros(m + 1)
    if p == 0.0:
        w[0] = 1.0
        return w
    if p == 1.0:
        w[m] = 1.0
        return w
    n = np.arange(m + 1, dtype=np.float64)
    logw = (
        gammaln(m + 1)
        - gammaln(n + 1)
        - gammaln(m - n + 1)
        + n * math.log(p)
        + (m - n) * math.log1p(-p)
    )
    w = np.exp(logw - logw.max())
    w[w < WEIGHT_TRUNCATION] = 0.0
    # rescale back to an (almost exactly 1) total; truncation error < 1e-12
    w *= math.exp(logw.max())
    return w


# --------------------------------------------------------------------------- types


@dataclass
class MaxClusterDistribution:
    """Survival function S(t) = P(T >= t) of the maximum cluster size."""

    side: int
    p: float
    trials: int
    survival: np.ndarray = field(repr=False)  # float64, index t = 0 .. N^2 + 1

    def __post_init__(self) -> None:
        m = self.side * self.side
        s = np.asarray(self.survival, dtype=np.float64)
        if s.shape != (m + 2,):
            raise ValueError(f"survival must have length N^2 + 2 = {m + 2}")
        self.survival = s

    def critical_value(self, alpha: float) -> int:
        return critical_value(self, alpha)

    def quantile(self, q: float) -> int:
        """Smallest t with P(T >= t) <= 1 - q (e.g. q = 0.95)."""
        return self.critical_value(1.0 - q)

    def to_csv(self) -> str:
        buf = StringIO()
        buf.write("t,survival\n")
        for t, s in enumerate(self.survival):
            buf.write(f"{t},{float(s)!r}\n")
        return buf.getvalue()

    def to_bytes(self) -> bytes:
        return _pack(2, self.side, self.trials, 0, self.p, [self.survival])

    @classmethod
    def from_bytes(cls, data: bytes) -> "MaxClusterDistribution":
        kind, side, trials, _seed, p, arrays = _unpack(data)
        if kind != 2:
            raise ValueError("not a distribution container")
        return cls(side, p, trials, arrays[0])


def critical_value(dist: MaxClusterDistribution, alpha: float) -> int:
    """c0 = min{t : S(t) <= alpha}; rejection region {T >= c0} has size <= alpha."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    c0 = int(np.argmax(dist.survival <= alpha))
    m = dist.side * dist.side
    if c0 > m:
        warnings.warn(
            f"survival never drops to alpha = {alpha}; critical value saturates at N^2 + 1",
            RuntimeWarning,
            stacklevel=2,
        )
    return c0


@dataclass
class MicroCanonicalTable:
    """First-crossing counts of the running maximum, per occupied count.

    dense mode: first_counts[t, n] = number of trials whose running maximum
    first reached >= t at occupied count n.  bucketed mode: rows follow
    t_edges, columns follow right-edge occupied-count checkpoints n_edges.
    """

    side: int
    trials: int
    seed: int
    mode: str  # "dense" | "bucketed"
    first_counts: np.ndarray = field(repr=False)
    t_edges: np.ndarray | None = field(default=None, repr=False)
    n_edges: np.ndarray | None = field(default=None, repr=False)

    @property
    def site_count(self) -> int:
        return self.side * self.side

    # -- microcanonical queries ------------------------------------------------

    def exceedance(self, t: int) -> np.ndarray:
        """Phat(T >= t | n) on the stored n grid (exact at grid points)."""
        m = self.site_count
        if t <= 0:
            grid = m + 1 if self.mode == "dense" else len(self.n_edges)
            return np.ones(grid)
        if t > m:
            grid = m + 1 if self.mode == "dense" else len(self.n_edges)
            return np.zeros(grid)
        if self.mode == "dense":
            return np.cumsum(self.first_counts[t]) / self.trials
        j = int(np.searchsorted(self.t_edges, t, side="right")) - 1
        if j < 0:  # t below the first edge: bounded above by 1
            return np.ones(len(self.n_edges))
        return np.cumsum(self.first_counts[j]) / self.trials

    def canonical(self, p: float) -> MaxClusterDistribution:
        """Binomially mixed survival function at occupation probability p."""
        m = self.site_count
        w = binomial_weights(m, p)
        survival = np.zeros(m + 2)
        if self.mode == "dense":
            # S(t) = (1/R) sum_n first_counts[t, m<=n] w[n]
            #      = (1/R) sum_m first_counts[t, m] * (suffix weight at m)
            suffix = np.cumsum(w[::-1])[::-1]
            chunk = max(1, (1 << 22) // (m + 1))
            for lo in range(0, m + 1, chunk):
                hi = min(lo + chunk, m + 1)
                survival[lo:hi] = self.first_counts[lo:hi].astype(np.float64) @ suffix
            survival /= self.trials
            survival[0] = 1.0
        else:
            # bucket k collects w[n] over (n_edges[k-1], n_edges[k]]; the k = 0
            # bucket additionally absorbs n = 0
            edges = np.concatenate(([0], self.n_edges))
            cw = np.concatenate(([0.0], np.cumsum(w)))
            bucket_w = cw[edges[1:] + 1] - cw[edges[:-1] + 1]
            bucket_w[0] += w[0]
            # P at the right edge over-estimates P inside the bucket: conservative
            cum = np.cumsum(self.first_counts, axis=1) / self.trials
            s_at_edges = cum @ bucket_w
            survival[0] = 1.0
            idx = np.searchsorted(self.t_edges, np.arange(1, m + 1), side="right") - 1
            vals = np.concatenate(([1.0], s_at_edges))  # index -1 -> 1.0
            survival[1 : m + 1] = vals[idx + 1]
        survival[m + 1] = 0.0
        np.minimum.accumulate(survival, out=survival)  # guard float monotonicity
        return MaxClusterDistribution(self.side, p, self.trials, survival)

    # -- persistence -------------------------------------------------------------

    def to_bytes(self) -> bytes:
        if self.mode == "dense":
            return _pack(0, self.side, self.trials, self.seed, 0.0, [self.first_counts])
        return _pack(
            1, self.side, self.trials, self.seed, 0.0, [self.t_edges, self.n_edges, self.first_counts]
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "MicroCanonicalTable":
        kind, side, trials, seed, _p, arrays = _unpack(data)
        if kind == 0:
            return cls(side, trials, seed, "dense", arrays[0])
        if kind == 1:
            return cls(side, trials, seed, "bucketed", arrays[2], arrays[0], arrays[1])
        raise ValueError("not a sweep-table container")

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "MicroCanonicalTable":
        return cls.from_bytes(Path(path).read_bytes())

    def to_csv(self, max_rows: int | None = None) -> str:
        """Sparse 3-column dump (n, t, count) of the first-crossing counts."""
        buf = StringIO()
        buf.write("n,t,count\n")
        rows = 0
        tt, nn = np.nonzero(self.first_counts)
        for t_idx, n_idx in zip(tt, nn):
            t = int(self.t_edges[t_idx]) if self.mode == "bucketed" else int(t_idx)
            n = int(self.n_edges[n_idx]) if self.mode == "bucketed" else int(n_idx)
            buf.write(f"{n},{t},{int(self.first_counts[t_idx, n_idx])}\n")
            rows += 1
            if max_rows is not None and rows >= max_rows:
                break
        return buf.getvalue()


def merge(tables: list[MicroCanonicalTable]) -> MicroCanonicalTable:
    """Combine tables computed over disjoint trial-index ranges of one master seed."""
    head = tables[0]
    out = head.first_counts.astype(np.int64)
    for other in tables[1:]:
        same_grid = (
            head.t_edges is None
            or (
                np.array_equal(other.t_edges, head.t_edges)
                and np.array_equal(other.n_edges, head.n_edges)
            )
        )
        if (
            other.side != head.side
            or other.mode != head.mode
            or other.seed != head.seed
            or other.first_counts.shape != head.first_counts.shape
            or not same_grid
        ):
            raise ValueError("tables must share side, mode, seed, and grids to merge")
        out = out + other.first_counts
    total = sum(t.trials for t in tables)
    return MicroCanonicalTable(
        head.side,
        total,
        head.seed,
        head.mode,
        out.astype(np.int32),
        head.t_edges,
        head.n_edges,
    )


# --------------------------------------------------------------------------- sweeps


def _default_grids(m: int, t_dense: int | None) -> tuple[np.ndarray, np.ndarray]:
    if t_dense is None:
        t_dense = min(m, 4096)
    t_dense = max(1, min(t_dense, m))
    edges = list(range(1, t_dense + 1))
    t = float(t_dense)
    while edges[-1] < m:
        t *= 1.08
        nxt = min(m, int(math.ceil(t)))
        if nxt > edges[-1]:
            edges.append(nxt)
    t_edges = np.asarray(edges, dtype=np.int64)
    stride = max(1, (m + 2047) // 2048)
    n_edges = np.arange(stride, m + stride, stride, dtype=np.int64)
    n_edges[-1] = m
    n_edges = np.unique(n_edges)
    return t_edges, n_edges


def _partition(trials: int, jobs: int) -> list[tuple[int, int]]:
    jobs = max(1, min(jobs, trials))
    cut = np.linspace(0, trials, jobs + 1).astype(np.int64)
    return [(int(cut[i]), int(cut[i + 1])) for i in range(jobs) if cut[i] < cut[i + 1]]


def sweep(
    lattice: TriangularLattice,
    trials: int,
    seed: int,
    jobs: int = 1,
    mode: str = "auto",
    memory_budget: int = DEFAULT_MEMORY_BUDGET,
    t_dense: int | None = None,
    trial_offset: int = 0,
) -> MicroCanonicalTable:
    """Run ``trials`` insertion sweeps and accumulate first-crossing counts.

    The output depends only on (seed, trial_offset, trials); ``jobs`` merely
    partitions the trial range across worker threads.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    m = lattice.site_count
    dense_bytes = 4 * (m + 1) * (m + 1)
    if mode == "auto":
        mode = "dense" if dense_bytes <= memory_budget else "bucketed"
    if mode == "dense" and dense_bytes > memory_budget:
        raise MemoryError(
            f"dense table needs {dense_bytes/2**20:.0f} MiB > budget "
            f"{memory_budget/2**20:.0f} MiB; use mode='bucketed'"
        )
    nbr, deg = lattice.neighbor_arrays()
    parts = _partition(trials, jobs)

    if mode == "dense":
        outs = [np.zeros((m + 1, m + 1), dtype=np.int32) for _ in parts]
        run = lambda i: _sweep_dense(
            nbr, deg, trial_offset + parts[i][0], trial_offset + parts[i][1], np.uint64(seed), outs[i]
        )
        t_edges = n_edges = None
    elif mode == "bucketed":
        t_edges, n_edges = _default_grids(m, t_dense)
        outs = [np.zeros((len(t_edges), len(n_edges)), dtype=np.int32) for _ in parts]
        run = lambda i: _sweep_bucketed(
            nbr,
            deg,
            trial_offset + parts[i][0],
            trial_offset + parts[i][1],
            np.uint64(seed),
            t_edges,
            n_edges,
            outs[i],
        )
    else:
        raise ValueError(f"unknown sweep mode {mode!r}")

    if len(parts) == 1:
        run(0)
    else:
        with ThreadPoolExecutor(max_workers=len(parts)) as pool:
            list(pool.map(run, range(len(parts))))
    counts = outs[0]
    for extra in outs[1:]:
        counts += extra
    if mode == "dense":
        counts[0, 0] = trials  # T >= 0 from the start, by convention
    return MicroCanonicalTable(lattice.side, trials, seed, mode, counts, t_edges, n_edges)


def canonical(micro: MicroCanonicalTable, p: float) -> MaxClusterDistribution:
    return micro.canonical(p)


def type_ii_full_support(micro: MicroCanonicalTable, p_b: float, c0: int) -> float:
    """beta = P(T < c0) when every site is black with probability p_b."""
    if p_b <= 0.5:
        warnings.warn(
            f"p_b = {p_b} is not supercritical; the full-support alternative "
            "is indistinguishable from noise in the large-N limit",
            RuntimeWarning,
            stacklevel=2,
        )
    dist = micro.canonical(p_b)
    t = min(max(c0, 0), micro.site_count + 1)
    return float(1.0 - dist.survival[t])


@dataclass
class TwoRegionTable:
    """First-crossing counts for inhomogeneous (inner square / outer sea) fields.

    first_counts[n_in, j, k] = number of trials in which, after inserting
    n_in inner sites, the threshold thresholds[j] was first reached at outer
    insertion k (k = 0: already reached by the inner sites alone).
    """

    side: int
    inner_indices: np.ndarray = field(repr=False)
    trials: int = 0
    seed: int = 0
    thresholds: np.ndarray = field(default=None, repr=False)
    first_counts: np.ndarray = field(default=None, repr=False)

    @property
    def inner_count(self) -> int:
        return len(self.inner_indices)

    @property
    def outer_count(self) -> int:
        return self.side * self.side - self.inner_count

    def exceedance(self, c0: int) -> np.ndarray:
        """Phat(T >= c0 | n_in, n_out) on the full (n_in, n_out) grid."""
        j = int(np.searchsorted(self.thresholds, c0))
        if j >= len(self.thresholds) or self.thresholds[j] != c0:
            raise ValueError(
                f"threshold {c0} was not declared when the table was built "
                f"(available: {list(self.thresholds)})"
            )
        return np.cumsum(self.first_counts[:, j, :], axis=1) / self.trials


def sweep_two_region(
    lattice: TriangularLattice,
    inner: SiteMask,
    trials: int,
    seed: int,
    thresholds,
    jobs: int = 1,
    memory_budget: int = DEFAULT_MEMORY_BUDGET,
) -> TwoRegionTable:
    """Joint sweep over independent inner/outer insertion orders.

    For every inner prefix size n_in (0..|inner|), the outer permutation is
    replayed and the first outer count reaching each declared threshold is
    recorded.  Memory is (|inner|+1) x len(thresholds) x (outer+1) int32.
    """
    if inner.side != lattice.side:
        raise ValueError("inner mask side does not match the lattice")
    inner_ids = inner.indices().astype(np.int32)
    if len(inner_ids) == 0 or len(inner_ids) == lattice.site_count:
        raise ValueError("inner region must be a nonempty proper subset of the lattice")
    ts = np.unique(np.asarray(list(thresholds), dtype=np.int64))
    if len(ts) == 0:
        raise ValueError("at least one threshold is required")
    if ts[0] < 1:
        raise ValueError("thresholds must be >= 1")
    outer_ids = np.setdiff1d(
        np.arange(lattice.site_count, dtype=np.int32), inner_ids, assume_unique=True
    )
    shape = (len(inner_ids) + 1, len(ts), len(outer_ids) + 1)
    if 4 * shape[0] * shape[1] * shape[2] > memory_budget:
        raise MemoryError(
            f"two-region table of shape {shape} exceeds the memory budget; "
            "declare fewer thresholds or a smaller inner region"
        )
    nbr, deg = lattice.neighbor_arrays()
    parts = _partition(trials, jobs)
    outs = [np.zeros(shape, dtype=np.int32) for _ in parts]

    def run(i: int) -> None:
        lo, hi = parts[i]
        _sweep_two_region(nbr, deg, inner_ids, outer_ids, ts, lo, hi, np.uint64(seed), outs[i])

    if len(parts) == 1:
        run(0)
    else:
        with ThreadPoolExecutor(max_workers=len(parts)) as pool:
            list(pool.map(run, range(len(parts))))
    counts = outs[0]
    for extra in outs[1:]:
        counts += extra
    return TwoRegionTable(lattice.side, inner_ids, trials, seed, ts, counts)


def type_ii_square_support(table: TwoRegionTable, p_b: float, p_e: float, c0: int) -> float:
    """beta = 1 - sum Binom(n_in)*Binom(n_out)*Phat(T >= c0 | n_in, n_out)."""
    exceed = table.exceedance(c0)
    w_in = binomial_weights(table.inner_count, p_b)
    w_out = binomial_weights(table.outer_count, p_e)
    reject = float(w_in @ exceed @ w_out)
    return min(1.0, max(0.0, 1.0 - reject))


@dataclass
class CriticalValueTable:
    """Rows (N, p_E, alpha, c0, trials, seed) with the pinned CSV schema."""

    rows: list[dict] = field(default_factory=list)

    HEADER = "N,p_E,alpha,c0,trials,seed"

    def add(self, n: int, p_e: float, alpha: float, c0: int, trials: int, seed: int) -> dict:
        row = {"N": n, "p_E": p_e, "alpha": alpha, "c0": c0, "trials": trials, "seed": seed}
        self.rows.append(row)
        return row

    def to_csv(self) -> str:
        buf = StringIO()
        buf.write(self.HEADER + "\n")
        for r in self.rows:
            buf.write(f"{r['N']},{r['p_E']},{r['alpha']},{r['c0']},{r['trials']},{r['seed']}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "CriticalValueTable":
        lines = [ln for ln in text.strip().splitlines() if ln]
        if not lines or lines[0] != cls.HEADER:
            raise ValueError(f"expected header {cls.HEADER!r}")
        table = cls()
        for ln in lines[1:]:
            n, p_e, alpha, c0, trials, seed = ln.split(",")
            table.add(int(n), float(p_e), float(alpha), int(c0), int(trials), int(seed))
        return table


# --------------------------------------------------------------------------- container


def _pack(kind: int, side: int, trials: int, seed: int, p: float, arrays) -> bytes:
    parts = [
        _MAGIC,
        struct.pack("<HBBH", 1, kind, len(arrays), 0),
        struct.pack("<IQQd", side, trials, seed & 0xFFFFFFFFFFFFFFFF, p),
    ]
    for arr in arrays:
        arr = np.ascontiguousarray(arr)
        code = _DTYPE_CODES[arr.dtype]
        parts.append(struct.pack("<BB", code, arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.astype(_DTYPES[code], copy=False).tobytes())
    return b"".join(parts)


def _unpack(data: bytes):
    if data[:6] != _MAGIC:
        raise ValueError("bad magic: not an NZMC1 container")
    version, kind, n_arrays, _ = struct.unpack_from("<HBBH", data, 6)
    if version != 1:
        raise ValueError(f"unsupported container version {version}")
    side, trials, seed, p = struct.unpack_from("<IQQd", data, 12)
    off = 12 + struct.calcsize("<IQQd")
    arrays = []
    for _ in range(n_arrays):
        code, ndim = struct.unpack_from("<BB", data, off)
        off += 2
        dims = struct.unpack_from(f"<{ndim}I", data, off)
        off += 4 * ndim
        dt = np.dtype(_DTYPES[code])
        n_bytes = dt.itemsize * int(np.prod(dims))
        arr = np.frombuffer(data[off : off + n_bytes], dtype=dt).reshape(dims).copy()
        off += n_bytes
        arrays.append(arr)
    return kind, side, trials, seed, p, arrays
