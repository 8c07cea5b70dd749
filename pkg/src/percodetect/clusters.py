"""Connected-cluster machinery on the triangular lattice.

Everything here is linear in the number of sites: labeling visits each site a
bounded number of times via an explicit-stack depth-first traversal in site
index order (recursion would overflow at N^2 ~ 10^6 sites).  The early-stop
variant aborts as soon as some cluster reaches the requested bound, which is
all a threshold test needs.
"""

from __future__ import annotations

import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from ._rng import next_double, trial_seed, xoshiro_init
from .lattice import TriangularLattice
from .noise import BinaryField


@dataclass
class ClusterLabeling:
    side: int
    labels: np.ndarray = field(repr=False)  # int32 per site, 0 = unlabeled
    sizes: np.ndarray = field(repr=False)  # int64 per cluster, index = label - 1
    max_size: int = 0
    truncated: bool = False


@njit(cache=True, nogil=True)
def _label_kernel(bits, nbr, deg, labels, sizes, stack):
    n_clusters = 0
    max_size = 0
    for start in range(bits.shape[0]):
        if bits[start] == 0 or labels[start] != 0:
            continue
        n_clusters += 1
        lab = n_clusters
        labels[start] = lab
        stack[0] = start
        top = 1
        size = 0
        while top > 0:
            top -= 1
            s = stack[top]
            size += 1
            for k in range(deg[s]):
                q = nbr[s, k]
                if bits[q] == 1 and labels[q] == 0:
                    labels[q] = lab
                    stack[top] = q
                    top += 1
        sizes[n_clusters - 1] = size
        if size > max_size:
            max_size = size
    return n_clusters, max_size


@njit(cache=True, nogil=True)
def _find_at_least_kernel(bits, nbr, deg, bound, visited, stack):
    # Returns (found, size).  When found, size is the partial count at the
    # moment of the early exit (>= bound); otherwise every cluster was fully
    # traversed and size is the true maximum.
    best = 0
    for start in range(bits.shape[0]):
        if bits[start] == 0 or visited[start] == 1:
            continue
        visited[start] = 1
        stack[0] = start
        top = 1
        size = 0
        while top > 0:
            top -= 1
            s = stack[top]
            size += 1
            if size >= bound:
                return True, size
            for k in range(deg[s]):
                q = nbr[s, k]
                if bits[q] == 1 and visited[q] == 0:
                    visited[q] = 1
                    stack[top] = q
                    top += 1
        if size > best:
            best = size
    return False, best


@njit(cache=True, nogil=True)
def _crossing_kernel(bits, nbr, deg, side):
    m = bits.shape[0]
    visited = np.zeros(m, dtype=np.uint8)
    stack = np.empty(m, dtype=np.int64)
    top = 0
    # seed from every black site in the leftmost column (both row parities)
    for r in range(side):
        s = r * side
        if bits[s] == 1:
            visited[s] = 1
            stack[top] = s
            top += 1
    last = side - 1
    while top > 0:
        top -= 1
        s = stack[top]
        if s % side == last:
            return True
        for k in range(deg[s]):
            q = nbr[s, k]
            if bits[q] == 1 and visited[q] == 0:
                visited[q] = 1
                stack[top] = q
                top += 1
    return False


def _prepare(fld: BinaryField, lattice: TriangularLattice, color: str = "black"):
    if fld.side != lattice.side:
        raise ValueError(f"field side {fld.side} does not match lattice side {lattice.side}")
    bits = fld.bits if color == "black" else (1 - fld.bits).astype(np.uint8)
    if color not in ("black", "white"):
        raise ValueError("color must be 'black' or 'white'")
    nbr, deg = lattice.neighbor_arrays()
    return bits, nbr, deg


def label_clusters(
    fld: BinaryField, lattice: TriangularLattice, color: str = "black"
) -> ClusterLabeling:
    """Full labeling of all clusters of the requested color, O(N^2)."""
    bits, nbr, deg = _prepare(fld, lattice, color)
    m = bits.shape[0]
    labels = np.zeros(m, dtype=np.int32)
    sizes = np.zeros(m, dtype=np.int64)
    stack = np.empty(m, dtype=np.int64)
    count, max_size = _label_kernel(bits, nbr, deg, labels, sizes, stack)
    return ClusterLabeling(fld.side, labels, sizes[:count].copy(), int(max_size), False)


def max_cluster_size(fld: BinaryField, lattice: TriangularLattice) -> int:
    """Exact size of the largest black cluster."""
    return label_clusters(fld, lattice).max_size


def find_cluster_at_least(
    fld: BinaryField, lattice: TriangularLattice, bound: int
) -> tuple[bool, int]:
    """(found, size): stop at the first cluster reaching ``bound``.

    When found, size is the visit count at the moment of the early stop (a
    lower bound on that cluster, >= bound).  When not found, no early exit
    ever fired, every cluster was exhausted, and size is the exact maximum.
    """
    if bound < 1:
        raise ValueError("bound must be >= 1")
    bits, nbr, deg = _prepare(fld, lattice, "black")
    m = bits.shape[0]
    found, size = _find_at_least_kernel(
        bits, nbr, deg, bound, np.zeros(m, np.uint8), np.empty(m, np.int64)
    )
    return bool(found), int(size)


@njit(cache=True, nogil=True)
def _crossing_rate_kernel(nbr, deg, side, p, trial_lo, trial_hi, master_seed):
    m = side * side
    bits = np.empty(m, dtype=np.uint8)
    state = np.empty(4, dtype=np.uint64)
    hits = 0
    for trial in range(trial_lo, trial_hi):
        xoshiro_init(trial_seed(master_seed, trial), state)
        for i in range(m):
            bits[i] = 1 if next_double(state) < p else 0
        if _crossing_kernel(bits, nbr, deg, side):
            hits += 1
    return hits


def crossing_probability(
    lattice: TriangularLattice, p: float, trials: int, seed: int, jobs: int = 1
) -> float:
    """Monte Carlo estimate of the left-right crossing probability at density p.

    Trial i draws its field from (seed, i), so the estimate does not depend on
    how trials are split across worker threads.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    nbr, deg = lattice.neighbor_arrays()
    jobs = max(1, min(jobs, trials))
    cuts = np.linspace(0, trials, jobs + 1).astype(np.int64)
    parts = [(int(cuts[i]), int(cuts[i + 1])) for i in range(jobs) if cuts[i] < cuts[i + 1]]
    if len(parts) == 1:
        hits = _crossing_rate_kernel(nbr, deg, lattice.side, p, 0, trials, np.uint64(seed))
    else:
        with ThreadPoolExecutor(max_workers=len(parts)) as pool:
            hits = sum(
                pool.map(
                    lambda lohi: _crossing_rate_kernel(
                        nbr, deg, lattice.side, p, lohi[0], lohi[1], np.uint64(seed)
                    ),
                    parts,
                )
            )
    return hits / trials


def has_left_right_crossing(fld: BinaryField, lattice: TriangularLattice) -> bool:
    """True iff a black path connects the first column to the last column.

    The continuum definition asks for a path from the band x in [0, 1/2] to
    the band at the far right edge; on the offset grid those bands are column
    0 (x = 0 on even rows, 1/2 on odd rows) and column N-1.
    """
    bits, nbr, deg = _prepare(fld, lattice, "black")
    return bool(_crossing_kernel(bits, nbr, deg, lattice.side))


def labeling_to_csv(labeling: ClusterLabeling) -> str:
    """Flat raster export (row-major label per line) for debugging."""
    buf = io.StringIO()
    buf.write("site,label\n")
    for s, lab in enumerate(labeling.labels):
        buf.write(f"{s},{int(lab)}\n")
    return buf.getvalue()


def labeling_to_pgm(labeling: ClusterLabeling) -> bytes:
    """Labels as gray values in a P2 raster (requires < 65536 clusters)."""
    from . import pgm

    maxlab = int(labeling.labels.max(initial=0))
    if maxlab > 65535:
        raise ValueError("too many clusters for a 16-bit PGM export")
    raster = labeling.labels.reshape(labeling.side, labeling.side).astype(np.uint16)
    return pgm.encode(raster, maxval=max(maxlab, 1), binary=False)
