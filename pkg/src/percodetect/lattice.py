"""Finite triangular lattice: topology, embedding, and support rasterization.

Sites live on an N x N offset grid, row-major indexed: site id = row * N + col.
Odd rows are shifted half a unit to the right, so the planar embedding

    x = col + 0.5 * (row & 1),      y = row * sqrt(3) / 2

places every site at unit distance from its declared neighbors.  Interior
sites have six neighbors; boundary sites simply lose the off-grid ones (no
wraparound).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterator

import numpy as np

ROW_HEIGHT = math.sqrt(3.0) / 2.0


class GeometryError(ValueError):
    """A requested sub-shape does not fit inside the lattice."""


@dataclass(frozen=True)
class TriangularLattice:
    """N x N triangular lattice with unit bonds.

    The neighbor rule, equivalent to "all sites at Euclidean distance 1":
    every site connects to (r, c-1) and (r, c+1); even rows additionally to
    (r+-1, c-1) and (r+-1, c); odd rows to (r+-1, c) and (r+-1, c+1).
    """

    side: int

    def __post_init__(self) -> None:
        if self.side < 1:
            raise ValueError(f"lattice side must be a positive integer, got {self.side}")

    @property
    def site_count(self) -> int:
        return self.side * self.side

    def site_id(self, row: int, col: int) -> int:
        if not (0 <= row < self.side and 0 <= col < self.side):
            raise IndexError(f"(row, col) = ({row}, {col}) outside [0, {self.side})^2")
        return row * self.side + col

    def site_rc(self, s: int) -> tuple[int, int]:
        self._check(s)
        return divmod(s, self.side)

    def _check(self, s: int) -> None:
        if not (0 <= s < self.site_count):
            raise IndexError(f"site id {s} outside [0, {self.site_count})")

    def site_position(self, s: int) -> tuple[float, float]:
        """Planar coordinates of a site; nearest-neighbor distance is 1."""
        r, c = self.site_rc(s)
        return c + 0.5 * (r & 1), r * ROW_HEIGHT

    def neighbors(self, s: int) -> list[int]:
        """All sites at Euclidean distance 1 from ``s``, ascending ids."""
        self._check(s)
        n = self.side
        r, c = divmod(s, n)
        out = []
        # the two vertical-neighbor columns depend on row parity
        lo, hi = (c - 1, c) if (r & 1) == 0 else (c, c + 1)
        for rr in (r - 1, r + 1):
            if 0 <= rr < n:
                for cc in (lo, hi):
                    if 0 <= cc < n:
                        out.append(rr * n + cc)
        for cc in (c - 1, c + 1):
            if 0 <= cc < n:
                out.append(r * n + cc)
        out.sort()
        return out

    def neighbor_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Padded neighbor table for the compiled kernels.

        Returns (nbr, deg): nbr is int32 (site_count, 6) padded with -1,
        deg is int8 (site_count,).
        """
        return _neighbor_arrays(self.side)

    def __iter__(self) -> Iterator[int]:
        return iter(range(self.site_count))


@lru_cache(maxsize=32)
def _neighbor_arrays(side: int) -> tuple[np.ndarray, np.ndarray]:
    lat = TriangularLattice(side)
    nbr = np.full((lat.site_count, 6), -1, dtype=np.int32)
    deg = np.zeros(lat.site_count, dtype=np.int8)
    for s in lat:
        ns = lat.neighbors(s)
        deg[s] = len(ns)
        nbr[s, : len(ns)] = ns
    nbr.setflags(write=False)
    deg.setflags(write=False)
    return nbr, deg


def build_lattice(side: int) -> TriangularLattice:
    """Construct the N x N triangular lattice; raises on side < 1."""
    return TriangularLattice(side)


@dataclass
class SiteMask:
    """Subset of lattice sites with O(1) membership."""

    side: int
    bits: np.ndarray = field(repr=False)  # bool, shape (side**2,)

    def __post_init__(self) -> None:
        self.bits = np.asarray(self.bits, dtype=bool)
        if self.bits.shape != (self.side * self.side,):
            raise ValueError("mask length must equal side**2")

    @classmethod
    def empty(cls, side: int) -> "SiteMask":
        return cls(side, np.zeros(side * side, dtype=bool))

    @classmethod
    def full(cls, side: int) -> "SiteMask":
        return cls(side, np.ones(side * side, dtype=bool))

    @classmethod
    def from_indices(cls, side: int, indices) -> "SiteMask":
        bits = np.zeros(side * side, dtype=bool)
        bits[np.asarray(list(indices), dtype=np.int64)] = True
        return cls(side, bits)

    def __contains__(self, s: int) -> bool:
        return bool(self.bits[s])

    def __len__(self) -> int:
        return int(self.bits.sum())

    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.bits)

    def issubset(self, other: "SiteMask") -> bool:
        return self.side == other.side and bool(np.all(~self.bits | other.bits))


def rasterize_support(
    shape: Callable[[float, float], bool], lattice: TriangularLattice
) -> SiteMask:
    """Sites whose position, rescaled to the unit square, lies in ``shape``.

    ``shape`` is a membership predicate on [0, 1]^2.  The rescaling divides x
    by N + 1/2 and y by sqrt(3)/2 * N, the bounding box of the embedding.
    """
    n = lattice.side
    sx = n + 0.5
    sy = ROW_HEIGHT * n
    bits = np.zeros(lattice.site_count, dtype=bool)
    for s in lattice:
        x, y = lattice.site_position(s)
        bits[s] = bool(shape(x / sx, y / sy))
    return SiteMask(n, bits)


def embed_square(lattice: TriangularLattice, origin: int, rho: int) -> SiteMask:
    """Mask of a rho x rho sub-lattice translated so its corner sits at ``origin``.

    The translation is a true lattice translation (by the vector from site 0
    to ``origin``), so the masked subgraph is isomorphic to the rho x rho
    lattice.  When the origin row is odd, odd offset rows land one column
    further right; the bounds check accounts for that.
    """
    if rho < 1:
        raise ValueError("rho must be a positive integer")
    n = lattice.side
    r0, c0 = lattice.site_rc(origin)
    odd_origin = r0 & 1
    max_col = c0 + rho - 1 + (odd_origin if rho > 1 else 0)
    if r0 + rho - 1 >= n or max_col >= n:
        raise GeometryError(
            f"{rho}x{rho} square at origin (row {r0}, col {c0}) exceeds the {n}x{n} lattice"
        )
    bits = np.zeros(lattice.site_count, dtype=bool)
    for dr in range(rho):
        shift = odd_origin & dr  # +1 column on odd offset rows of an odd-row origin
        row = r0 + dr
        start = row * n + c0 + shift
        bits[start : start + rho] = True
    return SiteMask(n, bits)


def centered_square(lattice: TriangularLattice, rho: int) -> SiteMask:
    """Convenience: rho x rho square roughly centered in the lattice."""
    n = lattice.side
    if rho > n:
        raise GeometryError(f"{rho}x{rho} square cannot fit in a {n}x{n} lattice")
    r0 = (n - rho) // 2
    c0 = (n - rho) // 2
    if (r0 & 1) and rho > 1 and c0 + rho >= n:
        c0 -= 1
    return embed_square(lattice, lattice.site_id(r0, c0), rho)
