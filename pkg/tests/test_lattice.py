import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from percodetect.lattice import (
    GeometryError,
    SiteMask,
    TriangularLattice,
    build_lattice,
    centered_square,
    embed_square,
    rasterize_support,
)


@pytest.mark.parametrize("side", range(1, 9))
def test_neighbors_match_unit_distance_geometry(side):
    """Adjacency equals 'Euclidean distance exactly 1', exhaustively."""
    lat = TriangularLattice(side)
    want = oracles.unit_distance_neighbors(side)
    for s in lat:
        assert sorted(want[s]) == lat.neighbors(s), f"side={side} site={s}"


@pytest.mark.parametrize("side", [2, 3, 5, 8, 13])
def test_positions_agree_with_oracle(side):
    lat = TriangularLattice(side)
    pos = oracles.site_positions(side)
    for s in lat:
        x, y = lat.site_position(s)
        assert math.isclose(x, pos[s, 0], abs_tol=1e-12)
        assert math.isclose(y, pos[s, 1], abs_tol=1e-12)


def test_degree_range():
    # interior sites see all six neighbors; corners/edges lose 1-4 of them
    lat = TriangularLattice(7)
    degs = {len(lat.neighbors(s)) for s in lat}
    assert degs == {2, 3, 4, 5, 6}
    interior = [
        s for s in lat if 0 < s // 7 < 6 and 0 < s % 7 < 6
    ]
    assert all(len(lat.neighbors(s)) == 6 for s in interior)


def test_bond_counts_small():
    # hand-checkable facts: 2x2 has 5 unit bonds, 3x3 has 16
    assert oracles.bond_count(2) == 5
    assert oracles.bond_count(3) == 16
    lat2 = TriangularLattice(2)
    assert sum(len(lat2.neighbors(s)) for s in lat2) // 2 == 5
    lat3 = TriangularLattice(3)
    assert sum(len(lat3.neighbors(s)) for s in lat3) // 2 == 16


@given(st.integers(2, 40), st.data())
@settings(max_examples=60, deadline=None)
def test_neighbor_symmetry(side, data):
    lat = TriangularLattice(side)
    s = data.draw(st.integers(0, lat.site_count - 1))
    for t in lat.neighbors(s):
        assert s in lat.neighbors(t)


@given(st.integers(1, 30), st.data())
@settings(max_examples=60, deadline=None)
def test_site_id_roundtrip(side, data):
    lat = TriangularLattice(side)
    s = data.draw(st.integers(0, lat.site_count - 1))
    r, c = lat.site_rc(s)
    assert lat.site_id(r, c) == s


def test_site_id_bounds():
    lat = TriangularLattice(4)
    with pytest.raises(IndexError):
        lat.site_id(4, 0)
    with pytest.raises(IndexError):
        lat.site_rc(16)
    with pytest.raises(ValueError):
        build_lattice(0)


def test_neighbor_arrays_consistent():
    lat = TriangularLattice(9)
    nbr, deg = lat.neighbor_arrays()
    assert nbr.shape == (81, 6) and deg.shape == (81,)
    for s in lat:
        ns = lat.neighbors(s)
        assert deg[s] == len(ns)
        assert sorted(nbr[s, : deg[s]].tolist()) == ns
        assert (nbr[s, deg[s] :] == -1).all()


def test_mask_basics():
    m = SiteMask.from_indices(4, [0, 5, 15])
    assert len(m) == 3 and 5 in m and 6 not in m
    assert m.indices().tolist() == [0, 5, 15]
    assert m.issubset(SiteMask.full(4))
    assert SiteMask.empty(4).issubset(m)
    assert not m.issubset(SiteMask.from_indices(4, [0, 5]))
    with pytest.raises(ValueError):
        SiteMask(3, np.zeros(8, dtype=bool))


def test_rasterize_disc_monotone():
    """shape A inside shape B => rasterization of A inside that of B."""
    lat = TriangularLattice(21)

    def disc(r):
        return lambda x, y: (x - 0.5) ** 2 + (y - 0.5) ** 2 <= r * r

    masks = [rasterize_support(disc(r), lat) for r in (0.1, 0.2, 0.3, 0.45)]
    for small, big in zip(masks, masks[1:]):
        assert small.issubset(big)
        assert len(small) < len(big)


def test_embed_square_is_sublattice():
    # the masked subgraph must be isomorphic to the rho x rho lattice:
    # same site count, same internal bond count
    lat = TriangularLattice(11)
    for origin_rc in [(0, 0), (1, 2), (2, 3), (3, 0), (5, 5)]:
        origin = lat.site_id(*origin_rc)
        for rho in (1, 2, 3, 4):
            mask = embed_square(lat, origin, rho)
            assert len(mask) == rho * rho
            inside = set(mask.indices().tolist())
            bonds = sum(
                1
                for s in inside
                for t in lat.neighbors(s)
                if t in inside and s < t
            )
            assert bonds == oracles.bond_count(rho), (origin_rc, rho)


def test_embed_square_bounds_checked():
    lat = TriangularLattice(6)
    with pytest.raises(GeometryError):
        embed_square(lat, lat.site_id(3, 3), 4)
    # odd-row origin pushes odd offset rows one column right; (1, 3) with
    # rho=3 would need column 6
    with pytest.raises(GeometryError):
        embed_square(lat, lat.site_id(1, 3), 3)
    with pytest.raises(ValueError):
        embed_square(lat, 0, 0)


def test_centered_square_fits_any_parity():
    for n in (8, 9, 10, 11, 55):
        lat = TriangularLattice(n)
        for rho in (1, 2, 3, n // 2, n - 1, n):
            mask = centered_square(lat, rho)
            assert len(mask) == rho * rho
    with pytest.raises(GeometryError):
        centered_square(TriangularLattice(4), 5)
