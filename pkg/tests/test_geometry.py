"""Geometry generation and phase profile tests."""

import numpy as np
import pytest

from latticeclock.errors import SizeLimitError
from latticeclock.geometry import (
    Geometry,
    PhaseProfile,
    innermost_index,
    phase_at,
    positions,
    site_axis_indices,
    site_phases,
    wrap_angle,
)


def pairwise_distances(pos):
    diff = pos[:, None, :] - pos[None, :, :]
    d = np.linalg.norm(diff, axis=2)
    iu = np.triu_indices(len(pos), k=1)
    return np.sort(d[iu])


class TestPositions:
    def test_square_polygon(self):
        pos = positions(Geometry.polygon(4, 1.0))
        dists = pairwise_distances(pos)
        assert dists == pytest.approx([1, 1, 1, 1, np.sqrt(2), np.sqrt(2)], abs=1e-12)

    def test_chain_distances(self):
        pos = positions(Geometry.chain(3, 0.5))
        assert pairwise_distances(pos) == pytest.approx([0.5, 0.5, 1.0], abs=1e-15)

    def test_hexagonal_nearest_neighbors(self):
        pos = positions(Geometry.hexagonal(2, 2, 0.8))
        dists = pairwise_distances(pos)
        # 2x2 rhombic patch: 5 nearest-neighbor bonds plus one long diagonal
        assert dists[:5] == pytest.approx([0.8] * 5, abs=1e-12)
        assert dists[5] == pytest.approx(0.8 * np.sqrt(3), abs=1e-12)

    def test_polygon_vertices_equidistant_from_centroid(self):
        for n in (3, 5, 12):
            pos = positions(Geometry.polygon(n, 0.7))
            centroid = pos.mean(axis=0)
            radii = np.linalg.norm(pos - centroid, axis=1)
            assert np.ptp(radii) < 1e-12
            sides = np.linalg.norm(np.roll(pos, -1, axis=0) - pos, axis=1)
            assert sides == pytest.approx([0.7] * n, abs=1e-12)

    def test_polygon_partner_multisets_identical(self):
        # every vertex sees the same distance multiset (symmetric reduction)
        pos = positions(Geometry.polygon(7, 0.9))
        diff = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=2)
        ref = np.sort(diff[0][1:])
        for k in range(1, 7):
            row = np.sort(np.delete(diff[k], k))
            assert row == pytest.approx(ref, abs=1e-12)

    def test_cubic_grid(self):
        pos = positions(Geometry.cubic(2, 2, 2, 1.0))
        assert len(pos) == 8
        assert pairwise_distances(pos)[0] == pytest.approx(1.0)

    def test_site_cap(self):
        with pytest.raises(SizeLimitError):
            positions(Geometry.chain(10**7 + 1, 0.5))

    def test_validation(self):
        with pytest.raises(ValueError):
            Geometry.chain(3, -1.0)
        with pytest.raises(ValueError):
            Geometry.polygon(1, 1.0)
        with pytest.raises(ValueError):
            Geometry("ring", 1.0, (4,))


class TestInnermost:
    def test_chain(self):
        assert innermost_index(Geometry.chain(19, 1.0)) == 9
        assert innermost_index(Geometry.chain(10, 1.0)) == 4

    def test_square_center_is_closest_to_centroid(self):
        geom = Geometry.square(11, 11, 1.0)
        pos = positions(geom)
        centroid = pos.mean(axis=0)
        assert innermost_index(geom) == int(np.argmin(np.linalg.norm(pos - centroid, axis=1)))

    def test_cubic_center(self):
        geom = Geometry.cubic(5, 5, 5, 1.0)
        pos = positions(geom)
        centroid = pos.mean(axis=0)
        assert innermost_index(geom) == int(np.argmin(np.linalg.norm(pos - centroid, axis=1)))


class TestPhases:
    def test_zero_gradient(self):
        profile = PhaseProfile(0.0)
        assert phase_at(profile, 5) == 0.0

    def test_wraps_to_zero(self):
        assert phase_at(PhaseProfile(np.pi), 3) == pytest.approx(0.0, abs=1e-12)

    def test_wraps_negative(self):
        assert phase_at(PhaseProfile(np.pi / 2), 4) == pytest.approx(-np.pi / 2, abs=1e-12)

    def test_wrap_interval(self):
        assert wrap_angle(np.pi) == pytest.approx(np.pi)
        assert wrap_angle(-np.pi) == pytest.approx(np.pi)
        assert wrap_angle(3 * np.pi / 2) == pytest.approx(-np.pi / 2)

    def test_site_phases_follow_first_axis(self):
        geom = Geometry.square(3, 2, 1.0)
        ph = site_phases(geom, PhaseProfile(0.5))
        idx = site_axis_indices(geom, 0)
        assert ph == pytest.approx(0.5 * idx)

    def test_axis_selection(self):
        geom = Geometry.square(3, 2, 1.0)
        ph = site_phases(geom, PhaseProfile(0.5, axis=1))
        assert ph == pytest.approx(0.5 * site_axis_indices(geom, 1))
        with pytest.raises(ValueError):
            site_axis_indices(Geometry.chain(4, 1.0), 1)
