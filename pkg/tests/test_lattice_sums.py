"""Lattice-sum tests: explicit oracle, shell equivalence, sweeps, averages."""

import numpy as np
import pytest

from latticeclock.couplings import DipoleOrientation, pair_coupling
from latticeclock.errors import CoincidentAtomsError
from latticeclock.geometry import (
    Geometry,
    PhaseProfile,
    innermost_index,
    positions,
    site_phases,
)
from latticeclock.lattice_sums import (
    SumPlan,
    cubic_innermost,
    effective_average,
    effective_explicit,
    effective_for_atom,
    effective_shell,
    shell_classes,
    sweep_distance,
    sweep_phase_map,
)

PERP = DipoleOrientation.along("z")


def components(eff):
    return np.array(
        [eff.omega_eff, eff.gamma_eff, eff.omega_cos, eff.omega_sin, eff.gamma_cos, eff.gamma_sin]
    )


def assert_effective_close(a, b, tol=1e-10):
    da = components(a)
    db = components(b)
    scale = np.maximum(1.0, np.maximum(np.abs(da), np.abs(db)))
    assert np.all(np.abs(da - db) <= tol * scale), f"{da} vs {db}"


class TestExplicit:
    def test_two_atoms_unit_separation(self):
        pos = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
        out = effective_explicit(pos, PERP)
        for eff in out:
            assert eff.omega_eff == pytest.approx(-0.1163426, abs=1e-7)
            assert eff.gamma_eff == pytest.approx(0.0379954, abs=1e-7)
            assert eff.n_terms == 1

    def test_square_polygon_sum_rule(self):
        d = 0.8
        pos = positions(Geometry.polygon(4, d))
        eff = effective_for_atom(pos, PERP)
        side = pair_coupling([0, 0, 0], [d, 0, 0], PERP).omega
        diag = pair_coupling([0, 0, 0], [d * np.sqrt(2), 0, 0], PERP).omega
        assert eff.omega_eff == pytest.approx(2 * side + diag, rel=1e-12)

    def test_zero_phase_sin_components(self):
        pos = positions(Geometry.polygon(5, 0.7))
        for eff in effective_explicit(pos, PERP, np.zeros(5)):
            assert eff.omega_sin == 0.0
            assert eff.gamma_sin == 0.0
            assert eff.omega_cos == eff.omega_eff
            assert eff.gamma_cos == eff.gamma_eff

    def test_rotated_identities(self):
        pos = positions(Geometry.chain(6, 0.58))
        phases = site_phases(Geometry.chain(6, 0.58), PhaseProfile(0.9))
        for eff in effective_explicit(pos, PERP, phases):
            assert eff.omega_eff_rot == eff.omega_cos - 0.5 * eff.gamma_sin
            assert eff.gamma_eff_rot == eff.gamma_cos + 2.0 * eff.omega_sin

    def test_coincident_error(self):
        with pytest.raises(CoincidentAtomsError):
            effective_explicit(np.zeros((2, 3)), PERP)


class TestShellEquivalence:
    @pytest.mark.parametrize(
        "geom",
        [
            Geometry.chain(19, 0.73),
            Geometry.chain(10, 0.58),
            Geometry.square(11, 11, 0.7),
            Geometry.square(12, 9, 0.66),
            Geometry.hexagonal(11, 11, 0.7),
            Geometry.cubic(5, 5, 5, 0.75),
        ],
    )
    def test_matches_explicit_innermost(self, geom):
        pos = positions(geom)
        ref = innermost_index(geom)
        explicit = effective_for_atom(pos, geom.polarization, None, ref)
        shell = effective_shell(geom)
        assert_effective_close(explicit, shell)
        assert shell.n_terms == explicit.n_terms

    def test_phased_chain_matches_explicit(self):
        geom = Geometry.chain(14, 0.62)
        profile = PhaseProfile(1.234)
        pos = positions(geom)
        phases = site_phases(geom, profile)
        explicit = effective_for_atom(pos, geom.polarization, phases, innermost_index(geom))
        shell = effective_shell(geom, profile)
        assert_effective_close(explicit, shell)

    def test_phased_square_matches_explicit(self):
        geom = Geometry.square(9, 9, 0.71)
        profile = PhaseProfile(0.77)
        pos = positions(geom)
        phases = site_phases(geom, profile)
        explicit = effective_for_atom(pos, geom.polarization, phases, innermost_index(geom))
        shell = effective_shell(geom, profile)
        assert_effective_close(explicit, shell)

    def test_doubled_chain_consistency(self):
        # the innermost atom of a 19-site chain sees 9 partners per side,
        # twice the one-sided partner set of a 10-site segment
        shell = effective_shell(Geometry.chain(19, 0.44))
        pos = positions(Geometry.chain(19, 0.44))
        explicit = effective_for_atom(pos, PERP, None, 9)
        assert_effective_close(explicit, shell)
        assert shell.n_terms == 18

    def test_explicit_plan_mode(self):
        geom = Geometry.square(7, 7, 0.8)
        a = effective_shell(geom, plan=SumPlan(mode="explicit"))
        b = effective_shell(geom)
        assert_effective_close(a, b)

    def test_symmetric_chain_sin_components_vanish(self):
        shell = effective_shell(Geometry.chain(1001, 0.63), PhaseProfile(1.1))
        assert shell.omega_sin == 0.0
        assert shell.gamma_sin == 0.0

    def test_polygon_rejected(self):
        with pytest.raises(ValueError):
            effective_shell(Geometry.polygon(6, 0.7))

    def test_tilted_polarization_rejected_2d(self):
        geom = Geometry.square(5, 5, 0.7, DipoleOrientation.along("x"))
        with pytest.raises(ValueError):
            shell_classes(geom)

    def test_chain_any_polarization(self):
        e = DipoleOrientation(np.array([0.6, 0.0, 0.8]))
        geom = Geometry.chain(15, 0.7, e)
        pos = positions(geom)
        explicit = effective_for_atom(pos, e, None, innermost_index(geom))
        shell = effective_shell(geom)
        assert_effective_close(explicit, shell)


class TestSweeps:
    def test_single_point_equals_shell(self):
        geom = Geometry.chain(101, 1.0)
        rows = sweep_distance(geom, [0.77])
        shell = effective_shell(geom.rescaled(0.77))
        assert_effective_close(rows[0][1], shell, tol=1e-15)

    def test_integral_spacing_flagged_and_offset(self):
        geom = Geometry.chain(101, 1.0)
        rows = sweep_distance(geom, [0.9, 1.0, 1.1])
        assert not rows[0][1].diverged
        assert rows[1][1].diverged
        assert rows[1][0] == pytest.approx(1.0 + 1e-6, abs=1e-12)
        assert np.isfinite(components(rows[1][1])).all()

    def test_polygon_sweep_matches_explicit(self):
        geom = Geometry.polygon(10, 1.0)
        d_grid = [0.4, 0.75, 1.3]
        rows = sweep_distance(geom, d_grid)
        for (d, eff) in rows:
            pos = positions(geom.rescaled(d))
            explicit = effective_for_atom(pos, geom.polarization)
            assert_effective_close(eff, explicit, tol=1e-12)

    def test_empty_grid_rejected(self):
        with pytest.raises(ValueError):
            sweep_distance(Geometry.chain(11, 1.0), [])

    def test_polygon_divergence_growth_near_integral(self):
        # the ring sum picks up coherent 1/xi contributions as d -> 1
        geom = Geometry.polygon(10000, 1.0)
        rows = sweep_distance(geom, [0.99, 0.999, 0.9999])
        mags = [abs(eff.omega_eff) for _, eff in rows]
        assert mags[0] < mags[1] < mags[2]


class TestPhaseMap:
    def test_zero_phase_column_matches_distance_sweep(self):
        geom = Geometry.chain(501, 1.0)
        d_grid = [0.4, 0.6, 0.8]
        rows, _ = sweep_phase_map(geom, d_grid, [0.0, np.pi])
        plain = sweep_distance(geom, d_grid)
        for di in range(len(d_grid)):
            assert_effective_close(rows[di * 2][2], plain[di][1], tol=1e-15)

    def test_alternating_phase_discontinuity_sides(self):
        # just below the half-integral spacing the staggered excitation is
        # dark (quasimomentum outside the light cone); just above it is
        # strongly radiant
        geom = Geometry.chain(1000001, 1.0)
        rows, _ = sweep_phase_map(geom, [0.49, 0.51], [np.pi])
        below = rows[0][2]
        above = rows[1][2]
        assert below.gamma_eff_rot == pytest.approx(-1.0, abs=0.02)
        assert above.gamma_eff_rot > 1.5

    def test_contour_points_bracket_sign_changes(self):
        geom = Geometry.chain(2001, 1.0)
        d_grid = np.arange(0.55, 1.1001, 0.01)
        rows, contour = sweep_phase_map(geom, d_grid, [0.0])
        assert len(contour) >= 1
        for _, d_zero in contour:
            assert d_grid[0] <= d_zero <= d_grid[-1]

    def test_gamma_extreme_moves_to_half_integral_under_pi_phase(self):
        geom = Geometry.chain(10001, 1.0)
        d_grid = np.arange(0.30, 1.7001, 0.01)
        for dphi, anchor in ((0.0, 1.0), (np.pi, 0.5)):
            rows, _ = sweep_phase_map(geom, d_grid, [dphi])
            mags = [abs(r[2].gamma_eff_rot) for r in rows]
            d_at_max = rows[int(np.argmax(mags))][0]
            # superradiant spike sits just above the resonant spacing
            nearest = anchor * round(d_at_max / anchor)
            assert abs(d_at_max - nearest) <= 0.03
            assert abs(nearest / anchor % 2) in (1.0, 1)  # lands on an odd multiple


class TestCubic:
    def test_small_cube_matches_explicit(self):
        rows = cubic_innermost(3, [0.75])
        geom = Geometry.cubic(3, 3, 3, 0.75)
        explicit = effective_for_atom(positions(geom), PERP, None, innermost_index(geom))
        assert_effective_close(rows[0][1], explicit)

    def test_even_edge_rejected(self):
        with pytest.raises(ValueError):
            cubic_innermost(4, [0.7])

    def test_axis_polarizations_equivalent(self):
        # a cube is symmetric under axis permutation
        for axis in ("x", "y", "z"):
            rows = cubic_innermost(5, [0.7], DipoleOrientation.along(axis))
            if axis == "x":
                ref = components(rows[0][1])
            else:
                np.testing.assert_allclose(components(rows[0][1]), ref, rtol=1e-13)

    def test_size_sensitivity(self):
        # small-size proxy of the boundary sensitivity: different cube sizes
        # give visibly different innermost couplings at fixed spacing
        a = cubic_innermost(7, [0.71])[0][1].omega_eff
        b = cubic_innermost(11, [0.71])[0][1].omega_eff
        assert abs(a - b) > 1e-3


class TestAverages:
    @pytest.mark.parametrize(
        "geom",
        [Geometry.chain(9, 0.7), Geometry.square(5, 5, 0.7), Geometry.hexagonal(5, 4, 0.7)],
    )
    def test_average_matches_explicit_mean(self, geom):
        pos = positions(geom)
        effs = effective_explicit(pos, geom.polarization)
        mean_omega = np.mean([e.omega_eff for e in effs])
        mean_gamma = np.mean([e.gamma_eff for e in effs])
        avg = effective_average(geom)
        assert avg.omega_eff == pytest.approx(mean_omega, rel=1e-10, abs=1e-12)
        assert avg.gamma_eff == pytest.approx(mean_gamma, rel=1e-10, abs=1e-12)

    def test_average_bounded_below(self):
        # positivity of the decay matrix bounds the ensemble average
        for d in (0.6, 0.7, 0.8):
            avg = effective_average(Geometry.square(61, 61, d))
            assert avg.gamma_eff >= -1.0 - 1e-9


class TestEstimates:
    def test_est_error_positive_and_small_far_out(self):
        eff = effective_shell(Geometry.chain(100001, 0.73))
        assert eff.est_error > 0.0
        assert eff.est_error < 1e-4

    def test_tolerance_plan(self):
        plan = SumPlan(tolerance=1e-7, max_shells=10**7)
        eff = effective_shell(Geometry.chain(1001, 0.73), plan=plan)
        assert eff.est_error < 1e-7

    def test_n_terms_counts_partners(self):
        assert effective_shell(Geometry.square(9, 9, 0.7)).n_terms == 80
        assert effective_shell(Geometry.chain(10, 0.7)).n_terms == 9
