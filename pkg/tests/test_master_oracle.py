"""Exact density-matrix evolution tests and mean-field validation bounds."""

import numpy as np
import pytest

from latticeclock.couplings import DipoleOrientation, pair_coupling
from latticeclock.errors import NumericalError
from latticeclock.geometry import Geometry, positions
from latticeclock.master_oracle import (
    build_generators,
    evolve_exact,
    expectations,
    product_state,
    ramsey_product_state,
    validate_density_matrix,
)
from latticeclock.meanfield import IntegratorSpec, evolve_general

PERP = DipoleOrientation.along("z")


def excited_populations(rho, n):
    return (1.0 + expectations(rho, n)[:, 2]) / 2.0


class TestGenerators:
    def test_two_atom_hamiltonian_structure(self):
        pos = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
        h, _ = build_generators(pos, PERP)
        nz = np.argwhere(np.abs(h) > 0)
        assert sorted(map(tuple, nz)) == [(1, 2), (2, 1)]
        omega = pair_coupling(pos[0], pos[1], PERP).omega
        assert h[1, 2] == pytest.approx(omega)
        assert h[2, 1] == pytest.approx(omega)

    def test_two_atom_rate_matrix(self):
        pos = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
        _, g = build_generators(pos, PERP)
        np.testing.assert_allclose(
            g, [[1.0, 0.0379954], [0.0379954, 1.0]], atol=1e-7
        )

    def test_hamiltonian_hermitian_random_configs(self):
        rng = np.random.default_rng(2)
        for n in (3, 4, 5):
            pos = rng.uniform(0.0, 2.0, (n, 3))
            h, g = build_generators(pos, PERP)
            assert np.max(np.abs(h - h.conj().T)) < 1e-14
            np.testing.assert_allclose(g, g.T, atol=1e-15)

    def test_size_cap(self):
        with pytest.raises(ValueError):
            build_generators(np.zeros((9, 3)), PERP)


class TestEvolveExact:
    def test_single_atom_decay(self):
        pos = np.zeros((1, 3))
        h, g = build_generators(pos, PERP)
        rho0 = product_state([[0.0, 0.0, 1.0]])
        rhos = evolve_exact(rho0, h, g, [0.0, 1.0])
        assert rhos[-1][1, 1].real == pytest.approx(np.exp(-1.0), abs=1e-8)

    def test_trace_preserved(self):
        pos = positions(Geometry.chain(3, 0.6))
        h, g = build_generators(pos, PERP)
        rho0 = ramsey_product_state(np.zeros(3))
        for rho in evolve_exact(rho0, h, g, np.linspace(0.0, 2.0, 9)):
            assert complex(np.trace(rho)).real == pytest.approx(1.0, abs=1e-9)
            assert abs(complex(np.trace(rho)).imag) < 1e-12

    def test_invariants_enforced(self):
        bad = np.diag([0.7, 0.7]).astype(complex)  # trace 1.4
        with pytest.raises(NumericalError):
            validate_density_matrix(bad)

    def test_zero_coupling_factorizes(self):
        pos = positions(Geometry.chain(3, 0.6))
        h, g = build_generators(pos, PERP)
        h[:] = 0.0
        g = np.eye(3)
        rho0 = ramsey_product_state(np.zeros(3))
        times = np.linspace(0.0, 1.0, 5)
        rhos = evolve_exact(rho0, h, g, times)
        for t, rho in zip(times, rhos):
            per_atom = expectations(rho, 3)
            expected = [np.exp(-t / 2), 0.0, -1.0 + np.exp(-t)]
            np.testing.assert_allclose(per_atom, np.tile(expected, (3, 1)), atol=1e-8)

    def test_permutation_covariance(self):
        # asymmetric triangle: swapping two atom labels permutes expectations
        pos = np.array([[0.0, 0.0, 0.0], [0.7, 0.0, 0.0], [0.0, 1.1, 0.0]])
        phases = np.array([0.0, 0.4, 1.3])
        times = [0.5]
        h, g = build_generators(pos, PERP)
        rho = evolve_exact(ramsey_product_state(phases), h, g, times)[-1]
        out = expectations(rho, 3)
        perm = [1, 0, 2]
        h2, g2 = build_generators(pos[perm], PERP)
        rho2 = evolve_exact(ramsey_product_state(phases[perm]), h2, g2, times)[-1]
        out2 = expectations(rho2, 3)
        np.testing.assert_allclose(out2, out[perm], atol=1e-9)

    def test_superradiant_burst_at_close_range(self):
        pos = np.array([[0.0, 0.0, 0.0], [0.05, 0.0, 0.0]])
        h, g = build_generators(pos, PERP)
        rho0 = product_state(np.tile([0.0, 0.0, 1.0], (2, 1)))
        times = np.linspace(0.0, 1.0, 21)
        rhos = evolve_exact(rho0, h, g, times)
        total = np.array([excited_populations(r, 2).sum() for r in rhos])
        # initial decay rate 2 gamma
        rate0 = (total[0] - total[1]) / (times[1] - times[0])
        assert rate0 == pytest.approx(2.0, rel=0.05)
        independent = 2.0 * np.exp(-times)
        # collective emission beats independent decay at intermediate times
        mid = (times >= 0.2) & (times <= 1.0)
        assert np.all(total[mid] < independent[mid])

    def test_against_fixed_step_reference(self):
        pos = np.array([[0.0, 0.0, 0.0], [0.3, 0.0, 0.0]])
        h, g = build_generators(pos, PERP)
        rho0 = ramsey_product_state(np.zeros(2))
        end = evolve_exact(rho0, h, g, [0.4])[-1]
        # independent RK4 integration of the same generator
        from latticeclock.master_oracle import _liouvillian

        rhs = _liouvillian(h, g)
        y = rho0.ravel().copy()
        hstep = 2e-5
        t = 0.0
        for _ in range(int(round(0.4 / hstep))):
            k1 = rhs(t, y)
            k2 = rhs(t + hstep / 2, y + hstep / 2 * k1)
            k3 = rhs(t + hstep / 2, y + hstep / 2 * k2)
            k4 = rhs(t + hstep, y + hstep * k3)
            y = y + hstep / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t += hstep
        np.testing.assert_allclose(end, y.reshape(4, 4), atol=1e-8)


class TestExpectations:
    def test_ramsey_state(self):
        rho = ramsey_product_state(np.zeros(3))
        np.testing.assert_allclose(expectations(rho, 3), np.tile([1.0, 0.0, 0.0], (3, 1)),
                                   atol=1e-14)

    def test_phase_convention(self):
        rho = ramsey_product_state([np.pi / 2])
        np.testing.assert_allclose(expectations(rho, 1)[0], [0.0, -1.0, 0.0], atol=1e-14)

    def test_fully_mixed(self):
        rho = np.eye(8, dtype=complex) / 8.0
        np.testing.assert_allclose(expectations(rho, 3), 0.0, atol=1e-14)

    def test_ground_state(self):
        rho = product_state(np.tile([0.0, 0.0, -1.0], (2, 1)))
        np.testing.assert_allclose(expectations(rho, 2), np.tile([0.0, 0.0, -1.0], (2, 1)),
                                   atol=1e-14)


class TestMeanFieldBound:
    @pytest.mark.parametrize("n,thresh", [(2, 0.05), (4, 0.10)])
    def test_populations_track_oracle(self, n, thresh):
        if n == 2:
            pos = np.array([[0.0, 0.0, 0.0], [0.8, 0.0, 0.0]])
        else:
            pos = positions(Geometry.polygon(4, 0.8))
        phases = np.zeros(n)
        times = np.linspace(0.0, 1.0, 11)
        h, g = build_generators(pos, PERP)
        rhos = evolve_exact(ramsey_product_state(phases), h, g, times)
        exact = np.array([excited_populations(r, n) for r in rhos])
        mf = evolve_general(pos, PERP, np.tile([1.0, 0.0, 0.0], (n, 1)), times)
        mf_pop = (1.0 + mf[:, :, 2]) / 2.0
        assert np.max(np.abs(exact - mf_pop)) < thresh

    def test_degradation_at_close_range(self):
        # deviation measured over all Bloch components (the coherences
        # degrade first; populations of the symmetric pair largely cancel)
        times = np.linspace(0.0, 1.0, 11)
        devs = {}
        for d in (0.8, 0.2):
            pos = np.array([[0.0, 0.0, 0.0], [d, 0.0, 0.0]])
            h, g = build_generators(pos, PERP)
            rhos = evolve_exact(ramsey_product_state(np.zeros(2)), h, g, times)
            exact = np.array([expectations(r, 2) for r in rhos])
            mf = evolve_general(pos, PERP, np.tile([1.0, 0.0, 0.0], (2, 1)), times)
            devs[d] = np.max(np.abs(exact - mf))
        assert devs[0.2] > devs[0.8]
