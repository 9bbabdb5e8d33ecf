"""Exact open-system density-matrix evolution for small ensembles (N <= 8).

Ground truth for validating the mean-field factorization.  The density
matrix evolves under

    drho/dt = i[rho, H] + sum_ij gamma_ij (2 L_i rho L_j+ - L_i+ L_j- rho
              - rho L_i+ L_j-) / 2

with H = sum_{i != j} omega_ij sigma_i+ sigma_j- and the same pair rates
as the rest of the package (diagonal gamma_ii = 1 in gamma units).  The
generator is applied structurally, site operators act through index
slicing on the 2^N x 2^N matrix, so no 4^N x 4^N superoperator is ever
materialized and N = 8 stays cheap.

Basis convention: site bit 0 = ground, 1 = excited; site 0 owns the most
significant bit.  Expectation values use the package-wide Bloch sign
convention (sx = cos phi, sy = -sin phi for the phased Ramsey state).
"""

import numpy as np

from .couplings import pair_coupling
from .errors import NumericalError
from .meanfield import IntegratorSpec, _integrate

MAX_ATOMS = 8
TRACE_TOL = 1e-9
HERMITICITY_TOL = 1e-10
POSITIVITY_TOL = 1e-8


def _n_atoms_of(dim):
    n = int(round(np.log2(dim)))
    if 2**n != dim:
        raise ValueError(f"density matrix dimension {dim} is not a power of two")
    return n


def build_generators(pos, polarization):
    """Hamiltonian matrix H (2^N x 2^N) and the N x N decay-rate matrix."""
    pos = np.asarray(pos, dtype=float)
    n = pos.shape[0]
    if not 1 <= n <= MAX_ATOMS:
        raise ValueError(f"the exact oracle supports 1..{MAX_ATOMS} atoms, got {n}")
    dim = 2**n
    gamma_matrix = np.eye(n)
    hamiltonian = np.zeros((dim, dim), dtype=complex)
    basis = np.arange(dim)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            pc = pair_coupling(pos[i], pos[j], polarization)
            gamma_matrix[i, j] = pc.gamma
            # sigma_i+ sigma_j- maps states with (i=g, j=e) to (i=e, j=g)
            bit_i = n - 1 - i
            bit_j = n - 1 - j
            source = (((basis >> bit_i) & 1) == 0) & (((basis >> bit_j) & 1) == 1)
            src = basis[source]
            dst = src + (1 << bit_i) - (1 << bit_j)
            hamiltonian[dst, src] += pc.omega
    return hamiltonian, gamma_matrix


def _lower_left(rho, i, n):
    """sigma_i- rho (row action)."""
    dim = rho.shape[0]
    lead = 2**i
    trail = dim // (2 * lead)
    r = rho.reshape(lead, 2, trail, dim)
    out = np.zeros_like(r)
    out[:, 0, :, :] = r[:, 1, :, :]
    return out.reshape(dim, dim)


def _raise_right(rho, j, n):
    """rho sigma_j+ (column action)."""
    dim = rho.shape[0]
    lead = 2**j
    trail = dim // (2 * lead)
    r = rho.reshape(dim, lead, 2, trail)
    out = np.zeros_like(r)
    out[:, :, 0, :] = r[:, :, 1, :]
    return out.reshape(dim, dim)


def _liouvillian(hamiltonian, gamma_matrix):
    n = gamma_matrix.shape[0]
    dim = hamiltonian.shape[0]
    # anticommutator part: P rho + rho P+ with P = -iH - M, M = sum gamma_ij L_i+ L_j- / 2
    m_op = np.zeros((dim, dim), dtype=complex)
    basis = np.arange(dim)
    for i in range(n):
        for j in range(n):
            bit_i = n - 1 - i
            bit_j = n - 1 - j
            # sigma_i+ sigma_j-: for i == j this is the excited projector of site i
            excited_j = ((basis >> bit_j) & 1) == 1
            if i == j:
                source = excited_j
            else:
                source = excited_j & (((basis >> bit_i) & 1) == 0)
            src = basis[source]
            dst = src if i == j else src + (1 << bit_i) - (1 << bit_j)
            m_op[dst, src] += 0.5 * gamma_matrix[i, j]
    p_op = -1j * hamiltonian - m_op
    p_dag = p_op.conj().T

    def rhs(t, y):
        rho = y.reshape(dim, dim)
        drho = p_op @ rho + rho @ p_dag
        lowered = [_lower_left(rho, i, n) for i in range(n)]
        for j in range(n):
            mix = gamma_matrix[0, j] * lowered[0]
            for i in range(1, n):
                mix = mix + gamma_matrix[i, j] * lowered[i]
            drho += _raise_right(mix, j, n)
        return drho.ravel()

    return rhs


def validate_density_matrix(rho, trace_tol=TRACE_TOL, herm_tol=HERMITICITY_TOL,
                            pos_tol=POSITIVITY_TOL):
    """Raise NumericalError when rho violates its invariants."""
    herm = float(np.max(np.abs(rho - rho.conj().T)))
    if herm > herm_tol:
        raise NumericalError(f"density matrix lost hermiticity: max deviation {herm}")
    tr = complex(np.trace(rho))
    if abs(tr - 1.0) > trace_tol:
        raise NumericalError(f"density matrix trace drifted to {tr}")
    lowest = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0])
    if lowest < -pos_tol:
        raise NumericalError(f"density matrix lost positivity: min eigenvalue {lowest}")


def evolve_exact(rho0, hamiltonian, gamma_matrix, times, spec=None, check=True):
    """Density matrices at the requested times; invariants checked at each."""
    spec = spec or IntegratorSpec()
    rho0 = np.asarray(rho0, dtype=complex)
    dim = rho0.shape[0]
    if rho0.shape != (dim, dim) or hamiltonian.shape != (dim, dim):
        raise ValueError("rho0 and the Hamiltonian must be square and matched")
    if check:
        validate_density_matrix(rho0)
    rhs = _liouvillian(np.asarray(hamiltonian, dtype=complex), np.asarray(gamma_matrix, float))
    flat = _integrate(rhs, rho0.ravel(), times, spec)
    out = [flat[t].reshape(dim, dim) for t in range(flat.shape[0])]
    if check:
        for rho in out:
            validate_density_matrix(rho)
    return out


def _site_reduced(rho, k, n):
    dim = rho.shape[0]
    lead = 2**k
    trail = dim // (2 * lead)
    r = rho.reshape(lead, 2, trail, lead, 2, trail)
    return np.einsum("aibajb->ij", r)


def expectations(rho, n_atoms=None):
    """Per-atom (sx, sy, sz) from partial traces, shape (N, 3)."""
    rho = np.asarray(rho)
    n = n_atoms if n_atoms is not None else _n_atoms_of(rho.shape[0])
    out = np.zeros((n, 3))
    for k in range(n):
        red = _site_reduced(rho, k, n)
        out[k, 0] = 2.0 * red[1, 0].real
        out[k, 1] = -2.0 * red[1, 0].imag
        out[k, 2] = (red[1, 1] - red[0, 0]).real
    return out


def product_state(bloch):
    """Density matrix of a product state from per-atom Bloch vectors (N, 3)."""
    bloch = np.atleast_2d(np.asarray(bloch, dtype=float))
    rho = None
    for sx, sy, sz in bloch:
        # basis (g, e); row/col order matches the expectations convention
        single = 0.5 * np.array(
            [[1.0 - sz, sx + 1j * sy], [sx - 1j * sy, 1.0 + sz]], dtype=complex
        )
        rho = single if rho is None else np.kron(rho, single)
    return rho


def ramsey_product_state(phases):
    """Exact density matrix of the phased Ramsey product state."""
    phases = np.atleast_1d(np.asarray(phases, dtype=float))
    psi = np.array([1.0], dtype=complex)
    for phi in phases:
        psi = np.kron(psi, np.array([1.0, np.exp(1j * phi)]) / np.sqrt(2.0))
    return np.outer(psi, psi.conj())
