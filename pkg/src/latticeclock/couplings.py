"""Pairwise dipole-dipole couplings between identical two-level emitters.

All rates are expressed in units of the single-atom decay rate gamma and all
distances in units of the transition wavelength lambda0, so the scaled
separation is xi = 2*pi*(r/lambda0).  A pair at separation r with dipole
orientation e exchanges energy at the coherent rate

    omega_ij = (3/4) * G(xi)          (dispersive part)

and acquires the collective decay cross-rate

    gamma_ij = (3/2) * F(xi)          (radiative part)

where F and G combine sin(xi)/xi, cos(xi)/xi^2 and sin(xi)/xi^3 with the
angular weights alpha = 1 - cos^2(theta) and beta = 1 - 3*cos^2(theta),
theta being the angle between the pair separation and the common dipole
axis.  The 1/xi^2 - 1/xi^3 combination in F cancels catastrophically for
small xi, so it is evaluated from its power series below XI_SERIES_CUTOFF.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import CoincidentAtomsError

TWO_PI = 2.0 * np.pi

# Below this the (cos xi/xi^2 - sin xi/xi^3) combination switches to its
# series; direct evaluation loses ~2*log10(1/xi) digits.
XI_SERIES_CUTOFF = 0.5

# Series coefficients of cos(x)/x^2 - sin(x)/x^3 = sum_m c_m x^(2m-2),
# c_m = (-1)^m * 2m / (2m+1)!.  Eleven terms are exact to double precision
# for x < 0.5.
_H_COEFFS = np.array(
    [(-1.0) ** m * (2.0 * m) / float(math.factorial(2 * m + 1)) for m in range(1, 12)]
)


@dataclass(frozen=True)
class DipoleOrientation:
    """Common dipole axis of the ensemble, a unit 3-vector."""

    e: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.e, dtype=float)
        if e.shape != (3,):
            raise ValueError(f"dipole orientation must be a 3-vector, got shape {e.shape}")
        norm = float(np.linalg.norm(e))
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"dipole orientation must be a unit vector, |e| = {norm!r}")
        object.__setattr__(self, "e", e)

    @classmethod
    def along(cls, axis):
        """Unit orientation along 'x', 'y' or 'z'."""
        vec = {"x": (1.0, 0.0, 0.0), "y": (0.0, 1.0, 0.0), "z": (0.0, 0.0, 1.0)}[axis]
        return cls(np.array(vec))


@dataclass(frozen=True)
class PairCoupling:
    """Coherent exchange rate and collective decay rate of one pair (gamma units)."""

    omega: float
    gamma: float


def _h_combination(xi):
    """cos(xi)/xi^2 - sin(xi)/xi^3, series-protected for small arguments."""
    xi = np.asarray(xi, dtype=float)
    small = xi < XI_SERIES_CUTOFF
    if not np.any(small):
        return np.cos(xi) / xi**2 - np.sin(xi) / xi**3
    x2 = xi * xi
    series = np.zeros_like(xi)
    for c in _H_COEFFS[::-1]:
        series = series * x2 + c
    # np.where evaluates both branches; xi > 0 is guaranteed by callers.
    return np.where(small, series, np.cos(xi) / xi**2 - np.sin(xi) / xi**3)


def _fg_from_cos2(xi, cos2_theta):
    """Evaluate (F, G) from xi > 0 and cos^2(theta); vectorized workhorse."""
    xi = np.asarray(xi, dtype=float)
    alpha = 1.0 - cos2_theta
    beta = 1.0 - 3.0 * cos2_theta
    sin_xi = np.sin(xi)
    cos_xi = np.cos(xi)
    f = alpha * sin_xi / xi + beta * _h_combination(xi)
    g = -alpha * cos_xi / xi + beta * (sin_xi / xi**2 + cos_xi / xi**3)
    return f, g


def _check_xi(xi):
    xi = np.asarray(xi, dtype=float)
    if np.any(xi <= 0.0):
        raise ValueError("xi must be positive; the xi -> 0 limit is defined by convention only")
    return xi


def f_function(xi, theta):
    """Radiative coupling function F(xi) for dipole angle theta.

    Accepts scalars or arrays; raises ValueError for xi <= 0.  The xi -> 0
    limit is 2/3 independent of theta, so (3/2)*F tends to the single-atom
    rate.
    """
    xi = _check_xi(xi)
    cos2 = np.cos(theta) ** 2
    f, _ = _fg_from_cos2(xi, cos2)
    return f if f.ndim else float(f)


def g_function(xi, theta):
    """Dispersive coupling function G(xi); diverges as beta/xi^3 for xi -> 0."""
    xi = _check_xi(xi)
    cos2 = np.cos(theta) ** 2
    _, g = _fg_from_cos2(xi, cos2)
    return g if g.ndim else float(g)


def pair_coupling(r_i, r_j, orientation):
    """Coupling rates for atoms at positions r_i, r_j (lambda0 units).

    Returns a PairCoupling with omega = (3/4) G and gamma = (3/2) F in gamma
    units.  Raises CoincidentAtomsError when the positions coincide.
    """
    r_i = np.asarray(r_i, dtype=float)
    r_j = np.asarray(r_j, dtype=float)
    if not isinstance(orientation, DipoleOrientation):
        orientation = DipoleOrientation(np.asarray(orientation, dtype=float))
    sep = r_i - r_j
    dist = float(np.linalg.norm(sep))
    if dist == 0.0:
        raise CoincidentAtomsError(f"atoms coincide at {r_i}")
    cos2 = float(np.dot(orientation.e, sep) / dist) ** 2
    f, g = _fg_from_cos2(TWO_PI * dist, cos2)
    return PairCoupling(omega=0.75 * float(g), gamma=1.5 * float(f))
