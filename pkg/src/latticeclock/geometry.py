"""Atom position sets and per-site excitation phase profiles.

Supported arrangements (spacing d in lambda0 units, always the
nearest-neighbor distance, equal to the polygon side length):

  polygon     regular n-gon in the xy plane, side length d
  chain       n equidistant sites along x
  square      nx * ny grid in the xy plane
  hexagonal   nx * ny rhombic patch of the triangular lattice (the
              "lattice constant" is the nearest-neighbor distance)
  cubic       nx * ny * nz grid

The default dipole orientation is perpendicular to the chain axis or
lattice plane (theta = pi/2 for every pair, making couplings depend on
distance only), and along the z lattice axis for cubic arrangements.  The
choice is configurable and echoed in all CLI output.

A PhaseProfile assigns the excitation phase delta_phi*(j-1) to the j-th
site along a designated lattice axis, the product-state phase gradient
imprinted by a tilted excitation pulse.
"""

from dataclasses import dataclass

import numpy as np

from .couplings import DipoleOrientation
from .errors import SizeLimitError

# Explicit-position mode materializes coordinates; larger systems go through
# the implicit shell paths in lattice_sums.
MAX_EXPLICIT_SITES = 10**7

_KINDS = ("polygon", "chain", "square", "hexagonal", "cubic")
_SQRT3_2 = np.sqrt(3.0) / 2.0


def default_polarization(kind):
    """Perpendicular to the chain/plane; along the z axis for cubic."""
    return DipoleOrientation.along("z")


@dataclass(frozen=True)
class Geometry:
    """A lattice arrangement plus the common dipole orientation."""

    kind: str
    spacing: float
    counts: tuple
    polarization: DipoleOrientation = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown geometry kind {self.kind!r}; expected one of {_KINDS}")
        if not self.spacing > 0.0:
            raise ValueError(f"spacing must be positive, got {self.spacing}")
        counts = tuple(int(c) for c in self.counts)
        expected = {"polygon": 1, "chain": 1, "square": 2, "hexagonal": 2, "cubic": 3}[self.kind]
        if len(counts) != expected:
            raise ValueError(f"{self.kind} geometry takes {expected} count(s), got {counts}")
        if any(c < 1 for c in counts):
            raise ValueError(f"site counts must be >= 1, got {counts}")
        if self.kind == "polygon" and counts[0] < 2:
            raise ValueError("a polygon needs at least 2 vertices")
        object.__setattr__(self, "counts", counts)
        if self.polarization is None:
            object.__setattr__(self, "polarization", default_polarization(self.kind))
        elif not isinstance(self.polarization, DipoleOrientation):
            object.__setattr__(
                self, "polarization", DipoleOrientation(np.asarray(self.polarization, float))
            )

    @classmethod
    def polygon(cls, n, spacing, polarization=None):
        return cls("polygon", spacing, (n,), polarization)

    @classmethod
    def chain(cls, n, spacing, polarization=None):
        return cls("chain", spacing, (n,), polarization)

    @classmethod
    def square(cls, nx, ny, spacing, polarization=None):
        return cls("square", spacing, (nx, ny), polarization)

    @classmethod
    def hexagonal(cls, nx, ny, spacing, polarization=None):
        return cls("hexagonal", spacing, (nx, ny), polarization)

    @classmethod
    def cubic(cls, nx, ny, nz, spacing, polarization=None):
        return cls("cubic", spacing, (nx, ny, nz), polarization)

    @property
    def n_sites(self):
        n = 1
        for c in self.counts:
            n *= c
        return n

    def rescaled(self, spacing):
        """Same arrangement at a different spacing."""
        return Geometry(self.kind, spacing, self.counts, self.polarization)


def positions(geom):
    """Explicit site coordinates, shape (N, 3), in lambda0 units.

    Site ordering: polygon/chain by index; 2D row-major in (i, j); 3D
    row-major in (i, j, k).  Raises SizeLimitError beyond the explicit cap.
    """
    n_sites = geom.n_sites
    if n_sites > MAX_EXPLICIT_SITES:
        raise SizeLimitError(
            f"{n_sites} sites exceed the explicit-position cap {MAX_EXPLICIT_SITES}; "
            "use the shell-summation path instead"
        )
    d = geom.spacing
    if geom.kind == "polygon":
        n = geom.counts[0]
        circumradius = d / (2.0 * np.sin(np.pi / n))
        angles = 2.0 * np.pi * np.arange(n) / n
        out = np.zeros((n, 3))
        out[:, 0] = circumradius * np.cos(angles)
        out[:, 1] = circumradius * np.sin(angles)
        return out
    if geom.kind == "chain":
        n = geom.counts[0]
        out = np.zeros((n, 3))
        out[:, 0] = d * np.arange(n)
        return out
    if geom.kind in ("square", "hexagonal"):
        nx, ny = geom.counts
        i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
        i = i.ravel().astype(float)
        j = j.ravel().astype(float)
        out = np.zeros((nx * ny, 3))
        if geom.kind == "square":
            out[:, 0] = d * i
            out[:, 1] = d * j
        else:
            out[:, 0] = d * (i + 0.5 * j)
            out[:, 1] = d * _SQRT3_2 * j
        return out
    nx, ny, nz = geom.counts
    i, j, k = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
    out = np.zeros((nx * ny * nz, 3))
    out[:, 0] = d * i.ravel()
    out[:, 1] = d * j.ravel()
    out[:, 2] = d * k.ravel()
    return out


def innermost_index(geom):
    """Flat index of the site nearest the patch center (shell reference)."""
    if geom.kind in ("polygon",):
        return 0  # every vertex is equivalent
    if geom.kind == "chain":
        return (geom.counts[0] - 1) // 2
    if geom.kind in ("square", "hexagonal"):
        nx, ny = geom.counts
        return ((nx - 1) // 2) * ny + (ny - 1) // 2
    nx, ny, nz = geom.counts
    return (((nx - 1) // 2) * ny + (ny - 1) // 2) * nz + (nz - 1) // 2


def site_axis_indices(geom, axis=0):
    """Integer index of every site along the given lattice axis."""
    if geom.kind in ("polygon", "chain"):
        if axis != 0:
            raise ValueError(f"{geom.kind} has a single axis; got axis={axis}")
        return np.arange(geom.counts[0])
    if geom.kind in ("square", "hexagonal"):
        nx, ny = geom.counts
        if axis not in (0, 1):
            raise ValueError(f"2D lattice axis must be 0 or 1, got {axis}")
        i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
        return (i if axis == 0 else j).ravel()
    nx, ny, nz = geom.counts
    if axis not in (0, 1, 2):
        raise ValueError(f"3D lattice axis must be 0, 1 or 2, got {axis}")
    i, j, k = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
    return (i, j, k)[axis].ravel()


def wrap_angle(x):
    """Wrap an angle to the interval (-pi, pi]."""
    w = np.mod(np.asarray(x, float) + np.pi, 2.0 * np.pi)
    w = np.where(w <= 0.0, w + 2.0 * np.pi, w) - np.pi
    return float(w) if np.ndim(x) == 0 else w


@dataclass(frozen=True)
class PhaseProfile:
    """Linear excitation-phase gradient delta_phi per site along one axis."""

    delta_phi: float = 0.0
    axis: int = 0


def phase_at(profile, site_index):
    """Phase of the site with 1-based index j along the profile axis.

    Returns delta_phi*(j-1) wrapped to (-pi, pi].
    """
    return wrap_angle(profile.delta_phi * (site_index - 1))


def site_phases(geom, profile):
    """Unwrapped per-site phases delta_phi * (index along the profile axis)."""
    if profile is None:
        return np.zeros(geom.n_sites)
    return profile.delta_phi * site_axis_indices(geom, profile.axis).astype(float)
