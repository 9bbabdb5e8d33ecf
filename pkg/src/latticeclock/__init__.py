"""Collective dipole-dipole couplings and dynamics in optical lattice geometries.

Units convention, global to the package: rates and frequencies in units of
the single-atom decay rate gamma, distances in units of the transition
wavelength lambda0 (so the scaled separation is 2*pi*r), time in units of
1/gamma, detunings in gamma.  Bloch-vector sign convention: the product
state (|g> + exp(i*phi)|e>)/sqrt(2) has (sx, sy, sz) = (cos phi, -sin phi, 0).
"""

__version__ = "0.1.0"

from .couplings import DipoleOrientation, PairCoupling, f_function, g_function, pair_coupling
from .geometry import Geometry, PhaseProfile, phase_at, positions
from .lattice_sums import (
    EffectiveCouplings,
    SumPlan,
    cubic_innermost,
    effective_average,
    effective_explicit,
    effective_shell,
    sweep_distance,
    sweep_phase_map,
)
from .meanfield import IntegratorSpec, evolve_general, evolve_symmetric, ramsey_init
from .master_oracle import build_generators, evolve_exact, expectations
from .ramsey import RamseyConfig, RamseyResult, fringe_shift, ramsey_signal, zero_crossing_slope

__all__ = [
    "DipoleOrientation",
    "PairCoupling",
    "f_function",
    "g_function",
    "pair_coupling",
    "Geometry",
    "PhaseProfile",
    "phase_at",
    "positions",
    "EffectiveCouplings",
    "SumPlan",
    "cubic_innermost",
    "effective_average",
    "effective_explicit",
    "effective_shell",
    "sweep_distance",
    "sweep_phase_map",
    "IntegratorSpec",
    "evolve_general",
    "evolve_symmetric",
    "ramsey_init",
    "build_generators",
    "evolve_exact",
    "expectations",
    "RamseyConfig",
    "RamseyResult",
    "fringe_shift",
    "ramsey_signal",
    "zero_crossing_slope",
]
