"""Effective coupling sums over lattice partners, the performance kernel.

For a reference atom k the effective quantities are the partner sums

    omega_eff = sum_j omega_kj            gamma_eff = sum_j gamma_kj

plus their excitation-phase weighted versions

    omega_cos = sum_j omega_kj cos(phi_k - phi_j)    (same for gamma)
    omega_sin = sum_j omega_kj sin(phi_k - phi_j)    (same for gamma)

from which the rotated-frame couplings follow as

    omega_eff_rot = omega_cos - gamma_sin / 2
    gamma_eff_rot = gamma_cos + 2 * omega_sin

Two summation modes exist.  Explicit mode walks every pair of an explicit
position set.  Shell mode exploits lattice structure: partner offsets are
grouped into equivalence classes keyed by exact integer invariants (the
squared distance in units of d^2, the squared projection on the dipole
axis, and the absolute phase step), after which a distance sweep reuses
the same class table for every spacing.  Shell sums run through the
kernels backend (compiled or numpy) with a blocked, thread-count
independent compensated reduction.

Truncation, not resummation: results for huge lattices are large finite
sums of a conditionally convergent series.  est_error reports the
magnitude of the final distance shell's contribution, a heuristic for
such series, and rows with d within 1e-6 of an integer are flagged as
divergent (the 1/xi tails add coherently there).
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .couplings import TWO_PI, _fg_from_cos2
from .errors import CoincidentAtomsError, SizeLimitError
from .geometry import Geometry, innermost_index, positions, site_axis_indices, site_phases

DIVERGENCE_WINDOW = 1e-6
# Above this edge length cubic class tables are skipped in favor of the
# implicit fundamental-domain kernel (no per-class arrays materialized).
CUBIC_CLASS_LIMIT = 501


@dataclass(frozen=True)
class EffectiveCouplings:
    """Partner sums for one reference atom, in gamma units."""

    omega_eff: float
    gamma_eff: float
    omega_cos: float
    omega_sin: float
    gamma_cos: float
    gamma_sin: float
    n_terms: int
    est_error: float = 0.0
    diverged: bool = False

    @property
    def omega_eff_rot(self):
        return self.omega_cos - 0.5 * self.gamma_sin

    @property
    def gamma_eff_rot(self):
        return self.gamma_cos + 2.0 * self.omega_sin


@dataclass(frozen=True)
class SumPlan:
    """How to accumulate shell sums.

    mode 'shell' groups partners into symmetry classes, 'explicit' forces
    the direct pair walk (small systems only).  A chain-mode tolerance, if
    given, grows the shell count until the last shell contributes less
    than the tolerance in absolute rate units (heuristic for a
    conditionally convergent series).
    """

    mode: str = "shell"
    num_threads: int = 0
    tolerance: float = None
    max_shells: int = 10**9


def _as_orientation_vector(polarization):
    e = getattr(polarization, "e", polarization)
    return np.asarray(e, dtype=float)


def _is_diverged(d):
    return abs(d - round(d)) <= DIVERGENCE_WINDOW and round(d) >= 1


def _result_from_sums(sums, n_terms, est_error, diverged):
    return EffectiveCouplings(
        omega_eff=float(sums[0]),
        gamma_eff=float(sums[1]),
        omega_cos=float(sums[2]),
        omega_sin=float(sums[3]),
        gamma_cos=float(sums[4]),
        gamma_sin=float(sums[5]),
        n_terms=int(n_terms),
        est_error=float(est_error),
        diverged=bool(diverged),
    )


# ---------------------------------------------------------------------------
# explicit mode


def _pair_terms(pos, ref, e):
    """Distances and cos^2(theta) from atom ref to every other atom."""
    diffs = np.delete(pos, ref, axis=0) - pos[ref]
    dist = np.linalg.norm(diffs, axis=1)
    if np.any(dist == 0.0):
        raise CoincidentAtomsError(f"coincident atom positions around index {ref}")
    cos2 = (diffs @ e / dist) ** 2
    return dist, cos2


def effective_for_atom(pos, polarization, phases=None, ref=0):
    """Effective couplings of one reference atom in an explicit set."""
    pos = np.asarray(pos, dtype=float)
    n = pos.shape[0]
    if n < 2:
        raise ValueError("need at least two atoms")
    e = _as_orientation_vector(polarization)
    dist, cos2 = _pair_terms(pos, ref, e)
    f, g = _fg_from_cos2(TWO_PI * dist, cos2)
    omega = 0.75 * g
    gamma = 1.5 * f
    if phases is None:
        phase_diff = np.zeros(n - 1)
    else:
        phases = np.asarray(phases, dtype=float)
        phase_diff = phases[ref] - np.delete(phases, ref)
    cp = np.cos(phase_diff)
    sp = np.sin(phase_diff)
    sums = (
        np.sum(omega),
        np.sum(gamma),
        np.sum(omega * cp),
        np.sum(omega * sp),
        np.sum(gamma * cp),
        np.sum(gamma * sp),
    )
    return _result_from_sums(sums, n - 1, 0.0, False)


def effective_explicit(pos, polarization, phases=None):
    """Effective couplings for every atom of an explicit position set."""
    pos = np.asarray(pos, dtype=float)
    return [effective_for_atom(pos, polarization, phases, ref=k) for k in range(pos.shape[0])]


# ---------------------------------------------------------------------------
# shell mode: integer-keyed symmetry classes


@dataclass(frozen=True)
class ShellClasses:
    """Merged partner classes of one lattice patch, spacing-independent.

    r2_units holds the squared distance in units of d^2 (exact integers),
    cos2_theta the squared angle factor per class, n_phase the absolute
    phase step, and m_cos/m_sin the integer cos/sin multiplicities.
    """

    r2_units: np.ndarray
    cos2_theta: np.ndarray
    n_phase: np.ndarray
    m_cos: np.ndarray
    m_sin: np.ndarray
    n_terms: int

    def last_shell(self):
        sel = self.r2_units == self.r2_units[-1]
        return ShellClasses(
            self.r2_units[sel],
            self.cos2_theta[sel],
            self.n_phase[sel],
            self.m_cos[sel],
            self.m_sin[sel],
            int(np.sum(self.m_cos[sel])),
        )


def _merge_classes(r2, cos2_key_num, phase_step, n_terms):
    """Merge offsets sharing (r2, cos2 numerator, |phase step|) into classes.

    cos2_key_num is the exact integer numerator of cos^2(theta)*r2 (zero
    for in-plane lattices with perpendicular dipoles).  Returns arrays in
    ascending-distance order.
    """
    r2 = np.asarray(r2, dtype=np.int64)
    num = np.asarray(cos2_key_num, dtype=np.int64)
    step = np.asarray(phase_step, dtype=np.int64)
    abs_step = np.abs(step)
    k_num = int(num.max()) + 1 if num.size else 1
    k_step = int(abs_step.max()) + 1 if abs_step.size else 1
    enc = (r2 * k_num + num) * k_step + abs_step
    keys, inverse = np.unique(enc, return_inverse=True)
    m_cos = np.bincount(inverse, minlength=len(keys)).astype(np.int64)
    sign = np.sign(step)
    # m_sin counts negative-offset minus positive-offset partners
    m_sin = np.bincount(inverse, weights=-sign, minlength=len(keys)).astype(np.int64)
    r2_u = keys // (k_num * k_step)
    rem = keys % (k_num * k_step)
    num_u = rem // k_step
    step_u = rem % k_step
    cos2 = np.where(r2_u > 0, num_u / np.maximum(r2_u, 1), 0.0)
    return ShellClasses(
        r2_units=np.ascontiguousarray(r2_u),
        cos2_theta=np.ascontiguousarray(cos2.astype(np.float64)),
        n_phase=np.ascontiguousarray(step_u),
        m_cos=np.ascontiguousarray(m_cos),
        m_sin=np.ascontiguousarray(m_sin),
        n_terms=n_terms,
    )


def _axis_of(e, tol=1e-12):
    """Index of the coordinate axis e lies along, or None."""
    for axis in range(3):
        if abs(abs(e[axis]) - 1.0) <= tol:
            return axis
    return None


def _offsets_2d(geom, profile):
    nx, ny = geom.counts
    cx, cy = (nx - 1) // 2, (ny - 1) // 2
    i = np.arange(-cx, nx - cx, dtype=np.int64)
    j = np.arange(-cy, ny - cy, dtype=np.int64)
    ii, jj = np.meshgrid(i, j, indexing="ij")
    ii = ii.ravel()
    jj = jj.ravel()
    keep = (ii != 0) | (jj != 0)
    ii = ii[keep]
    jj = jj[keep]
    if geom.kind == "square":
        r2 = ii * ii + jj * jj
    else:
        r2 = ii * ii + ii * jj + jj * jj
    if profile is not None and profile.delta_phi != 0.0:
        step = ii if profile.axis == 0 else jj
    else:
        step = np.zeros_like(ii)
    return r2, step


def shell_classes(geom, profile=None):
    """Build the spacing-independent class table for a lattice patch.

    Chain patches are handled implicitly (no table).  2D patches require
    the dipole axis perpendicular to the lattice plane; cubic patches must
    be odd cubes with an axis-aligned dipole and no phase gradient, and
    use the 16-fold symmetry of the dipole-axis point group (sign flips
    plus the transverse swap), with accidental degeneracies merged by the
    exact integer keys.
    """
    e = _as_orientation_vector(geom.polarization)
    if geom.kind in ("square", "hexagonal"):
        if _axis_of(e) != 2:
            raise ValueError(
                "shell mode for 2D lattices requires the dipole axis perpendicular "
                "to the lattice plane; use explicit mode otherwise"
            )
        r2, step = _offsets_2d(geom, profile)
        return _merge_classes(r2, np.zeros_like(r2), step, len(r2))
    if geom.kind == "cubic":
        nx, ny, nz = geom.counts
        if not (nx == ny == nz and nx % 2 == 1):
            raise ValueError("shell mode for cubic lattices requires an odd L x L x L cube")
        if profile is not None and profile.delta_phi != 0.0:
            raise ValueError("shell mode for cubic lattices does not support phase gradients")
        axis = _axis_of(e)
        if axis is None:
            raise ValueError("shell mode for cubic lattices requires an axis-aligned dipole")
        m = (nx - 1) // 2
        iu, ju = np.triu_indices(m + 1)
        k = np.arange(0, m + 1, dtype=np.int64)
        i_all = np.repeat(iu.astype(np.int64), m + 1)
        j_all = np.repeat(ju.astype(np.int64), m + 1)
        k_all = np.tile(k, len(iu))
        r2 = i_all * i_all + j_all * j_all + k_all * k_all
        keep = r2 > 0
        i_all, j_all, k_all, r2 = i_all[keep], j_all[keep], k_all[keep], r2[keep]
        mult = (
            np.where(i_all < j_all, 2, 1)
            * np.where(i_all > 0, 2, 1)
            * np.where(j_all > 0, 2, 1)
            * np.where(k_all > 0, 2, 1)
        ).astype(np.int64)
        num = k_all * k_all
        k_num = int(num.max()) + 1
        enc = r2 * k_num + num
        keys, inverse = np.unique(enc, return_inverse=True)
        m_cos = np.bincount(inverse, weights=mult, minlength=len(keys)).astype(np.int64)
        r2_u = keys // k_num
        num_u = keys % k_num
        return ShellClasses(
            r2_units=np.ascontiguousarray(r2_u),
            cos2_theta=np.ascontiguousarray(num_u / r2_u),
            n_phase=np.zeros(len(keys), dtype=np.int64),
            m_cos=np.ascontiguousarray(m_cos),
            m_sin=np.zeros(len(keys), dtype=np.int64),
            n_terms=nx * ny * nz - 1,
        )
    raise ValueError(f"shell mode does not support geometry kind {geom.kind!r}")


def _eval_classes(classes, d, delta_phi, num_threads):
    return kernels.class_sum(
        d,
        delta_phi,
        classes.r2_units,
        classes.cos2_theta,
        classes.n_phase,
        classes.m_cos,
        classes.m_sin,
        num_threads,
    )


def _class_est_error(classes, d, delta_phi):
    last = classes.last_shell()
    # evaluated through the fallback path: a handful of classes only
    from .kernels import fallback

    sums = fallback.class_sum(
        d, delta_phi, last.r2_units, last.cos2_theta, last.n_phase, last.m_cos, last.m_sin
    )
    return max(abs(sums[0]), abs(sums[1]))


def _chain_sums(geom, profile, d, num_threads):
    n = geom.counts[0]
    ref = (n - 1) // 2
    left, right = ref, n - 1 - ref
    paired = min(left, right)
    e = _as_orientation_vector(geom.polarization)
    cos2 = float(e[0]) ** 2
    dphi = profile.delta_phi if profile is not None else 0.0
    if profile is not None and profile.axis != 0:
        raise ValueError("chain phase profiles run along the chain axis")
    sums = kernels.chain_range_sum(d, dphi, cos2, 1, paired + 1, 2.0, 0.0, num_threads)
    if right > left:
        sums = sums + kernels.chain_range_sum(
            d, dphi, cos2, paired + 1, right + 1, 1.0, -1.0, num_threads
        )
    n_max = max(left, right)
    f, g = _fg_from_cos2(np.array([TWO_PI * d * n_max]), cos2)
    w_last = 2.0 if right == left else 1.0
    est = max(abs(0.75 * float(g[0])), abs(1.5 * float(f[0]))) * w_last
    return sums, n - 1, est


def _chain_sums_tolerance(geom, profile, d, plan):
    """Grow the shell count until the last shell drops below the tolerance."""
    e = _as_orientation_vector(geom.polarization)
    cos2 = float(e[0]) ** 2
    dphi = profile.delta_phi if profile is not None else 0.0
    sums = np.zeros(6)
    lo = 1
    shells = 1 << 16
    while True:
        hi = min(lo + shells, plan.max_shells + 1)
        sums = sums + kernels.chain_range_sum(d, dphi, cos2, lo, hi, 2.0, 0.0, plan.num_threads)
        f, g = _fg_from_cos2(np.array([TWO_PI * d * (hi - 1)]), cos2)
        est = 2.0 * max(abs(0.75 * float(g[0])), abs(1.5 * float(f[0])))
        if est < plan.tolerance or hi > plan.max_shells:
            return sums, 2 * (hi - 1), est
        lo = hi
        shells *= 2


def effective_shell(geom, profile=None, plan=None):
    """Effective couplings of the innermost site, via symmetry classes.

    Matches effective_for_atom at the innermost index for any patch small
    enough to do both.  The divergence flag marks spacings within 1e-6 of
    an integer, where the 1/xi contributions add coherently.
    """
    plan = plan or SumPlan()
    d = geom.spacing
    diverged = _is_diverged(d)
    if plan.mode == "explicit":
        pos = positions(geom)
        phases = site_phases(geom, profile) if profile is not None else None
        res = effective_for_atom(pos, geom.polarization, phases, innermost_index(geom))
        return _result_from_sums(
            (res.omega_eff, res.gamma_eff, res.omega_cos, res.omega_sin, res.gamma_cos, res.gamma_sin),
            res.n_terms,
            0.0,
            diverged,
        )
    if geom.kind == "chain":
        if plan.tolerance is not None:
            sums, n_terms, est = _chain_sums_tolerance(geom, profile, d, plan)
        else:
            sums, n_terms, est = _chain_sums(geom, profile, d, plan.num_threads)
        return _result_from_sums(sums, n_terms, est, diverged)
    if geom.kind == "cubic" and geom.counts[0] > CUBIC_CLASS_LIMIT:
        sums, n_terms = _cubic_implicit(geom, d, plan.num_threads)
        return _result_from_sums(sums, n_terms, 0.0, diverged)
    classes = shell_classes(geom, profile)
    dphi = profile.delta_phi if profile is not None else 0.0
    sums = _eval_classes(classes, d, dphi, plan.num_threads)
    est = _class_est_error(classes, d, dphi)
    return _result_from_sums(sums, classes.n_terms, est, diverged)


def _cubic_implicit(geom, d, num_threads):
    nx = geom.counts[0]
    m = (nx - 1) // 2
    axis = _axis_of(_as_orientation_vector(geom.polarization))
    if axis is None:
        raise ValueError("shell mode for cubic lattices requires an axis-aligned dipole")
    iu, ju = np.triu_indices(m + 1)
    sums = kernels.cubic_center_sum(
        d, m, np.ascontiguousarray(iu, np.int64), np.ascontiguousarray(ju, np.int64), num_threads
    )
    return sums, nx**3 - 1


# ---------------------------------------------------------------------------
# ensemble averages (displacement-counted, exact for full patches)


def effective_average(geom, profile=None, plan=None):
    """Mean over all atoms of the effective couplings of a full patch.

    Computed exactly from displacement counts: a displacement D occurs
    prod_axis (n_axis - |D_axis|) times in a rectangular patch.  The
    atom-averaged gamma_eff is bounded below by -gamma (positivity of the
    decay matrix), which makes it the right plateau diagnostic for finite
    patches, where the innermost-site value oscillates around the
    infinite-lattice limit.  Chain and 2D patches only.
    """
    plan = plan or SumPlan()
    e = _as_orientation_vector(geom.polarization)
    d = geom.spacing
    n_sites = geom.n_sites
    if geom.kind == "chain":
        n = geom.counts[0]
        delta = np.arange(1, n, dtype=np.int64)
        counts = 2 * (n - delta)
        r2 = delta * delta
        cos2 = np.full(len(delta), float(e[0]) ** 2)
        step = delta if profile is not None else np.zeros_like(delta)
        classes = ShellClasses(r2, cos2, step, counts, np.zeros_like(counts), int(counts.sum()))
    elif geom.kind in ("square", "hexagonal"):
        if _axis_of(e) != 2:
            raise ValueError("effective_average for 2D lattices requires perpendicular dipoles")
        nx, ny = geom.counts
        di = np.arange(-(nx - 1), nx, dtype=np.int64)
        dj = np.arange(-(ny - 1), ny, dtype=np.int64)
        ii, jj = np.meshgrid(di, dj, indexing="ij")
        ii = ii.ravel()
        jj = jj.ravel()
        keep = (ii != 0) | (jj != 0)
        ii, jj = ii[keep], jj[keep]
        counts = (nx - np.abs(ii)) * (ny - np.abs(jj))
        if geom.kind == "square":
            r2 = ii * ii + jj * jj
        else:
            r2 = ii * ii + ii * jj + jj * jj
        if profile is not None and profile.delta_phi != 0.0:
            step = ii if profile.axis == 0 else jj
        else:
            step = np.zeros_like(ii)
        enc_step = np.abs(step)
        k_step = int(enc_step.max()) + 1 if len(enc_step) else 1
        enc = r2 * k_step + enc_step
        keys, inverse = np.unique(enc, return_inverse=True)
        m_cos = np.bincount(inverse, weights=counts, minlength=len(keys)).astype(np.int64)
        classes = ShellClasses(
            r2_units=np.ascontiguousarray(keys // k_step),
            cos2_theta=np.zeros(len(keys)),
            n_phase=np.ascontiguousarray(keys % k_step),
            m_cos=np.ascontiguousarray(m_cos),
            m_sin=np.zeros(len(keys), dtype=np.int64),
            n_terms=int(counts.sum()),
        )
    else:
        raise ValueError(f"effective_average does not support geometry kind {geom.kind!r}")
    dphi = profile.delta_phi if profile is not None else 0.0
    sums = _eval_classes(classes, d, dphi, plan.num_threads) / n_sites
    return _result_from_sums(sums, classes.n_terms, 0.0, _is_diverged(d))


# ---------------------------------------------------------------------------
# sweeps


def _adjust_grid(d_grid):
    """Shift exact-integer spacings off the divergence by 1e-6."""
    d_grid = np.asarray(d_grid, dtype=float)
    if len(d_grid) == 0:
        raise ValueError("empty spacing grid")
    if np.any(np.diff(d_grid) <= 0.0) and len(d_grid) > 1:
        raise ValueError("spacing grid must be strictly ascending")
    out = d_grid.copy()
    hit = (np.abs(out - np.round(out)) < 1e-9) & (np.round(out) >= 1)
    out[hit] = np.round(out[hit]) + DIVERGENCE_WINDOW
    return out


def _polygon_unit_terms(geom, profile):
    """Spacing-independent partner data for a polygon's reference vertex."""
    unit = positions(geom.rescaled(1.0))
    e = _as_orientation_vector(geom.polarization)
    ref = innermost_index(geom)
    dist, cos2 = _pair_terms(unit, ref, e)
    phases = site_phases(geom, profile)
    phase_diff = phases[ref] - np.delete(phases, ref)
    return dist, cos2, np.cos(phase_diff), np.sin(phase_diff)


def _polygon_row(d, unit_terms):
    dist, cos2, cp, sp = unit_terms
    f, g = _fg_from_cos2(TWO_PI * d * dist, cos2)
    omega = 0.75 * g
    gamma = 1.5 * f
    sums = (
        np.sum(omega),
        np.sum(gamma),
        np.sum(omega * cp),
        np.sum(omega * sp),
        np.sum(gamma * cp),
        np.sum(gamma * sp),
    )
    return _result_from_sums(sums, len(dist), 0.0, _is_diverged(d))


def sweep_distance(geom, d_grid, profile=None, plan=None):
    """Effective couplings of the innermost site over a spacing grid.

    Returns a list of (d, EffectiveCouplings) rows.  The symmetry classes
    are built once; every spacing reuses them.
    """
    plan = plan or SumPlan()
    d_grid = _adjust_grid(d_grid)
    if geom.kind == "polygon":
        unit_terms = _polygon_unit_terms(geom, profile)
        return [(float(d), _polygon_row(d, unit_terms)) for d in d_grid]
    if geom.kind == "chain":
        return [
            (float(d), effective_shell(geom.rescaled(float(d)), profile, plan)) for d in d_grid
        ]
    if geom.kind == "cubic" and geom.counts[0] > CUBIC_CLASS_LIMIT:
        rows = []
        for d in d_grid:
            sums, n_terms = _cubic_implicit(geom.rescaled(float(d)), float(d), plan.num_threads)
            rows.append((float(d), _result_from_sums(sums, n_terms, 0.0, _is_diverged(d))))
        return rows
    classes = shell_classes(geom, profile)
    dphi = profile.delta_phi if profile is not None else 0.0
    rows = []
    for d in d_grid:
        d = float(d)
        sums = _eval_classes(classes, d, dphi, plan.num_threads)
        est = _class_est_error(classes, d, dphi)
        rows.append((d, _result_from_sums(sums, classes.n_terms, est, _is_diverged(d))))
    return rows


def sweep_phase_map(geom, d_grid, delta_phi_grid, plan=None):
    """Rotated effective couplings of a chain over (d, delta_phi).

    Returns (rows, contour): rows are (d, delta_phi, EffectiveCouplings)
    in d-major order; contour lists (delta_phi, d_zero) points where
    omega_eff_rot changes sign along d, located by linear interpolation.
    """
    from .geometry import PhaseProfile

    if geom.kind != "chain":
        raise ValueError("phase maps are defined for chain geometries")
    plan = plan or SumPlan()
    d_grid = _adjust_grid(d_grid)
    delta_phi_grid = np.asarray(delta_phi_grid, dtype=float)
    if len(delta_phi_grid) == 0:
        raise ValueError("empty phase grid")
    rows = []
    for d in d_grid:
        for dphi in delta_phi_grid:
            res = effective_shell(geom.rescaled(float(d)), PhaseProfile(float(dphi)), plan)
            rows.append((float(d), float(dphi), res))
    contour = []
    n_phi = len(delta_phi_grid)
    for jp, dphi in enumerate(delta_phi_grid):
        col = [rows[di * n_phi + jp][2].omega_eff_rot for di in range(len(d_grid))]
        for di in range(len(d_grid) - 1):
            a, b = col[di], col[di + 1]
            if a == 0.0:
                contour.append((float(dphi), float(d_grid[di])))
            elif a * b < 0.0:
                frac = a / (a - b)
                contour.append((float(dphi), float(d_grid[di] + frac * (d_grid[di + 1] - d_grid[di]))))
    return rows, contour


def cubic_innermost(edge_sites, d_grid, polarization=None, plan=None):
    """Innermost-spin effective couplings of an odd L^3 cube over a d grid."""
    if edge_sites % 2 == 0:
        raise ValueError("the cubic edge count must be odd so the innermost site is unique")
    geom = Geometry.cubic(edge_sites, edge_sites, edge_sites, 1.0, polarization)
    return sweep_distance(geom, d_grid, None, plan)
