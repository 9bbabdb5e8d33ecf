"""Command line interface.

Subcommands: couplings (effective-coupling sweeps), dynamics (mean-field
time evolution), ramsey (signal grids and fringe analysis), oracle (exact
master-equation runs side by side with the mean-field).  Runs are
described by a flat INI config (key = value under named sections), passed
with --config PATH or by name with --preset NAME for the bundled studies.
Unknown sections or keys are rejected.  Exit codes: 0 ok, 2 config error,
3 numerical failure.  All computations are deterministic; --threads only
distributes fixed work blocks.
"""

import argparse
import configparser
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .couplings import DipoleOrientation
from .errors import ConfigError, NumericalError
from .geometry import Geometry, PhaseProfile, positions, site_phases
from .lattice_sums import (
    SumPlan,
    cubic_innermost,
    effective_average,
    effective_shell,
    sweep_distance,
    sweep_phase_map,
)
from .master_oracle import (
    MAX_ATOMS,
    build_generators,
    evolve_exact,
    expectations,
    product_state,
    ramsey_product_state,
)
from .meanfield import IntegratorSpec, evolve_general, evolve_symmetric, ramsey_init
from .output import EFFECTIVE_COLUMNS, effective_row, write_csv
from .ramsey import RamseyConfig, analyze, max_slope_over_delays, ramsey_signal, track_shifts

_SCHEMA = {
    "geometry": {"kind", "spacing", "n", "nx", "ny", "nz", "polarization"},
    "phase": {"delta_phi", "axis"},
    "sweep": {
        "mode",
        "d_start",
        "d_stop",
        "d_count",
        "d_list",
        "dphi_start",
        "dphi_stop",
        "dphi_count",
        "edge_sites",
    },
    "dynamics": {
        "mode",
        "omega_eff",
        "gamma_eff",
        "init",
        "t_stop",
        "t_count",
        "rel_tol",
        "abs_tol",
    },
    "ramsey": {
        "omega_eff",
        "gamma_eff",
        "pairing",
        "delta_start",
        "delta_stop",
        "delta_count",
        "t_start",
        "t_stop",
        "t_count",
        "t_list",
        "scan",
        "rel_tol",
        "abs_tol",
    },
    "oracle": {"init", "t_stop", "t_count", "rel_tol", "abs_tol"},
}


def _validate_schema(parser):
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        for key in parser[section]:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
    return parser


def _load_config(path):
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    parser.read_string(text)
    return _validate_schema(parser)


def _load_preset(name):
    candidate = resources.files("latticeclock.presets").joinpath(f"{name}.cfg")
    try:
        text = candidate.read_text(encoding="utf-8")
    except (FileNotFoundError, OSError) as exc:
        raise ConfigError(f"unknown preset {name!r}") from exc
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.read_string(text)
    return _validate_schema(parser)


def _config_echo(parser):
    echo = {}
    for section in parser.sections():
        for key, value in parser[section].items():
            echo[f"{section}.{key}"] = " ".join(value.split())
    return echo


def _get(parser, section, key, cast, default=None, required=False):
    if not parser.has_option(section, key):
        if required:
            raise ConfigError(f"missing required key {key!r} in section [{section}]")
        return default
    raw = parser.get(section, key)
    try:
        return cast(raw)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"bad value for [{section}] {key} = {raw!r}: {exc}") from exc


def _float_list(raw):
    return [float(tok) for tok in raw.replace(",", " ").split()]


def _parse_polarization(raw):
    raw = raw.strip()
    if raw in ("x", "y", "z"):
        return DipoleOrientation.along(raw)
    parts = _float_list(raw)
    if len(parts) != 3:
        raise ValueError("polarization must be x, y, z or three components")
    vec = np.asarray(parts)
    return DipoleOrientation(vec / np.linalg.norm(vec))


def _build_geometry(parser):
    if not parser.has_section("geometry"):
        raise ConfigError("missing [geometry] section")
    kind = _get(parser, "geometry", "kind", str, required=True)
    spacing = _get(parser, "geometry", "spacing", float, required=True)
    pol = _get(parser, "geometry", "polarization", _parse_polarization)
    try:
        if kind in ("polygon", "chain"):
            n = _get(parser, "geometry", "n", int, required=True)
            return Geometry(kind, spacing, (n,), pol)
        if kind in ("square", "hexagonal"):
            nx = _get(parser, "geometry", "nx", int, required=True)
            ny = _get(parser, "geometry", "ny", int, required=True)
            return Geometry(kind, spacing, (nx, ny), pol)
        if kind == "cubic":
            nx = _get(parser, "geometry", "nx", int, required=True)
            ny = _get(parser, "geometry", "ny", int, required=True)
            nz = _get(parser, "geometry", "nz", int, required=True)
            return Geometry(kind, spacing, (nx, ny, nz), pol)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unknown geometry kind {kind!r}")


def _build_profile(parser):
    if not parser.has_section("phase"):
        return None
    delta_phi = _get(parser, "phase", "delta_phi", float, default=0.0)
    axis = _get(parser, "phase", "axis", int, default=0)
    return PhaseProfile(delta_phi, axis)


def _grid(parser, section, prefix, required=True):
    key_list = f"{prefix}_list"
    if parser.has_option(section, key_list):
        values = np.asarray(_float_list(parser.get(section, key_list)))
        if len(values) == 0:
            raise ConfigError(f"[{section}] {key_list} is empty")
        return values
    start = _get(parser, section, f"{prefix}_start", float)
    stop = _get(parser, section, f"{prefix}_stop", float)
    count = _get(parser, section, f"{prefix}_count", int)
    if start is None and stop is None and count is None:
        if required:
            raise ConfigError(f"missing {prefix} grid in section [{section}]")
        return None
    if stop is None or count is None:
        raise ConfigError(f"{prefix} grid in [{section}] needs _stop and _count")
    if count < 1:
        raise ConfigError(f"{prefix}_count must be >= 1 (empty grid)")
    start = stop if count == 1 else (0.0 if start is None else start)
    return np.linspace(start, stop, count)


def _integrator_spec(parser, section):
    rel = _get(parser, section, "rel_tol", float, default=1e-8)
    abs_ = _get(parser, section, "abs_tol", float, default=1e-10)
    return IntegratorSpec(rel_tol=rel, abs_tol=abs_)


# ---------------------------------------------------------------------------
# subcommands


def cmd_couplings(parser, out_path, threads):
    geom = _build_geometry(parser)
    profile = _build_profile(parser)
    plan = SumPlan(num_threads=threads)
    if not parser.has_section("sweep"):
        raise ConfigError("the couplings command needs a [sweep] section")
    mode = _get(parser, "sweep", "mode", str, default="distance")
    echo = _config_echo(parser)
    dphi = profile.delta_phi if profile is not None else 0.0
    if mode == "distance":
        d_grid = _grid(parser, "sweep", "d")
        rows = sweep_distance(geom, d_grid, profile, plan)
        data = [effective_row(d, dphi, eff) for d, eff in rows]
        write_csv(out_path, "couplings", echo, EFFECTIVE_COLUMNS, data, geom.polarization)
        return
    if mode == "average":
        d_grid = _grid(parser, "sweep", "d")
        data = []
        for d in d_grid:
            eff = effective_average(geom.rescaled(float(d)), profile, plan)
            data.append(effective_row(float(d), dphi, eff))
        write_csv(out_path, "couplings", echo, EFFECTIVE_COLUMNS, data, geom.polarization)
        return
    if mode == "phase_map":
        d_grid = _grid(parser, "sweep", "d")
        dphi_grid = _grid(parser, "sweep", "dphi")
        rows, contour = sweep_phase_map(geom, d_grid, dphi_grid, plan)
        data = [effective_row(d, phi, eff) for d, phi, eff in rows]
        write_csv(out_path, "couplings", echo, EFFECTIVE_COLUMNS, data, geom.polarization)
        contour_path = _derived_path(out_path, "contour")
        write_csv(
            contour_path,
            "couplings",
            echo,
            ["delta_phi", "d_zero"],
            [[phi, d] for phi, d in contour],
            geom.polarization,
        )
        return
    if mode == "cubic":
        edge = _get(parser, "sweep", "edge_sites", int, default=geom.counts[0])
        if edge % 2 == 0:
            raise ConfigError("cubic sweeps need an odd edge site count")
        d_grid = _grid(parser, "sweep", "d")
        rows = cubic_innermost(edge, d_grid, geom.polarization, plan)
        data = [effective_row(d, 0.0, eff) for d, eff in rows]
        write_csv(out_path, "couplings", echo, EFFECTIVE_COLUMNS, data, geom.polarization)
        return
    raise ConfigError(f"unknown sweep mode {mode!r}")


def _parse_init(raw, phases, n_atoms):
    raw = raw.strip().lower()
    if raw == "ramsey":
        return ramsey_init(phases)
    if raw == "ground":
        out = np.zeros((n_atoms, 3))
        out[:, 2] = -1.0
        return out
    if raw == "excited":
        out = np.zeros((n_atoms, 3))
        out[:, 2] = 1.0
        return out
    parts = _float_list(raw)
    if len(parts) != 3:
        raise ValueError("init must be ramsey, ground, excited or three components")
    return np.tile(np.asarray(parts), (n_atoms, 1))


def cmd_dynamics(parser, out_path, threads):
    if not parser.has_section("dynamics"):
        raise ConfigError("the dynamics command needs a [dynamics] section")
    mode = _get(parser, "dynamics", "mode", str, default="symmetric")
    spec = _integrator_spec(parser, "dynamics")
    t_stop = _get(parser, "dynamics", "t_stop", float, required=True)
    t_count = _get(parser, "dynamics", "t_count", int, required=True)
    if t_count < 1:
        raise ConfigError("t_count must be >= 1")
    times = np.linspace(0.0, t_stop, t_count)
    echo = _config_echo(parser)
    init_raw = _get(parser, "dynamics", "init", str, default="ramsey")
    profile = _build_profile(parser)

    if mode == "symmetric":
        omega = _get(parser, "dynamics", "omega_eff", float)
        gamma = _get(parser, "dynamics", "gamma_eff", float)
        pol = None
        if omega is None or gamma is None:
            geom = _build_geometry(parser)
            eff = effective_shell(geom, profile, SumPlan(num_threads=threads))
            omega, gamma = eff.omega_eff_rot, eff.gamma_eff_rot
            pol = geom.polarization
            echo["derived.omega_eff_rot"] = f"{omega:.17g}"
            echo["derived.gamma_eff_rot"] = f"{gamma:.17g}"
        try:
            init = _parse_init(init_raw, np.zeros(1), 1)[0]
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        traj = evolve_symmetric(omega, gamma, init, times, spec)
        rows = [[t, -1, s[0], s[1], s[2]] for t, s in zip(times, traj)]
        write_csv(out_path, "dynamics", echo, ["t", "atom_index", "sx", "sy", "sz"], rows, pol)
        return
    if mode == "general":
        geom = _build_geometry(parser)
        pos = positions(geom)
        phases = site_phases(geom, profile)
        try:
            init = _parse_init(init_raw, phases, geom.n_sites)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        traj = evolve_general(pos, geom.polarization, init, times, spec)
        rows = []
        for ti, t in enumerate(times):
            for k in range(geom.n_sites):
                s = traj[ti, k]
                rows.append([t, k, s[0], s[1], s[2]])
        write_csv(
            out_path, "dynamics", echo, ["t", "atom_index", "sx", "sy", "sz"], rows,
            geom.polarization,
        )
        return
    raise ConfigError(f"unknown dynamics mode {mode!r}")


def _ramsey_sets(parser):
    omegas = _get(parser, "ramsey", "omega_eff", _float_list, required=True)
    gammas = _get(parser, "ramsey", "gamma_eff", _float_list, required=True)
    pairing = _get(parser, "ramsey", "pairing", str, default="zip")
    if pairing == "zip":
        if len(omegas) != len(gammas):
            raise ConfigError("omega_eff and gamma_eff lists must match for pairing = zip")
        return list(zip(omegas, gammas))
    if pairing == "cartesian":
        return [(o, g) for o in omegas for g in gammas]
    raise ConfigError(f"unknown pairing {pairing!r}")


def cmd_ramsey(parser, out_path, threads):
    if not parser.has_section("ramsey"):
        raise ConfigError("the ramsey command needs a [ramsey] section")
    sets = _ramsey_sets(parser)
    delays = _grid(parser, "ramsey", "t")
    spec = _integrator_spec(parser, "ramsey")
    scans = _get(parser, "ramsey", "scan", str, default="signal,summary")
    scans = [s.strip() for s in scans.split(",") if s.strip()]
    unknown = set(scans) - {"signal", "summary", "tracked", "shift_scan", "maxslope"}
    if unknown:
        raise ConfigError(f"unknown scan kind(s): {sorted(unknown)}")
    echo = _config_echo(parser)

    needs_grid = bool({"signal", "summary", "tracked", "shift_scan"} & set(scans))
    detunings = _grid(parser, "ramsey", "delta", required=needs_grid)
    signal_rows = []
    summary_rows = []
    tracked_rows = []
    results = {}
    if needs_grid:
        for omega, gamma in sets:
            cfg = RamseyConfig(omega, gamma, detunings, delays, spec)
            if {"summary", "tracked", "shift_scan"} & set(scans):
                res = analyze(cfg)
                results[(omega, gamma)] = res
                if "summary" in scans:
                    for ti, t in enumerate(delays):
                        summary_rows.append([omega, gamma, t, res.shifts[ti], res.slopes[ti]])
                if "tracked" in scans:
                    # displacement unwrapped along the delay scan per set
                    tracked = track_shifts(res.shifts, delays)
                    for ti, t in enumerate(delays):
                        tracked_rows.append([omega, gamma, t, tracked[ti], res.slopes[ti]])
                signal = res.signal
            else:
                signal = ramsey_signal(cfg)
            if "signal" in scans:
                for ti, t in enumerate(delays):
                    for di, delta in enumerate(detunings):
                        signal_rows.append([omega, gamma, t, delta, signal[ti, di]])
    multi = len(scans) > 1
    if "signal" in scans:
        write_csv(
            out_path, "ramsey", echo,
            ["omega_eff", "gamma_eff", "T", "delta", "signal"], signal_rows,
        )
    if "summary" in scans:
        path = _derived_path(out_path, "summary") if "signal" in scans else out_path
        write_csv(
            path, "ramsey", echo,
            ["omega_eff", "gamma_eff", "T", "shift", "slope"], summary_rows,
        )
    if "tracked" in scans:
        path = _derived_path(out_path, "tracked") if multi else out_path
        write_csv(
            path, "ramsey", echo,
            ["omega_eff", "gamma_eff", "T", "shift", "slope"], tracked_rows,
        )
    if "shift_scan" in scans:
        # fringe displacement versus coupling strength at a single delay,
        # unwrapped along the coupling scan and anchored at omega_eff = 0
        if len(delays) != 1:
            raise ConfigError("shift_scan needs a single delay (t_list with one entry)")
        t = float(delays[0])
        gammas = sorted({g for _, g in sets})
        rows = []
        for gamma in gammas:
            omegas = sorted({o for o, g in sets if g == gamma})
            if 0.0 not in omegas:
                raise ConfigError("shift_scan needs omega_eff = 0 in the scan as anchor")
            shifts = np.array([results[(o, gamma)].shifts[0] for o in omegas])
            anchor = omegas.index(0.0)
            tracked = track_shifts(shifts, np.full(len(omegas), t), anchor)
            for o, s in zip(omegas, tracked):
                rows.append([o, gamma, t, s])
        path = _derived_path(out_path, "shift_scan") if multi else out_path
        write_csv(
            path, "ramsey", echo,
            ["omega_eff", "gamma_eff", "T", "shift"], rows,
        )
    if "maxslope" in scans:
        rows = []
        for omega, gamma in sets:
            slope, t_best = max_slope_over_delays(omega, gamma, delays, spec)
            rows.append([omega, gamma, t_best, slope])
        path = _derived_path(out_path, "maxslope") if multi else out_path
        write_csv(
            path, "ramsey", echo,
            ["omega_eff", "gamma_eff", "T_best", "max_slope"], rows,
        )


def cmd_oracle(parser, out_path, threads):
    geom = _build_geometry(parser)
    n = geom.n_sites
    if n > MAX_ATOMS:
        raise ConfigError(f"the oracle supports at most {MAX_ATOMS} atoms, got {n}")
    profile = _build_profile(parser)
    spec = _integrator_spec(parser, "oracle") if parser.has_section("oracle") else IntegratorSpec()
    t_stop = _get(parser, "oracle", "t_stop", float, default=1.0)
    t_count = _get(parser, "oracle", "t_count", int, default=21)
    init_raw = _get(parser, "oracle", "init", str, default="ramsey")
    times = np.linspace(0.0, t_stop, t_count)
    pos = positions(geom)
    phases = site_phases(geom, profile)
    try:
        bloch0 = _parse_init(init_raw, phases, n)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if init_raw.strip().lower() == "ramsey":
        rho0 = ramsey_product_state(phases)
    else:
        rho0 = product_state(bloch0)
    hamiltonian, gamma_matrix = build_generators(pos, geom.polarization)
    rhos = evolve_exact(rho0, hamiltonian, gamma_matrix, times, spec)
    mf = evolve_general(pos, geom.polarization, bloch0, times, spec)
    rows = []
    for ti, t in enumerate(times):
        exact = expectations(rhos[ti], n)
        for k in range(n):
            dev = float(np.max(np.abs(exact[k] - mf[ti, k])))
            rows.append(
                [t, k, exact[k, 0], exact[k, 1], exact[k, 2],
                 mf[ti, k, 0], mf[ti, k, 1], mf[ti, k, 2], dev]
            )
    write_csv(
        out_path,
        "oracle",
        _config_echo(parser),
        ["t", "atom_index", "sx_oracle", "sy_oracle", "sz_oracle",
         "sx_meanfield", "sy_meanfield", "sz_meanfield", "max_abs_dev"],
        rows,
        geom.polarization,
    )


def _derived_path(out_path, suffix):
    p = Path(out_path)
    return str(p.with_name(f"{p.stem}_{suffix}{p.suffix or '.csv'}"))


_COMMANDS = {
    "couplings": cmd_couplings,
    "dynamics": cmd_dynamics,
    "ramsey": cmd_ramsey,
    "oracle": cmd_oracle,
}


def main(argv=None):
    ap = argparse.ArgumentParser(prog="latticeclock", description=__doc__)
    ap.add_argument("command", choices=sorted(_COMMANDS))
    ap.add_argument("--config", help="path to an INI run configuration")
    ap.add_argument("--preset", help="name of a bundled preset configuration")
    ap.add_argument("--out", required=True, help="output CSV path")
    ap.add_argument("--threads", type=int, default=0, help="worker threads (0 = all)")
    args = ap.parse_args(argv)
    try:
        if (args.config is None) == (args.preset is None):
            raise ConfigError("pass exactly one of --config or --preset")
        if args.config is not None:
            parser = _load_config(args.config)
        else:
            parser = _load_preset(args.preset)
        _COMMANDS[args.command](parser, args.out, args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
