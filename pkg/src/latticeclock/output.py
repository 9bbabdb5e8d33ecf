"""Self-describing CSV output.

Every file starts with '#'-prefixed metadata lines (package version, the
units and sign conventions, the dipole orientation, and a normalized echo
of the run configuration), then a header row, then data rows with 17
significant digits and '.' decimal separator.  Runtime details such as
the thread count are deliberately not echoed: identical configurations
must produce byte-identical files regardless of parallelism.
"""

import io

import numpy as np

from . import __version__

UNITS_LINE = "rates in gamma, distances in lambda0, time in 1/gamma, detuning in gamma"
CONVENTIONS_LINE = (
    "bloch sx=cos(phi) sy=-sin(phi); master equation drho/dt = i[rho,H] + L[rho]"
)


def format_value(value):
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.17g}"


def metadata_lines(command, config_echo, polarization=None):
    lines = [
        f"# latticeclock {__version__}",
        f"# command: {command}",
        f"# units: {UNITS_LINE}",
        f"# conventions: {CONVENTIONS_LINE}",
    ]
    if polarization is not None:
        e = np.asarray(getattr(polarization, "e", polarization), dtype=float)
        lines.append("# polarization: " + " ".join(f"{c:.17g}" for c in e))
    for key in sorted(config_echo):
        lines.append(f"# config {key} = {config_echo[key]}")
    return lines


def write_csv(path, command, config_echo, columns, rows, polarization=None):
    """Write one metadata-headed CSV; rows are sequences matching columns."""
    buf = io.StringIO()
    for line in metadata_lines(command, config_echo, polarization):
        buf.write(line + "\n")
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(format_value(v) for v in row) + "\n")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(buf.getvalue())


EFFECTIVE_COLUMNS = [
    "d",
    "delta_phi",
    "omega_eff",
    "gamma_eff",
    "omega_cos",
    "omega_sin",
    "gamma_cos",
    "gamma_sin",
    "omega_eff_rot",
    "gamma_eff_rot",
    "n_terms",
    "est_error",
    "diverged",
]


def effective_row(d, delta_phi, eff):
    return [
        d,
        delta_phi,
        eff.omega_eff,
        eff.gamma_eff,
        eff.omega_cos,
        eff.omega_sin,
        eff.gamma_cos,
        eff.gamma_sin,
        eff.omega_eff_rot,
        eff.gamma_eff_rot,
        eff.n_terms,
        eff.est_error,
        eff.diverged,
    ]
