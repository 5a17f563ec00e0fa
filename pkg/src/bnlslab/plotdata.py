"""Plot-ready column files; rendering is left to external tools.

For every run with snapshots, four whitespace-delimited files are written
under ``<out>/plotdata`` with ``#`` header lines:

    <label>_K.dat        t  K/K_crit
    <label>_drift.dat    t  energy_drift  mass_drift
    <label>_z.dat        t  z_increment  z_cumulative  scatter_score
    <label>_virial.dat   t  virial_rhs  A_R...   (only when radii are set)
"""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

__all__ = ["emit_plot_data"]


def _safe(label):
    return re.sub(r"[^A-Za-z0-9_.=-]+", "_", label)


def _write(path, header, columns):
    data = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    np.savetxt(path, data, fmt="%.17g", header=header, comments="# ")
    return path


def emit_plot_data(report, out_dir):
    """Write the column files for every run in ``report``; returns their paths."""
    d = Path(out_dir) / "plotdata"
    d.mkdir(parents=True, exist_ok=True)
    written = []
    radii = tuple(report.radii)
    if not radii:
        report.notes.append("no virial radii configured: virial plot files omitted")
    for run in report.runs:
        recs = run.records
        if not recs:
            continue
        name = _safe(run.label)
        t = [r.t for r in recs]
        m0, e0 = recs[0].mass, recs[0].energy
        escale = abs(e0) if e0 != 0 else 1.0
        mscale = m0 if m0 > 0 else 1.0
        written.append(
            _write(
                d / f"{name}_K.dat",
                f"{run.label}: K(t)/K_crit, K_crit={report.K_crit:.17g}\nt K_over_Kcrit",
                [t, [r.K / report.K_crit for r in recs]],
            )
        )
        written.append(
            _write(
                d / f"{name}_drift.dat",
                f"{run.label}: relative conservation drift\nt energy_drift mass_drift",
                [
                    t,
                    [abs(r.energy - e0) / escale for r in recs],
                    [abs(r.mass - m0) / mscale for r in recs],
                ],
            )
        )
        written.append(
            _write(
                d / f"{name}_z.dat",
                f"{run.label}: Z-norm increments and scattering score\n"
                "t z_increment z_cumulative scatter_score",
                [t, [r.z_inc for r in recs], [r.z_cum for r in recs], [r.scatter_score for r in recs]],
            )
        )
        if radii:
            cols = [t, [r.virial_rhs for r in recs]] + [[r.A(R) for r in recs] for R in radii]
            names = " ".join(f"A_R={R:g}" for R in radii)
            written.append(
                _write(
                    d / f"{name}_virial.dat",
                    f"{run.label}: virial pair (rhs and A_R per radius)\nt virial_rhs {names}",
                    cols,
                )
            )
    return written
