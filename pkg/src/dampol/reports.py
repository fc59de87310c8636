"""Machine-readable verification reports and CSV trace emitters.

Reports are one JSON object per stage; every check entry carries the
residual, its tolerance, and the regularization it was computed with, so
numbers remain interpretable away from the run that produced them.
Serialization is deterministic (sorted keys, no timestamps): identical
configurations and seeds produce byte-identical files.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1


def check_entry(check_id: str, residual: float, tolerance: float, *,
                eta: float, n_nodes: int, lattice, extra: dict | None = None) -> dict:
    entry = {
        "check_id": check_id,
        "residual": float(residual),
        "tolerance": float(tolerance),
        "passed": bool(residual <= tolerance),
        "eta": float(eta),
        "n_nodes": int(n_nodes),
        "lattice": [int(lattice.n_per_axis), float(lattice.spacing)],
    }
    if extra:
        entry.update(extra)
    return entry


def stage_report(stage: str, checks: list, extra: dict | None = None) -> dict:
    report = {
        "format_version": FORMAT_VERSION,
        "stage": stage,
        "checks": checks,
        "passed": all(c["passed"] for c in checks),
    }
    if extra:
        report.update(extra)
    return report


def write_json(path, payload: dict):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def chi_trace_csv(path, coupling, z_values):
    """Susceptibility entries at the requested complex frequencies."""
    from .susceptibility import chi_at
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    d = coupling.lattice.dim
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["re_z", "im_z", "site", "site_prime", "i", "j", "re_chi", "im_chi"])
        for z in z_values:
            mat = chi_at(coupling, z).mat
            for a in range(d):
                for b in range(d):
                    writer.writerow([f"{z.real:.12g}", f"{z.imag:.12g}",
                                     a // 3, b // 3, a % 3, b % 3,
                                     f"{mat[a, b].real:.12g}", f"{mat[a, b].imag:.12g}"])


def green_trace_csv(path, sweep):
    """Frobenius magnitude of the propagator along a frequency sweep."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["re_z", "im_z", "norm", "residual", "cond"])
        for i, z in enumerate(sweep.z_values):
            if i in sweep.failures:
                writer.writerow([f"{z.real:.12g}", f"{z.imag:.12g}", "nan", "nan", "nan"])
            else:
                g = sweep[i]
                writer.writerow([f"{z.real:.12g}", f"{z.imag:.12g}",
                                 f"{g.kernel.norm():.12g}", f"{g.residual:.6g}", f"{g.cond:.6g}"])


def refinement_csv(path, levels: list, sequences: dict):
    """Residual-versus-refinement table, one column per check."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    names = sorted(sequences)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n_nodes", "eta"] + names)
        for i, (n_nodes, eta) in enumerate(levels):
            writer.writerow([n_nodes, f"{eta:.12g}"] +
                            [f"{sequences[n][i]:.8e}" for n in names])


def convergence_orders(values) -> list:
    """log2 ratios between successive refinement levels."""
    vals = np.asarray(values, dtype=float)
    out = []
    for a, b in zip(vals[:-1], vals[1:]):
        if b <= 0 or a <= 0:
            out.append(float("inf") if a > b else 0.0)
        else:
            out.append(float(np.log2(a / b)))
    return out


def field_trace_csv(path, form, amplitudes, times):
    """Expectation trace of a field form under a coherent-like weighting.

    `amplitudes` assigns a complex amplitude per (node, site, component);
    the emitted expectation is the amplitude-weighted coefficient sum at
    each requested time.  Diagnostic output for plotting only.
    """
    amplitudes = np.asarray(amplitudes)
    grid, lattice = form.grid, form.lattice
    v, w = lattice.cell_volume, grid.weights
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "site", "component", "value"])
        for t in times:
            phases = np.exp(-1j * grid.nodes * t)
            contrib = np.einsum("l,l,lab,lb->a", w * v, phases, form.alpha, amplitudes)
            values = 2.0 * contrib.real   # plus the conjugate pairing
            for a, val in enumerate(values):
                writer.writerow([f"{t:.12g}", a // 3, a % 3, f"{val:.12g}"])
