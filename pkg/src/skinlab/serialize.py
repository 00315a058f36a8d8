"""Binary-free serialization shared by the numerical modules and the runner.

All writers format floats with repr-level precision through deterministic
text layouts, so identical inputs always produce byte-identical files.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

FLOAT_FMT = "%.17g"


def matrix_to_json(M: np.ndarray) -> dict:
    """Matrix as {"n": N, "re": [[...]], "im": [[...]]}."""
    M = np.asarray(M, dtype=complex)
    return {"n": M.shape[0], "re": M.real.tolist(), "im": M.imag.tolist()}


def matrix_from_json(obj: dict) -> np.ndarray:
    return np.asarray(obj["re"], dtype=float) + 1j * np.asarray(obj["im"], dtype=float)


def write_json(path: str | Path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")
    return path


def write_csv(path: str | Path, columns: list[str], rows, header_lines=()) -> Path:
    """CSV with '#'-prefixed header lines and repr-precision numeric cells."""
    path = Path(path)
    lines = [f"# {line}" for line in header_lines]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_cell(x) for x in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def _cell(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return FLOAT_FMT % float(x)


def density_rows(sites, rho: np.ndarray):
    """Rows (n, m, re, im, abs) scanning the density matrix row-major."""
    sites = np.asarray(sites)
    for i, n in enumerate(sites):
        for j, m in enumerate(sites):
            z = rho[i, j]
            yield (int(n), int(m), z.real, z.imag, abs(z))


def spectrum_rows(eigenvalues, mean_positions=None):
    """Rows (index, re_E, im_E[, mean_position]) of a sorted spectrum."""
    for i, E in enumerate(eigenvalues):
        if mean_positions is None:
            yield (i, E.real, E.imag)
        else:
            yield (i, E.real, E.imag, float(mean_positions[i]))


def frames_to_json(frames: list[tuple[float, np.ndarray, np.ndarray]]) -> dict:
    """Animation-ready frame sequence: per frame time, sites, and |rho|."""
    return {
        "frames": [
            {
                "time": float(t),
                "sites": [int(s) for s in sites],
                "abs": np.abs(rho).tolist(),
            }
            for (t, sites, rho) in frames
        ]
    }
