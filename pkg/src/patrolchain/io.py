"""Reading and writing chains and distributions as CSV or JSON."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np


def _is_json(path) -> bool:
    return Path(path).suffix.lower() == ".json"


def save_matrix(path, m, fmt="%.17g") -> None:
    m = np.asarray(m, dtype=float)
    if _is_json(path):
        Path(path).write_text(json.dumps({"n": int(m.shape[0]), "rows": m.tolist()}))
    else:
        np.savetxt(path, np.atleast_2d(m), delimiter=",", fmt=fmt)


def load_matrix(path) -> np.ndarray:
    if _is_json(path):
        data = json.loads(Path(path).read_text())
        rows = data["rows"] if isinstance(data, dict) else data
        m = np.asarray(rows, dtype=float)
    else:
        m = np.loadtxt(path, delimiter=",", ndmin=2)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{path}: expected a square matrix, got shape {m.shape}")
    return m


save_chain = save_matrix
load_chain = load_matrix


def save_vector(path, v) -> None:
    v = np.asarray(v, dtype=float)
    if _is_json(path):
        Path(path).write_text(json.dumps(v.tolist()))
    else:
        np.savetxt(path, v[None, :], delimiter=",", fmt="%.17g")


def load_vector(path) -> np.ndarray:
    if _is_json(path):
        data = json.loads(Path(path).read_text())
        if isinstance(data, dict):
            data = data["pi"]
        return np.asarray(data, dtype=float)
    return np.loadtxt(path, delimiter=",", ndmin=1).ravel()


def save_table(path, header, rows) -> None:
    """Plain CSV with a header line."""
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(str(v) for v in row) + "\n")


def export_pixels(p, path) -> None:
    """Grayscale image data for a transition matrix: values in [0, 1], darker is more likely.

    Entry ``(i, j)`` is ``p_ij / max(p)``, so the largest probability maps to 1.
    """
    p = np.asarray(p, dtype=float)
    if p.ndim != 2 or p.shape[0] != p.shape[1] or np.any(p < 0):
        raise ValueError("expected a nonnegative square matrix")
    top = p.max()
    np.savetxt(path, p / top if top > 0 else p, delimiter=",", fmt="%.6f")
