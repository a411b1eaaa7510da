"""Utility & helper functions for writing run artifacts.

Every writer is deterministic: fixed number formats, sorted JSON keys, no
timestamps, and a fixed SVG hash salt.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

logger = logging.getLogger(__name__)

CSV_FORMAT = "%.12e"
SVG_SALT = "multibump"


def run_directory(output_dir: str | Path, pipeline: str) -> Path:
    """Create and return <output_dir>/<pipeline>."""
    path = Path(output_dir) / pipeline
    path.mkdir(parents=True, exist_ok=True)
    return path


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        v = float(value)
        # JSON has no infinities; keep them readable
        if np.isnan(v):
            return "nan"
        if np.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return value


def write_json(path: Path, payload: dict[str, Any]) -> Path:
    path.write_text(json.dumps(_jsonable(payload), sort_keys=True, indent=2) + "\n")
    return path


def write_csv(path: Path, header: Sequence[str], rows: np.ndarray) -> Path:
    """Numeric table with a comma separated header line."""
    np.savetxt(path, np.atleast_2d(rows), fmt=CSV_FORMAT, delimiter=",", header=",".join(header), comments="")
    return path


def write_rows(path: Path, rows: Sequence[dict[str, Any]]) -> Path:
    """Table of per-eps dictionaries; missing entries become nan."""
    keys = sorted({k for row in rows for k in row})
    table = np.array([[float(row.get(k, np.nan)) for k in keys] for row in rows], dtype=float)
    return write_csv(path, keys, table)


def write_obj(path: Path, vertices: np.ndarray, faces: np.ndarray) -> Path:
    """Wavefront OBJ with 1-based face indices."""
    lines = [f"v {x:.12e} {y:.12e} {z:.12e}" for x, y, z in vertices]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in faces]
    path.write_text("\n".join(lines) + "\n")
    return path


def write_raw(path: Path, values: np.ndarray, grid: dict[str, Any]) -> Path:
    """Little-endian float64 dump in C order with a JSON sidecar."""
    data = np.ascontiguousarray(values, dtype="<f8")
    path.write_bytes(data.tobytes(order="C"))
    write_json(path.with_suffix(".json"), {**grid, "dtype": "<f8", "shape": list(data.shape)})
    return path


def write_pgm(path: Path, mask: np.ndarray) -> Path:
    """Binary PGM of a 2-D mask, first axis horizontal."""
    image = np.where(mask.T[::-1], 255, 0).astype(np.uint8)
    height, width = image.shape
    path.write_bytes(f"P5\n{width} {height}\n255\n".encode() + image.tobytes())
    return path


def write_contour_svg(
    path: Path,
    axes: Sequence[np.ndarray],
    values: np.ndarray,
    boundary: Optional[np.ndarray] = None,
    markers: Sequence[tuple[float, float, str]] = (),
    title: str = "",
) -> Path:
    """Filled contours of a 2-D field with boundary polyline and critical-point markers."""
    plt.rcParams["svg.hashsalt"] = SVG_SALT
    fig, ax = plt.subplots(figsize=(10, 4))
    levels = np.linspace(float(np.min(values)), float(np.max(values)), 21)
    if levels[0] < levels[-1]:
        ax.contourf(axes[0], axes[1], values.T, levels=levels, cmap="viridis")
    if boundary is not None and len(boundary):
        ax.plot(boundary[:, 0], boundary[:, 1], ",", color="white")
    styles = {"max": ("^", "red"), "min": ("v", "blue"), "saddle": ("x", "black"), "degenerate": ("o", "orange")}
    for x, y, kind in markers:
        marker, color = styles.get(kind, ("o", "gray"))
        ax.plot([x], [y], marker=marker, color=color, markersize=6)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    if title:
        ax.set_title(title)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path
