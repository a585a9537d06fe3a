"""Result persistence: CSV series/grids plus a JSON metadata sidecar.

Floats are written with 17 significant digits (full round-trip precision) so
repeated runs with the same seed produce byte-identical numeric files;
undefined cells are written as NaN, never as infinities.
"""

from __future__ import annotations

import csv
import json
import math
import platform
from pathlib import Path

import numpy as np

__all__ = ["format_value", "write_csv", "write_meta", "read_csv_columns", "environment_info"]


def format_value(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    xf = float(x)
    if math.isnan(xf):
        return "NaN"
    return f"{xf:.17g}"


def write_csv(path: str | Path, header: list[str], rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(v) for v in row])
    return path


def write_series_csv(path: str | Path, columns: dict[str, np.ndarray]) -> Path:
    names = list(columns)
    n = len(next(iter(columns.values())))
    rows = ([columns[name][i] for name in names] for i in range(n))
    return write_csv(path, names, rows)


def _jsonable(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    return str(obj)


def write_meta(path: str | Path, meta: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")
    return path


def read_csv_columns(path: str | Path) -> dict[str, np.ndarray]:
    """Read a numeric CSV back into named float columns (NaN-aware)."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    out = {}
    for j, name in enumerate(header):
        col = []
        numeric = True
        for row in rows:
            try:
                col.append(float(row[j]))
            except ValueError:
                numeric = False
                break
        out[name] = np.asarray(col) if numeric else np.asarray([row[j] for row in rows])
    return out


def write_trajectory_record(out_dir: str | Path, record, bin_size: int = 1) -> list[Path]:
    """Debug dump of a single trajectory in the standard formats: sampled
    observables as CSV, the measurement record as CSV, seeds and checks as a
    JSON sidecar."""
    out = Path(out_dir)
    paths = [write_series_csv(out / "trajectory.csv", {
        "t": record.times,
        "energy": record.energy,
        "purity": record.purity,
        "ergotropy": record.ergotropy,
    })]
    rec = record.downsampled_record(bin_size)
    if record.kind.variant == "photodetection":
        paths.append(write_csv(out / "record.csv", ["jump_time"],
                               ([t] for t in rec)))
    else:
        paths.append(write_csv(out / "record.csv", ["dy"], ([v] for v in rec)))
    paths.append(write_meta(out / "meta.json", {
        "kind": "trajectory",
        "unraveling": record.kind.variant,
        "theta": record.kind.theta,
        "seed": record.seed,
        "n_jumps": record.n_jumps,
        "norms_check": record.norms_check,
        "record_bin_size": bin_size,
        "cutoff_max_population": record.cutoff_max_population,
        "environment": environment_info(),
    }))
    return paths


def environment_info() -> dict:
    import numpy
    import scipy

    from .. import __version__
    from .._kernels import backend_name

    return {
        "openqb_version": __version__,
        "kernel_backend": backend_name(),
        "python": platform.python_version(),
        "numpy": numpy.__version__,
        "scipy": scipy.__version__,
    }
