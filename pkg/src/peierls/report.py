"""CSV and JSON writers with round-trip float formatting."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

FLOAT_FORMAT = "%.17g"


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return FLOAT_FORMAT % v
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        return repr(obj)
    return obj


def write_json(path, data) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        json.dump(_jsonable(data), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def kernel_rows(kernel):
    """(s, s', mu, nu, value) for every entry of a commutator kernel."""
    G, s = kernel.G, kernel.s
    N, n = G.shape[0], G.shape[1]
    for i in range(N):
        for j in range(N):
            for mu in range(n):
                for nu in range(n):
                    yield (float(s[i]), float(s[j]), mu, nu, float(G[i, mu, j, nu]))


def write_kernel_csv(path, kernel) -> Path:
    return write_csv(path, ["s", "s_prime", "mu", "nu", "value"], kernel_rows(kernel))


def write_bracket_csv(path, rows) -> Path:
    return write_csv(path, ["A", "B", "route", "value"], rows)


def write_commutator_csv(path, rows) -> Path:
    return write_csv(path, ["dx", "dt", "value"], rows)
