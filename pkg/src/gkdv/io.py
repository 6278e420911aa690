"""Deterministic on-disk formats: CSV series, binary snapshots, manifests, plot data.

Every file is written to a temporary sibling and renamed into place.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import ConfigError, GKdVError
from .spectral import Field, make_grid

SNAPSHOT_MAGIC = b"GKDV0001"
# magic, n, L, t, flags, reserved; padded to the 64-byte header size.
SNAPSHOT_HEADER = struct.Struct("<8sQddQ24x")
FLAG_REAL = 1


def write_atomic(path, data):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def format_number(x):
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_number(v) for v in row])
    return buf.getvalue()


def write_csv(path, header, rows):
    return write_atomic(path, csv_text(header, rows))


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if header is None:
            raise ConfigError(f"{path}: empty CSV file")
        rows = [[float(v) for v in row] for row in r if row]
    return header, rows


def snapshot_bytes(f, t):
    head = SNAPSHOT_HEADER.pack(SNAPSHOT_MAGIC, f.grid.n, f.grid.L, float(t), FLAG_REAL if f.is_real else 0)
    body = np.empty(2 * f.grid.n, dtype="<f8")
    body[0::2] = f.values.real
    body[1::2] = f.values.imag
    return head + body.tobytes()


def write_snapshot(path, f, t):
    return write_atomic(path, snapshot_bytes(f, t))


def read_snapshot(path):
    """Returns (Field, t)."""
    data = Path(path).read_bytes()
    if len(data) < SNAPSHOT_HEADER.size:
        raise ConfigError(f"{path}: truncated snapshot header")
    magic, n, L, t, flags = SNAPSHOT_HEADER.unpack_from(data)
    if magic != SNAPSHOT_MAGIC:
        raise ConfigError(f"{path}: bad snapshot magic {magic!r}")
    body = np.frombuffer(data, dtype="<f8", offset=SNAPSHOT_HEADER.size)
    if body.size != 2 * n:
        raise ConfigError(f"{path}: expected {2 * n} float64 values, found {body.size}")
    values = body[0::2] + 1j * body[1::2]
    return Field(make_grid(n, L), values, bool(flags & FLAG_REAL)), t


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if np.isfinite(x) else repr(x)
    return obj


def write_json(path, obj):
    return write_atomic(path, json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def inventory(out_dir, exclude=("manifest.json",)):
    out_dir = Path(out_dir)
    files = {}
    if out_dir.is_dir():
        for p in sorted(out_dir.rglob("*")):
            if p.is_file() and p.name not in exclude and not p.name.startswith("."):
                files[str(p.relative_to(out_dir))] = sha256_file(p)
    return files


PLOT_FAMILIES = ("invariants", "weighted", "persistence", "windowed")


def dat_text(family, header, rows):
    lines = [f"# {family}", "# " + " ".join(header)]
    lines += [" ".join(format_number(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def emit_plot_data(series, out_dir):
    """Convert CSV series {family: path} into gnuplot .dat files plus a script stub.

    A missing series file is an error.  Returns the list of written paths.
    """
    out_dir = Path(out_dir)
    written, plots = [], []
    for family, path in series.items():
        if not Path(path).is_file():
            raise GKdVError(f"plot data: series file for {family!r} not found: {path}")
        header, rows = read_csv(path)
        target = out_dir / f"{family}.dat"
        write_atomic(target, dat_text(family, header, rows))
        written.append(target)
        cols = ", ".join(
            f"'{target.name}' using 1:{j + 1} with lines title '{name}'" for j, name in enumerate(header[1:], 1)
        )
        if cols:
            plots.append(f"set title '{family}'\nplot {cols}\npause -1")
    script = "# gnuplot script stub; run with: gnuplot -p plot.gp\nset xlabel 't'\n" + "\n".join(plots) + "\n"
    written.append(write_atomic(out_dir / "plot.gp", script))
    return written
