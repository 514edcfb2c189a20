"""Artifacts on disk: label images, JSON reports and CSV tables, all written atomically."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .energy import Cluster

__all__ = [
    "atomic_write",
    "label_image",
    "write_label_image",
    "read_label_image",
    "write_json",
    "write_csv",
    "EXTERIOR_OFFSET",
    "UNCOVERED",
]

# bytes >= EXTERIOR_OFFSET mark cells outside the domain carrying exterior phase (byte - offset)
EXTERIOR_OFFSET = 128
UNCOVERED = 255


def atomic_write(path, data: bytes) -> Path:
    """Write ``data`` to a temporary file in the target directory, then rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def label_image(cl: Cluster) -> np.ndarray:
    """One byte per cell, image rows from the top (largest y) down, columns along x."""
    g = cl.grid
    img = np.full((g.nx, g.ny), UNCOVERED, dtype=np.uint8)
    img[g.omega_mask] = cl.labels[g.omega_mask].astype(np.uint8)
    outside = ~g.omega_mask
    ph = cl.ext.phase_of(g.centers())
    ok = outside & (ph >= 0)
    img[ok] = (EXTERIOR_OFFSET + ph[ok]).astype(np.uint8)
    return np.ascontiguousarray(img.T[::-1])


def write_label_image(path, cl: Cluster) -> Path:
    """Binary PGM (P5) with the grid geometry in header comments."""
    g = cl.grid
    if cl.k >= EXTERIOR_OFFSET:
        raise ValueError("too many phases for a one-byte label image")
    img = label_image(cl)
    header = (
        "P5\n"
        f"# nx {g.nx} ny {g.ny}\n"
        f"# h {g.h!r}\n"
        f"# origin {g.origin[0]!r} {g.origin[1]!r}\n"
        f"# k {cl.k}\n"
        f"{g.nx} {g.ny}\n255\n"
    )
    return atomic_write(path, header.encode("ascii") + img.tobytes())


def read_label_image(path) -> tuple[np.ndarray, dict]:
    """Inverse of ``write_label_image``: the ``(ny, nx)`` byte image and the header fields."""
    raw = Path(path).read_bytes()
    meta = {}
    pos = 0
    tokens = []
    while len(tokens) < 4:
        end = raw.index(b"\n", pos)
        line = raw[pos:end].decode("ascii")
        pos = end + 1
        if line.startswith("#"):
            parts = line[1:].split()
            meta[parts[0]] = parts[1:]
        else:
            tokens += line.split()
    if tokens[0] != "P5":
        raise ValueError("not a binary PGM file")
    w, h = int(tokens[1]), int(tokens[2])
    img = np.frombuffer(raw[pos : pos + w * h], dtype=np.uint8).reshape(h, w)
    return img, meta


def write_json(path, obj) -> Path:
    return atomic_write(path, (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode())


def write_csv(path, header, rows) -> Path:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return atomic_write(path, buf.getvalue().encode())
