"""Deterministic file formats: cloud CSV, density grids, run manifests.

Floats are written with 17 significant digits, which round-trips binary64
exactly, so re-running a manifest reproduces byte-identical outputs.
"""

import hashlib
import json
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .cloud import Cloud
from .errors import EmptyWindowWarning, MalformedRow


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_cloud_csv(cloud: Cloud, path) -> None:
    """CSV with header dim,weight,c0_re,c0_im,...; canonical representatives."""
    dim = cloud.dim
    cols = [f"c{i}_{p}" for i in range(dim + 1) for p in ("re", "im")]
    lines = ["dim,weight," + ",".join(cols)]
    for row, w in zip(cloud.coords, cloud.weights):
        parts = [str(dim), _fmt(w)]
        for c in row:
            parts.append(_fmt(c.real))
            parts.append(_fmt(c.imag))
        lines.append(",".join(parts))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_cloud_csv(path) -> Cloud:
    """Inverse of write_cloud_csv.

    Raises:
        MalformedRow: with the 1-based line number of the offending row.
    """
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("dim,weight"):
        raise MalformedRow(1, "missing header")
    coords = []
    weights = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        try:
            dim = int(parts[0])
            w = float(parts[1])
            vals = [float(v) for v in parts[2:]]
        except (ValueError, IndexError) as exc:
            raise MalformedRow(lineno, f"unparseable row: {exc}") from exc
        if len(vals) != 2 * (dim + 1):
            raise MalformedRow(lineno, f"expected {2 * (dim + 1)} coordinates")
        if w <= 0:
            raise MalformedRow(lineno, "weight must be positive")
        row = np.array(vals[0::2]) + 1j * np.array(vals[1::2])
        if float(np.max(np.abs(row))) == 0.0:
            raise MalformedRow(lineno, "all coordinates are zero")
        coords.append(row)
        weights.append(w)
    if not coords:
        raise MalformedRow(1, "no data rows")
    return Cloud(np.stack(coords), np.array(weights))


@dataclass(frozen=True)
class HistogramReport:
    in_window: int
    out_window: int
    pgm_path: str
    counts_path: str


def write_histogram(
    cloud: Cloud,
    chart_index: int,
    window: tuple,
    resolution: int,
    path: str,
    axes: tuple | None = None,
) -> HistogramReport:
    """2D density grid over a chart window, as plain-text graymap + raw counts.

    ``axes`` picks the two real features ((coord, "re"|"im"), ...) of the
    affine chart coordinates; the default uses the real parts of the first
    two affine coordinates, or re/im of the only one on a line.  Counts are
    conserved: in_window + out_window equals the cloud size.
    """
    if resolution < 1 or resolution > 4096:
        raise ValueError("resolution must be in [1, 4096]")
    x0, x1, y0, y1 = (float(v) for v in window)
    if not (x1 > x0 and y1 > y0):
        raise ValueError("window must satisfy x1 > x0 and y1 > y0")

    arr = cloud.coords
    pivot = arr[:, chart_index]
    ok = np.abs(pivot) > 1e-13
    aff = np.delete(arr, chart_index, axis=1) / np.where(ok, pivot, 1.0)[:, None]
    if axes is None:
        if aff.shape[1] >= 2:
            axes = ((0, "re"), (1, "re"))
        else:
            axes = ((0, "re"), (0, "im"))

    def feature(spec):
        idx, part = spec
        vals = aff[:, idx]
        return np.real(vals) if part == "re" else np.imag(vals)

    fx, fy = feature(axes[0]), feature(axes[1])
    inside = ok & (fx >= x0) & (fx < x1) & (fy >= y0) & (fy < y1)
    ix = np.floor((fx[inside] - x0) / (x1 - x0) * resolution).astype(int)
    iy = np.floor((fy[inside] - y0) / (y1 - y0) * resolution).astype(int)
    ix = np.clip(ix, 0, resolution - 1)
    iy = np.clip(iy, 0, resolution - 1)
    counts = np.zeros((resolution, resolution), dtype=np.int64)
    np.add.at(counts, (iy, ix), 1)

    n_in = int(inside.sum())
    n_out = len(cloud) - n_in
    if n_out > 0.99 * len(cloud):
        warnings.warn(
            "over 99% of the cloud lies outside the window", EmptyWindowWarning
        )

    top = counts.max()
    gray = (counts * 255 // top) if top > 0 else counts
    with open(path, "w") as fh:
        fh.write(f"P2\n{resolution} {resolution}\n255\n")
        for row in gray:
            fh.write(" ".join(str(int(v)) for v in row) + "\n")
    counts_path = str(path) + ".counts.csv"
    with open(counts_path, "w") as fh:
        for row in counts:
            fh.write(",".join(str(int(v)) for v in row) + "\n")
    return HistogramReport(n_in, n_out, str(path), counts_path)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass(frozen=True)
class RunManifest:
    """Everything needed to reproduce a CLI run byte-for-byte."""

    command: str
    tool_version: str
    params: dict
    seed: int
    workers: int
    counts: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)  # path -> sha256

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")


def load_manifest(path) -> RunManifest:
    with open(path) as fh:
        data = json.load(fh)
    return RunManifest(**data)
