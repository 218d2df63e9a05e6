"""Test signals, cartoon images, and the package's file formats.

1D generators are the four classical piecewise test signals (blocks, bumps,
heavisine, doppler) on [0, 1), normalized to unit max amplitude.  Images
are synthetic cartoons (disk, annulus, step) on [0, 1)^2 so experiments
need no external data; user images can be supplied as binary P5 PGM files.
All generators are deterministic.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .numerics import Grid1D, Grid2D

REPORT_SCHEMA = "winr-report-v1"

# breakpoints and heights shared by blocks/bumps
_T = np.array([0.1, 0.13, 0.15, 0.23, 0.25, 0.4, 0.44, 0.65, 0.76, 0.78,
               0.81])
_H_BLOCKS = np.array([4, -5, 3, -4, 5, -4.2, 2.1, 4.3, -3.1, 2.1, -4.2])
_H_BUMPS = np.array([4, 5, 3, 4, 5, 4.2, 2.1, 4.3, 3.1, 5.1, 4.2])
_W_BUMPS = np.array([0.005, 0.005, 0.006, 0.01, 0.01, 0.03, 0.01, 0.01,
                     0.005, 0.008, 0.005])


@dataclass(frozen=True)
class Signal1D:
    grid: Grid1D
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (self.grid.n,):
            raise ValueError("value count does not match grid")


@dataclass(frozen=True)
class Image2D:
    grid: Grid2D
    values: np.ndarray                  # (ny, nx) floats in [0, 1]

    def __post_init__(self):
        if self.values.shape != (self.grid.ny, self.grid.nx):
            raise ValueError("image shape does not match grid")


SIGNAL_NAMES = ("blocks", "bumps", "heavisine", "doppler")


def gen_signal(name: str, n: int) -> Signal1D:
    """One of the standard piecewise test signals, unit max amplitude."""
    grid = Grid1D(n, 0.0, 1.0)
    x = grid.points()
    if name == "blocks":
        values = np.zeros(n)
        for h, t in zip(_H_BLOCKS, _T):
            values += h * (1.0 + np.sign(x - t)) / 2.0
    elif name == "bumps":
        values = np.zeros(n)
        for h, t, w in zip(_H_BUMPS, _T, _W_BUMPS):
            values += h * (1.0 + np.abs((x - t) / w)) ** -4
    elif name == "heavisine":
        values = 4.0 * np.sin(4.0 * np.pi * x) - np.sign(x - 0.3) \
            - np.sign(0.72 - x)
    elif name == "doppler":
        eps = 0.05
        values = np.sqrt(x * (1.0 - x)) \
            * np.sin(2.0 * np.pi * (1.0 + eps) / (x + eps))
    else:
        raise ValueError(f"unknown signal {name!r}; choose from "
                         f"{SIGNAL_NAMES}")
    return Signal1D(grid, values / np.max(np.abs(values)))


IMAGE_KINDS = ("disk", "annulus", "step")


def gen_image(kind: str, size: int, radius: float = None,
              inner: float = None, center: tuple = None,
              background: str = "flat") -> Image2D:
    """Synthetic cartoon image on [0,1)^2; geometry given in pixels.

    background='waves' replaces the flat zero background with a smooth
    deterministic texture (the blurred-background analog); the foreground
    stays at level 1.
    """
    if kind not in IMAGE_KINDS:
        raise ValueError(f"unknown image kind {kind!r}")
    if size < 32:
        raise ValueError("size must be >= 32")
    grid = Grid2D(size, size, 0.0, 1.0, 0.0, 1.0)
    iy, ix = np.mgrid[0:size, 0:size]
    px = ix + 0.5
    py = iy + 0.5
    if center is None:
        center = (size / 2.0, size / 2.0)
    if radius is None:
        radius = size / 4.0
    if radius >= size / 2.0 or radius <= 0:
        raise ValueError("radius outside frame")
    r2 = (px - center[0]) ** 2 + (py - center[1]) ** 2
    if kind == "disk":
        mask = r2 <= radius**2
    elif kind == "annulus":
        if inner is None:
            inner = radius / 2.0
        if not 0 < inner < radius:
            raise ValueError("annulus needs 0 < inner < radius")
        mask = (r2 <= radius**2) & (r2 >= inner**2)
    else:
        mask = px >= size / 2.0
    if background == "flat":
        values = np.zeros((size, size))
    elif background == "waves":
        u = px / size
        v = py / size
        values = 0.3 + 0.15 * np.sin(2 * np.pi * u) \
            * np.cos(2 * np.pi * v) + 0.1 * np.sin(4 * np.pi * (u + v))
    else:
        raise ValueError(f"unknown background {background!r}")
    values[mask] = 1.0
    return Image2D(grid, np.clip(values, 0.0, 1.0))


# ---------------------------------------------------------------------------
# Binary PGM (P5), maxval 255 or 65535
# ---------------------------------------------------------------------------

class PgmParseError(ValueError):
    pass


def _next_token(data: bytes, pos: int) -> tuple[bytes, int]:
    n = len(data)
    while pos < n:
        if data[pos:pos + 1].isspace():
            pos += 1
        elif data[pos:pos + 1] == b"#":
            while pos < n and data[pos] != 0x0A:
                pos += 1
        else:
            break
    if pos >= n:
        raise PgmParseError(f"unexpected end of header at byte {pos}")
    start = pos
    while pos < n and not data[pos:pos + 1].isspace():
        pos += 1
    return data[start:pos], pos


def load_pgm(path) -> Image2D:
    with open(path, "rb") as fh:
        data = fh.read()
    magic, pos = _next_token(data, 0)
    if magic != b"P5":
        raise PgmParseError(f"bad magic {magic!r} at byte 0 (want P5)")
    fields = []
    for _ in range(3):
        tok, pos = _next_token(data, pos)
        try:
            fields.append(int(tok))
        except ValueError:
            raise PgmParseError(f"non-integer header field {tok!r} near "
                                f"byte {pos}") from None
    width, height, maxval = fields
    if maxval not in (255, 65535):
        raise PgmParseError(f"unsupported maxval {maxval}")
    pos += 1                             # single whitespace after maxval
    depth = 1 if maxval == 255 else 2
    expected = width * height * depth
    payload = data[pos:pos + expected]
    if len(payload) != expected:
        raise PgmParseError(f"truncated payload: expected {expected} bytes, "
                            f"got {len(payload)}")
    dtype = np.uint8 if depth == 1 else np.dtype(">u2")
    raw = np.frombuffer(payload, dtype=dtype).reshape(height, width)
    values = np.clip(raw.astype(np.float64) / maxval, 0.0, 1.0)
    grid = Grid2D(width, height, 0.0, 1.0, 0.0, 1.0)
    return Image2D(grid, values)


def save_pgm(path, image: Image2D, maxval: int = 255) -> None:
    if maxval not in (255, 65535):
        raise ValueError("maxval must be 255 or 65535")
    q = np.rint(np.clip(image.values, 0.0, 1.0) * maxval)
    arr = q.astype(np.uint8 if maxval == 255 else np.dtype(">u2"))
    header = f"P5\n{image.grid.nx} {image.grid.ny}\n{maxval}\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(arr.tobytes())


# ---------------------------------------------------------------------------
# CSV / JSON reports.  Floats are written with 17 significant digits, which
# round-trips IEEE doubles exactly; reports carry a schema tag and a hash of
# the configuration that produced them.
# ---------------------------------------------------------------------------

def format_float(v: float) -> str:
    return f"{float(v):.17g}"


def save_csv(path, header: tuple, columns: list) -> None:
    """Write columns (each an array; floats get 17 significant digits)."""
    rows = 0 if not columns else len(columns[0])
    for col in columns:
        if len(col) != rows:
            raise ValueError("ragged columns")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(rows):
            cells = []
            for col in columns:
                v = col[i]
                if isinstance(v, (float, np.floating)):
                    cells.append(format_float(v))
                else:
                    cells.append(str(v))
            fh.write(",".join(cells) + "\n")


def save_csv_signal(path, xs, values) -> None:
    save_csv(path, ("x", "value"),
             [np.asarray(xs, dtype=np.float64),
              np.asarray(values, dtype=np.float64)])


def load_csv(path) -> tuple[list, np.ndarray]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    header = lines[0].split(",")
    data = [[v for v in ln.split(",")] for ln in lines[1:]]
    cols = np.array(data, dtype=np.float64).T if data else \
        np.empty((len(header), 0))
    return header, cols


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def save_json_report(path, payload: dict, config: dict | None = None) -> None:
    doc = {"schema": REPORT_SCHEMA}
    doc.update(payload)
    if config is not None:
        doc["config"] = config
        doc["config_sha256"] = config_hash(config)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
