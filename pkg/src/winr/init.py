"""Initialization schemes: random placement vs. singularity-aware placement.

The 1D route estimates a continuous wavelet transform with a Gabor mother
wavelet, follows modulus maxima that persist across scales (signatures of
singularities), and parks template atoms at those locations.  The 2D route
uses Canny edges as the singularity proxy: positions from the edge map,
oscillation directions from the gradient angle, isotropic ("radially
symmetric") envelopes.  Both schemes draw scale weights from the same
interval and share the hidden-layer initialization, so experiments isolate
first-layer placement.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .model import (
    ActivationSpec,
    FirstLayer,
    HiddenLayer,
    first_layer_scale_only,
)
from .numerics import Grid1D
from .signals import Image2D, Signal1D
from .templates import TemplateSpec, eval_template_many, split_gabor


class ScaleResolutionError(ValueError):
    """Requested CWT scale is below the grid's resolution limit."""


@dataclass(frozen=True)
class CwtGrid:
    """CWT estimate: coefficients[j, u] at scale scales[j] (in samples)."""

    scales: np.ndarray                  # (J,) increasing, in samples
    coefficients: np.ndarray            # (J, n) complex
    mother: TemplateSpec
    grid: Grid1D
    signal_linf: float


def cwt_1d(signal, scales=None, mother: TemplateSpec | None = None
           ) -> CwtGrid:
    """Discrete estimate of the continuous wavelet transform.

    coefficients[j, u] = sum_x signal[x] * conj(psi((x - u) / s_j)) / sqrt(s_j)
    computed by FFT cross-correlation per scale (circular in x).  Scales are
    measured in samples and must be at least 2.
    """
    if isinstance(signal, Signal1D):
        grid, values = signal.grid, signal.values
    else:
        values = np.asarray(signal, dtype=np.float64)
        grid = Grid1D(values.shape[0], 0.0, 1.0)
    n = values.shape[0]
    if mother is None:
        mother = split_gabor()
    if scales is None:
        scales = default_cwt_scales()
    scales = np.asarray(scales, dtype=np.float64)
    if np.any(np.diff(scales) <= 0) or np.any(scales <= 0):
        raise ValueError("scales must be positive and increasing")
    if scales[0] < 2.0:
        raise ScaleResolutionError(
            f"scale {scales[0]:g} below the minimum resolvable scale 2")
    offsets = np.fft.fftfreq(n, d=1.0 / n)   # signed circular offsets
    f_hat = np.fft.fft(values.astype(np.complex128))
    coeffs = np.empty((scales.size, n), dtype=np.complex128)
    for j, s in enumerate(scales):
        kernel = eval_template_many(mother, (offsets / s)[:, None])
        coeffs[j] = np.fft.ifft(f_hat * np.conj(np.fft.fft(kernel))) \
            / np.sqrt(s)
    return CwtGrid(scales, coeffs, mother, grid,
                   float(np.max(np.abs(values))))


def default_cwt_scales(count: int = 8, base: float = 2.0) -> np.ndarray:
    """Dyadically spaced scales 2, 4, ..., in samples."""
    return base * 2.0 ** np.arange(count)


@dataclass(frozen=True)
class WMMPoint:
    location: tuple                     # signal coordinates (1 or 2 values)
    scale: float                        # signal units
    strength: float
    orientation: float | None = None    # radians, 2D only


@dataclass(frozen=True)
class WMMPointSet:
    points: tuple

    def __len__(self):
        return len(self.points)

    def locations(self) -> np.ndarray:
        return np.array([p.location for p in self.points])


def _local_maxima(row: np.ndarray) -> np.ndarray:
    """Indices of strict interior local maxima of a 1D array."""
    idx = np.nonzero((row[1:-1] > row[:-2]) & (row[1:-1] > row[2:]))[0] + 1
    return idx


#: default modulus threshold, as a fraction of max|signal| in scale-free
#: units |coef|/sqrt(s); smooth regions respond at the mother wavelet's
#: tiny DC level (~3e-3 per unit amplitude) and fall well below this,
#: jump- and spike-type singularities land a decade above it
DEFAULT_WMM_THRESHOLD = 0.01


def wmm_points_1d(cwt: CwtGrid, persistence: int = 4,
                  min_strength: float | None = None) -> WMMPointSet:
    """Modulus maxima at the finest scale that persist across scales.

    A point qualifies when it is a strict local maximum of |coefficients|
    along position at the finest scale, chains (within +-2 samples) to a
    local maximum on at least `persistence` consecutive scales, and its
    scale-free strength exceeds the threshold.  Points closer than 2
    samples are deduplicated, strongest kept.
    """
    if persistence > cwt.scales.size:
        raise ValueError("persistence exceeds the number of scales")
    modulus = np.abs(cwt.coefficients)
    n = modulus.shape[1]
    if min_strength is None:
        min_strength = DEFAULT_WMM_THRESHOLD * cwt.signal_linf
    maxima_per_scale = [set(_local_maxima(modulus[j]))
                        for j in range(cwt.scales.size)]

    candidates = []
    for u in _local_maxima(modulus[0]):
        strength_free = modulus[0, u] / np.sqrt(cwt.scales[0])
        if strength_free < min_strength:
            continue
        cur = u
        chained = 1
        for j in range(1, cwt.scales.size):
            near = [m for m in maxima_per_scale[j] if abs(m - cur) <= 2]
            if not near:
                break
            cur = min(near, key=lambda m: (abs(m - cur), m))
            chained += 1
        if chained >= persistence:
            candidates.append((u, modulus[0, u]))

    candidates.sort(key=lambda c: -c[1])
    kept: list[tuple[int, float]] = []
    for u, strength in candidates:
        if all(abs(u - v) > 2 for v, _ in kept):
            kept.append((u, strength))
    kept.sort(key=lambda c: c[0])
    spacing = cwt.grid.spacing
    points = tuple(
        WMMPoint((cwt.grid.lo + u * spacing,), cwt.scales[0] * spacing,
                 float(strength))
        for u, strength in kept
    )
    return WMMPointSet(points)


@dataclass(frozen=True)
class CannyParams:
    sigma: float = 1.4                  # pixels
    low: float = 0.1                    # fraction of max gradient magnitude
    high: float = 0.25

    def __post_init__(self):
        if not (0 < self.low < self.high <= 1):
            raise ValueError("need 0 < low < high <= 1")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")


def canny_edges(image, params: CannyParams = CannyParams()):
    """Canny detector: smooth, Sobel, 4-direction NMS, hysteresis.

    Returns (mask, orientation) where orientation holds the gradient angle
    (radians) at every pixel; only entries under the mask are meaningful.
    A constant image yields an empty mask.
    """
    values = image.values if isinstance(image, Image2D) else \
        np.asarray(image, dtype=np.float64)
    if values.shape[0] < 16 or values.shape[1] < 16:
        raise ValueError("image must be at least 16x16")
    smooth = ndimage.gaussian_filter(values, params.sigma)
    gx = ndimage.sobel(smooth, axis=1)
    gy = ndimage.sobel(smooth, axis=0)
    mag = np.hypot(gx, gy)
    orientation = np.arctan2(gy, gx)
    peak = mag.max()
    if peak == 0.0:
        return np.zeros(values.shape, dtype=bool), orientation

    # quantize gradient direction to 0/45/90/135 degrees and keep ridge
    # pixels that dominate both neighbors along the gradient
    sector = (np.round(orientation / (np.pi / 4)).astype(int)) % 4
    padded = np.pad(mag, 1, mode="constant")
    center = padded[1:-1, 1:-1]
    neighbor_pairs = {
        0: (padded[1:-1, 2:], padded[1:-1, :-2]),      # horizontal gradient
        1: (padded[2:, 2:], padded[:-2, :-2]),         # diagonal
        2: (padded[2:, 1:-1], padded[:-2, 1:-1]),      # vertical gradient
        3: (padded[2:, :-2], padded[:-2, 2:]),         # anti-diagonal
    }
    thin = np.zeros(values.shape, dtype=bool)
    for q, (fwd, bwd) in neighbor_pairs.items():
        sel = sector == q
        thin |= sel & (center >= fwd) & (center >= bwd)

    low_mask = thin & (mag >= params.low * peak)
    high_mask = thin & (mag >= params.high * peak)
    labels, count = ndimage.label(low_mask, structure=np.ones((3, 3)))
    if count == 0:
        return np.zeros(values.shape, dtype=bool), orientation
    strong = np.unique(labels[high_mask])
    strong = strong[strong > 0]
    mask = np.isin(labels, strong)
    return mask, orientation


def edge_points(mask: np.ndarray, orientation: np.ndarray,
                magnitudes: np.ndarray | None, m: int,
                sigma_pixels: float = 1.4) -> WMMPointSet:
    """Uniformly stride the edge-pixel list down to exactly m points.

    Deterministic given the mask: pixels are taken in raster order and
    subsampled with a fixed stride, following the subset-of-edge-locations
    recipe for 2D initialization.
    """
    ys, xs = np.nonzero(mask)
    count = xs.size
    if count < m:
        raise ValueError(f"edge map has only {count} pixels, need {m}")
    idx = np.round(np.arange(m) * (count / m)).astype(int)
    ny, nx = mask.shape
    pts = []
    for i in idx:
        x, y = xs[i], ys[i]
        strength = float(magnitudes[y, x]) if magnitudes is not None else 1.0
        pts.append(WMMPoint(((x + 0.5) / nx, (y + 0.5) / ny),
                            sigma_pixels / nx, strength,
                            float(orientation[y, x])))
    return WMMPointSet(tuple(pts))


def _rotation(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def _first_layer_at(template: TemplateSpec, centers: np.ndarray,
                    scales: np.ndarray, thetas=None) -> FirstLayer:
    """Atoms centered at `centers`: bias solves W u + b = 0."""
    if template.d_in == 1:
        return first_layer_scale_only(template, scales[:, None],
                                      -scales[:, None] * centers)
    mats = np.stack([s * _rotation(0.0 if thetas is None else th)
                     for s, th in zip(scales, thetas if thetas is not None
                                      else np.zeros(len(scales)))])
    biases = -np.einsum("tij,tj->ti", mats, centers)
    return FirstLayer(template, "free", biases, W=mats)


def wmm_initialize(template: TemplateSpec, f1: int, wmm: WMMPointSet,
                   k_per_point: int, seed: int,
                   scale_range: tuple | None = None,
                   domain=None) -> FirstLayer:
    """Place k atoms at every WMM point; scale weights drawn uniformly.

    Centers are deterministic (the WMM locations, each repeated k times);
    only the scale draw uses the seed.  In 2D the weights are s * R(theta)
    with theta the detected edge orientation, so every atom keeps an
    isotropic (radially symmetric) envelope.  An empty point set falls back
    to random placement with a warning.
    """
    if len(wmm) == 0:
        warnings.warn("empty WMM point set; falling back to random "
                      "initialization")
        if domain is None:
            domain = ((0.0, 1.0),) * template.d_in
        return random_initialize(template, f1, domain, k_per_point, seed,
                                 scale_range=scale_range)
    m = len(wmm)
    if f1 != k_per_point * m:
        raise ValueError(f"f1 = {f1} does not equal K*m = {k_per_point}*{m}")
    rng = np.random.default_rng(seed)
    lo, hi = scale_range if scale_range is not None else (1.0, k_per_point)
    scales = rng.uniform(lo, hi, size=f1)
    centers = np.repeat(wmm.locations(), k_per_point, axis=0)
    if template.d_in == 1:
        return _first_layer_at(template, centers, scales)
    thetas = np.repeat(
        np.array([p.orientation if p.orientation is not None else 0.0
                  for p in wmm.points]), k_per_point)
    return _first_layer_at(template, centers, scales, thetas)


def random_initialize(template: TemplateSpec, f1: int, domain,
                      k_per_point: int, seed: int,
                      scale_range: tuple | None = None) -> FirstLayer:
    """Atoms with abscissa uniform over the domain, scales uniform.

    `domain` is (lo, hi) for 1D or per-axis bounds for 2D.  The 2D variant
    also draws a uniform oscillation direction per atom.
    """
    rng = np.random.default_rng(seed)
    lo, hi = scale_range if scale_range is not None else (1.0, k_per_point)
    scales = rng.uniform(lo, hi, size=f1)
    if template.d_in == 1:
        if np.ndim(domain[0]) > 0:
            domain = domain[0]
        centers = rng.uniform(domain[0], domain[1], size=(f1, 1))
        return _first_layer_at(template, centers, scales)
    bounds = np.asarray(domain, dtype=np.float64)
    centers = np.column_stack([
        rng.uniform(bounds[a][0], bounds[a][1], size=f1) for a in range(2)])
    thetas = rng.uniform(0.0, 2.0 * np.pi, size=f1)
    return _first_layer_at(template, centers, scales, thetas)


def random_mlp(widths: tuple, seed: int,
               activation: ActivationSpec) -> tuple[list, np.ndarray]:
    """Hidden + final layers with entries uniform in +-1/sqrt(fan_in).

    widths chains F1 -> F2 -> ... -> F_last; the final layer maps F_last
    to 1.  Real and imaginary parts are drawn independently.
    """
    rng = np.random.default_rng(seed)

    def cplx_uniform(shape, fan_in):
        bound = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape) \
            + 1j * rng.uniform(-bound, bound, size=shape)

    hidden = []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        hidden.append(HiddenLayer(cplx_uniform((fan_out, fan_in), fan_in),
                                  cplx_uniform((fan_out,), fan_in),
                                  activation))
    final_w = cplx_uniform((1, widths[-1]), widths[-1])
    return hidden, final_w


def wmm_to_csv(path, points: WMMPointSet) -> None:
    """Export as CSV: u[,v], scale, strength[, orientation]."""
    from .signals import save_csv
    if not points.points:
        save_csv(path, ("u", "scale", "strength"), [[], [], []])
        return
    two_d = len(points.points[0].location) == 2
    locs = points.locations()
    cols = [locs[:, 0]]
    header = ["u"]
    if two_d:
        header.append("v")
        cols.append(locs[:, 1])
    header += ["scale", "strength"]
    cols.append(np.array([p.scale for p in points.points]))
    cols.append(np.array([p.strength for p in points.points]))
    if two_d:
        header.append("orientation")
        cols.append(np.array([p.orientation for p in points.points]))
    save_csv(path, tuple(header), cols)
