"""Spectrum measurement, conic energy checks, and the two-cone construction.

Spectra are plain DFTs of (optionally bump-windowed) samples scaled by the
grid cell size, with cyclic frequencies in fftfreq order.  Conic sets come
in three flavors: half-lines in 1D, angular cones in 2D, and weakly conic
variants of either that additionally exclude a punctured ball around the
origin (the origin itself belongs to every weakly conic set, so the DC bin
always counts as inside).
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace

import numpy as np

from .model import (
    ActivationSpec,
    FirstLayer,
    HiddenLayer,
    INRModel,
    SplitModel,
    forward_batch,
    model_to_dict,
    split_forward_batch,
    wave_cubic,
)
from .numerics import Grid1D, Grid2D, fft_1d, fft_2d, hilbert_transform
from .templates import (
    MEYER_LO,
    TemplateSpec,
    eval_template_many,
    fourier_support,
    meyer,
)


class ZeroEnergyError(ValueError):
    """Energy fraction of an all-zero spectrum is undefined."""


@dataclass(frozen=True)
class SpectrumReport:
    """Discretized spectrum: axis frequencies, magnitudes, total energy."""

    freqs: tuple                        # per-axis arrays, fftfreq order
    magnitude: np.ndarray               # (n,) or (ny, nx)
    bin_measure: float                  # frequency-cell size
    metadata: dict

    @property
    def total_energy(self) -> float:
        return float(np.sum(self.magnitude**2) * self.bin_measure)

    def bin_freq_coords(self) -> np.ndarray:
        """Frequency coordinates of every bin, shape (nbins, dim)."""
        if len(self.freqs) == 1:
            return self.freqs[0][:, None]
        fx, fy = self.freqs
        gx, gy = np.meshgrid(fx, fy)
        return np.column_stack([gx.ravel(), gy.ravel()])


def _model_hash(model) -> str:
    doc = json.dumps(model_to_dict(model), sort_keys=True)
    return hashlib.sha256(doc.encode("utf-8")).hexdigest()[:16]


def measure_spectrum(source, grid, window: TemplateSpec | None = None
                     ) -> SpectrumReport:
    """DFT of model outputs or raw samples on a grid.

    `source` may be an INRModel/SplitModel (evaluated on the grid) or an
    array of samples in the grid's raster order.  A window template, when
    given, is evaluated relative to the domain center and multiplied in
    before the transform.
    """
    meta = {"window": None if window is None else window.kind}
    if isinstance(source, SplitModel):
        values = split_forward_batch(source, grid)
        meta["model"] = _model_hash(source)
    elif isinstance(source, INRModel):
        values = forward_batch(source, grid)
        meta["model"] = _model_hash(source)
    else:
        values = np.asarray(source, dtype=np.complex128).ravel()
    if isinstance(grid, Grid1D):
        values = values.reshape(grid.n)
        if window is not None:
            mid = 0.5 * (grid.lo + grid.hi)
            values = values * eval_template_many(
                window, (grid.points() - mid)[:, None])
        spec = fft_1d(values) * grid.spacing
        return SpectrumReport((grid.freqs(),), np.abs(spec),
                              1.0 / grid.length, meta)
    if not isinstance(grid, Grid2D):
        raise TypeError("grid must be Grid1D or Grid2D")
    values = values.reshape(grid.ny, grid.nx)
    if window is not None:
        mid = np.array([0.5 * (grid.xlo + grid.xhi),
                        0.5 * (grid.ylo + grid.yhi)])
        w = eval_template_many(window, grid.points() - mid)
        values = values * w.reshape(grid.ny, grid.nx)
    cell = grid.xaxis.spacing * grid.yaxis.spacing
    spec = fft_2d(values) * cell
    return SpectrumReport((grid.xaxis.freqs(), grid.yaxis.freqs()),
                          np.abs(spec),
                          1.0 / (grid.xaxis.length * grid.yaxis.length),
                          meta)


@dataclass(frozen=True)
class ConeSpec:
    """A conic frequency set; r_min > 0 makes it weakly conic."""

    kind: str                           # 'half_line' | 'cone2d'
    sign: int = 1
    center_angle: float = 0.0
    half_angle: float = np.pi / 2
    r_min: float = 0.0

    def __post_init__(self):
        if self.kind not in ("half_line", "cone2d"):
            raise ValueError(f"unknown cone kind {self.kind!r}")
        if self.kind == "cone2d" and not 0 < self.half_angle <= np.pi / 2:
            raise ValueError("half_angle must lie in (0, pi/2]")
        if self.r_min < 0:
            raise ValueError("r_min must be nonnegative")


def half_line(sign: int = 1, r_min: float = 0.0) -> ConeSpec:
    return ConeSpec("half_line", sign=1 if sign >= 0 else -1, r_min=r_min)


def cone2d(center_angle: float, half_angle: float,
           r_min: float = 0.0) -> ConeSpec:
    return ConeSpec("cone2d", center_angle=center_angle,
                    half_angle=half_angle, r_min=r_min)


def weakly_conic(base: ConeSpec, r_min: float) -> ConeSpec:
    if not r_min > 0:
        raise ValueError("weakly conic sets need r_min > 0")
    return replace(base, r_min=r_min)


def cone_contains(cone: ConeSpec, coords: np.ndarray) -> np.ndarray:
    """Boolean membership of frequency coordinates (nbins, dim)."""
    coords = np.atleast_2d(coords)
    radius = np.linalg.norm(coords, axis=1)
    at_origin = radius == 0.0
    if cone.kind == "half_line":
        inside = cone.sign * coords[:, 0] >= 0.0
    else:
        angles = np.arctan2(coords[:, 1], coords[:, 0])
        delta = np.angle(np.exp(1j * (angles - cone.center_angle)))
        inside = np.abs(delta) <= cone.half_angle + 1e-12
    if cone.r_min > 0:
        inside = inside & (radius >= cone.r_min)
    return inside | at_origin


def cone_energy_fraction(report: SpectrumReport, cone: ConeSpec) -> float:
    """Fraction of total spectral energy at bins inside the cone."""
    energy = report.magnitude.ravel() ** 2
    total = energy.sum()
    if total <= 0.0:
        raise ZeroEnergyError("spectrum carries no energy")
    inside = cone_contains(cone, report.bin_freq_coords())
    return float(energy[inside].sum() / total)


def band_energy_fraction(report: SpectrumReport, lo: float,
                         hi: float = np.inf) -> float:
    """Fraction of energy at bins with lo <= |xi| < hi."""
    energy = report.magnitude.ravel() ** 2
    total = energy.sum()
    if total <= 0.0:
        raise ZeroEnergyError("spectrum carries no energy")
    radius = np.linalg.norm(report.bin_freq_coords(), axis=1)
    sel = (radius >= lo) & (radius < hi)
    return float(energy[sel].sum() / total)


@dataclass(frozen=True)
class ProgressivityResult:
    passed: bool
    fraction: float
    hypothesis_ok: bool
    violations: tuple                   # atom indices breaking containment


def _box_in_cone(cone: ConeSpec, box) -> bool:
    """Whether an axis-aligned frequency box lies inside the cone."""
    dim = len(box)
    corners = np.array(
        [[box[0][0]], [box[0][1]]] if dim == 1 else
        [[box[0][i], box[1][j]] for i in range(2) for j in range(2)])
    if not np.all(cone_contains(cone, corners)):
        return False
    if cone.r_min > 0:
        nearest = np.array([min(max(0.0, lo), hi) for lo, hi in box])
        r = np.linalg.norm(nearest)
        if 0.0 < r < cone.r_min or (r == 0.0 and any(
                lo < 0 < hi for lo, hi in box)):
            return False
        if r == 0.0:
            # box touches the origin only if it is exactly the origin
            if any(lo != 0 or hi != 0 for lo, hi in box):
                return False
    return True


def progressivity_check(model: INRModel, grid, cone: ConeSpec,
                        tol: float) -> ProgressivityResult:
    """Geometric hypothesis plus measured energy containment.

    First verifies that each atom's mapped effective frequency box
    W_t^T A lies inside the cone (a violation names the atom and is a
    hypothesis failure, not a refutation of the containment property);
    then requires the out-of-cone energy fraction to be at most tol.
    """
    desc = fourier_support(model.first.template)
    box = desc.effective_box
    mats = model.first.weight_matrices()
    violations = []
    for t in range(model.first.f1):
        mat = mats[t]
        if model.d == 1:
            w = float(mat[0, 0])
            ends = sorted((w * box[0][0], w * box[0][1]))
            mapped = ((ends[0], ends[1]),)
        else:
            corners = np.array([[box[0][i], box[1][j]]
                                for i in range(2) for j in range(2)])
            mapped_pts = corners @ mat
            mapped = tuple(
                (float(mapped_pts[:, a].min()), float(mapped_pts[:, a].max()))
                for a in range(2))
        if not _box_in_cone(cone, mapped):
            violations.append(t)
    report = measure_spectrum(model, grid)
    fraction = cone_energy_fraction(report, cone)
    hypothesis_ok = not violations
    passed = hypothesis_ok and (1.0 - fraction) <= tol
    return ProgressivityResult(passed, fraction, hypothesis_ok,
                               tuple(violations))


def analytic_signal_consistency(model, grid: Grid1D) -> float:
    """||imag(f) - H(real(f))||_2 / ||f||_2 on the grid.

    Small for progressive models (the output is its own analytic signal);
    order one for real low-pass models.
    """
    if isinstance(model, SplitModel):
        values = split_forward_batch(model, grid)
    elif isinstance(model, INRModel):
        values = forward_batch(model, grid)
    else:
        values = np.asarray(model, dtype=np.complex128)
    analytic = hilbert_transform(values.real)
    norm = np.linalg.norm(values)
    if norm == 0:
        raise ZeroEnergyError("model output is identically zero")
    return float(np.linalg.norm(values.imag - analytic.imag) / norm)


# ---------------------------------------------------------------------------
# The fixed 4-atom two-cone construction: two spatially separated groups of
# gaussian (x) tensor complex-Meyer (y) atoms with orthogonal oscillation
# directions, pushed through rho(z) = -z + z^2 - z^3.
# ---------------------------------------------------------------------------

FIG3_SCALES = (3.5, 4.5)
FIG3_ENV_SIGMA = 0.5
FIG3_GRID_N = 256


@dataclass(frozen=True)
class TwoConeReport:
    pre: SpectrumReport                 # spectrum of the atom sum g
    post: SpectrumReport                # spectrum of rho(g)
    cones: tuple                        # two weakly conic ConeSpecs
    r_min: float
    model: INRModel


def _rotation(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def fig3_construction(grid: Grid2D | None = None) -> TwoConeReport:
    """Build the two-group construction and measure both spectra.

    Returns the pre-activation and post-activation spectra together with
    the pair of dilatable weakly conic cones (r_min is the Meyer band's
    lower edge times the smallest scale).
    """
    if grid is None:
        grid = Grid2D(FIG3_GRID_N, FIG3_GRID_N, 0.0, 1.0, 0.0, 1.0)
    template = meyer(d_in=2, env_sigma=FIG3_ENV_SIGMA)
    s1, s2 = FIG3_SCALES
    groups = [
        # (center, orientation): group A oscillates along +y, B along +x
        ((0.25, 0.22), 0.0, s1),
        ((0.25, 0.28), 0.0, s2),
        ((0.75, 0.72), np.pi / 2, s1),
        ((0.75, 0.78), np.pi / 2, s2),
    ]
    mats = np.stack([s * _rotation(theta) for (_, theta, s) in groups])
    centers = np.array([c for (c, _, _) in groups])
    biases = -np.einsum("tij,tj->ti", mats, centers)
    first = FirstLayer(template, "free", biases, W=mats)
    hidden = [HiddenLayer(0.25 * np.ones((1, 4), dtype=np.complex128),
                          np.zeros(1, dtype=np.complex128), wave_cubic())]
    model = INRModel(first, hidden,
                     final_W=np.ones((1, 1), dtype=np.complex128),
                     final_b=np.zeros(1, dtype=np.complex128))

    # pre-activation field: the bare atom sum (identity in place of rho)
    linear = INRModel(first, [],
                      final_W=0.25 * np.ones((1, 4), dtype=np.complex128),
                      final_b=np.zeros(1, dtype=np.complex128))
    pre = measure_spectrum(linear, grid)
    post = measure_spectrum(model, grid)

    desc = fourier_support(template)
    env_hw = desc.effective_box[0][1]
    r_min = MEYER_LO * min(FIG3_SCALES)
    half_angle = float(np.arctan2(env_hw, MEYER_LO))
    cones = (cone2d(np.pi / 2, half_angle, r_min=r_min),
             cone2d(0.0, half_angle, r_min=r_min))
    return TwoConeReport(pre, post, cones, r_min, model)


def dilate_cone(cone: ConeSpec, factor: float) -> ConeSpec:
    """Widen a cone for approximate-containment checks."""
    if cone.kind == "half_line":
        return replace(cone, r_min=cone.r_min / factor)
    return replace(cone, half_angle=min(cone.half_angle * factor,
                                        np.pi / 2),
                   r_min=cone.r_min / factor)
