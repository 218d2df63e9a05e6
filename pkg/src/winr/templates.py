"""Template functions: the atoms applied in the first layer of an INR.

Closed-form kinds (gaussian, Gabor, complex sinusoid, bump) are evaluated
directly; the complex Meyer wavelet is defined by its Fourier profile and
evaluated in space from a cached inverse-FFT table with cubic interpolation.

Frequency convention
--------------------
All spectra in this package use the plain DFT (analysis kernel
``exp(-i*2*pi*xi*x)``) with cyclic frequencies.  Oscillatory templates are
written with a ``+i*2*pi*omega*x`` phase so that an atom with center
frequency ``omega`` registers at ``+omega`` on that axis: the progressive
(positive-frequency) geometry is preserved while keeping numpy's transform.
Under this convention a gaussian of spatial scale ``sigma`` has spectral
standard deviation ``1/(2*pi*sigma)``.

2D templates are tensor products of 1D factors: an isotropic gaussian times
a Gabor (oscillation along y) for images, a gaussian envelope times a
complex Meyer wavelet for the two-cone construction, and per-axis bumps for
the compactly supported kind.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .numerics import Grid1D, Grid2D, fft_1d

# Two-sided 99.9% mass of a standard gaussian.
_Z999 = 3.290526731491926

MEYER_LO = 2.0 * np.pi / 3.0
MEYER_HI = 8.0 * np.pi / 3.0


class MeyerRangeError(ValueError):
    """Meyer evaluation requested outside the tabulated spatial range."""


class AliasingError(ValueError):
    """Grid too coarse to resolve a template's effective frequency support."""


@dataclass(frozen=True)
class TemplateSpec:
    """A template function psi together with its defining parameters.

    kind is one of 'gaussian', 'gabor', 'sinusoid', 'meyer', 'bump'.
    For d_in == 2 the function is the tensor product of 1D factors; the
    oscillatory axis is y, and 'meyer'/'gabor' carry a gaussian envelope of
    scale env_sigma along x.
    """

    kind: str
    d_in: int = 1
    sigma: float = 1.0
    omega: float = 1.0
    radius: float = 1.0
    env_sigma: float = 1.0

    def __post_init__(self):
        if self.kind not in ("gaussian", "gabor", "sinusoid", "meyer", "bump"):
            raise ValueError(f"unknown template kind {self.kind!r}")
        if self.d_in not in (1, 2):
            raise ValueError("d_in must be 1 or 2")
        if self.kind in ("gaussian", "gabor") and not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.kind in ("gabor", "sinusoid") and not self.omega > 0:
            raise ValueError("omega must be positive")
        if self.kind == "bump" and not self.radius > 0:
            raise ValueError("radius must be positive")


def gaussian(sigma: float, d_in: int = 1) -> TemplateSpec:
    return TemplateSpec("gaussian", d_in=d_in, sigma=sigma)


def gabor(omega: float, sigma: float, d_in: int = 1) -> TemplateSpec:
    return TemplateSpec("gabor", d_in=d_in, sigma=sigma, omega=omega)


def complex_sinusoid(omega: float, d_in: int = 1) -> TemplateSpec:
    return TemplateSpec("sinusoid", d_in=d_in, omega=omega)


def meyer(d_in: int = 1, env_sigma: float = 1.0) -> TemplateSpec:
    return TemplateSpec("meyer", d_in=d_in, env_sigma=env_sigma)


def bump(radius: float = 1.0, d_in: int = 1) -> TemplateSpec:
    return TemplateSpec("bump", d_in=d_in, radius=radius)


# The split architecture's default atoms: envelope exp(-(pi*x)^2/6), i.e.
# sigma = sqrt(3)/pi, and unit center frequency for the Gabor half.
SPLIT_SIGMA = np.sqrt(3.0) / np.pi


def split_gaussian(d_in: int = 1) -> TemplateSpec:
    return gaussian(SPLIT_SIGMA, d_in=d_in)


def split_gabor(d_in: int = 1) -> TemplateSpec:
    return gabor(1.0, SPLIT_SIGMA, d_in=d_in)


def meyer_hat(xi) -> np.ndarray | float:
    """Fourier profile of the complex Meyer wavelet.

    sin(3*xi/4 - pi/2) on [2pi/3, 4pi/3], cos(3*xi/8 - pi/2) on
    [4pi/3, 8pi/3], zero elsewhere; the two branches agree (value 1) at
    4pi/3.
    """
    x = np.asarray(xi, dtype=np.float64)
    mid = 4.0 * np.pi / 3.0
    out = np.zeros_like(x)
    lo_band = (x >= MEYER_LO) & (x <= mid)
    hi_band = (x > mid) & (x <= MEYER_HI)
    out[lo_band] = np.sin(0.75 * x[lo_band] - 0.5 * np.pi)
    out[hi_band] = np.cos(0.375 * x[hi_band] - 0.5 * np.pi)
    if np.isscalar(xi):
        return float(out)
    return out


# Spatial Meyer table: inverse FFT of meyer_hat on a dyadic grid over
# [-MEYER_TABLE_HALF, MEYER_TABLE_HALF), interpolated with a cubic spline.
MEYER_TABLE_N = 8192
MEYER_TABLE_HALF = 32.0

_meyer_cache: dict = {}


def _meyer_table():
    if "spline" not in _meyer_cache:
        n = MEYER_TABLE_N
        length = 2.0 * MEYER_TABLE_HALF
        xs = -MEYER_TABLE_HALF + (length / n) * np.arange(n)
        freqs = np.fft.fftfreq(n, d=length / n)
        hat = meyer_hat(freqs)
        phase = np.exp(2j * np.pi * freqs * xs[0])
        values = (n / length) * np.fft.ifft(hat * phase)
        spline = CubicSpline(xs, values)
        _meyer_cache["spline"] = spline
        _meyer_cache["dspline"] = spline.derivative()
        _meyer_cache["xmax"] = xs[-1]
    return _meyer_cache


def _meyer_values(x: np.ndarray) -> np.ndarray:
    tab = _meyer_table()
    if np.any(x < -MEYER_TABLE_HALF) or np.any(x > tab["xmax"]):
        raise MeyerRangeError(
            f"Meyer evaluation outside tabulated range "
            f"[{-MEYER_TABLE_HALF}, {tab['xmax']:.6g}]"
        )
    return tab["spline"](x)


def _meyer_grad(x: np.ndarray) -> np.ndarray:
    tab = _meyer_table()
    if np.any(x < -MEYER_TABLE_HALF) or np.any(x > tab["xmax"]):
        raise MeyerRangeError("Meyer evaluation outside tabulated range")
    return tab["dspline"](x)


def _bump_values(x: np.ndarray, radius: float) -> np.ndarray:
    t = x / radius
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    ti = t[inside]
    out[inside] = np.exp(1.0 + 1.0 / (ti * ti - 1.0))
    return out


def _bump_grad(x: np.ndarray, radius: float) -> np.ndarray:
    t = x / radius
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    ti = t[inside]
    d = ti * ti - 1.0
    out[inside] = np.exp(1.0 + 1.0 / d) * (-2.0 * ti / (d * d)) / radius
    return out


def _axis_factors(spec: TemplateSpec) -> list[tuple[str, TemplateSpec]]:
    """Per-axis 1D factor kinds for evaluation; y is the oscillatory axis."""
    if spec.d_in == 1:
        return [(spec.kind, spec)]
    env = TemplateSpec("gaussian", sigma=spec.env_sigma)
    if spec.kind == "gaussian":
        return [("gaussian", spec), ("gaussian", spec)]
    if spec.kind == "bump":
        return [("bump", spec), ("bump", spec)]
    if spec.kind == "gabor":
        iso = TemplateSpec("gaussian", sigma=spec.sigma)
        return [("gaussian", iso), ("gabor", spec)]
    if spec.kind == "sinusoid":
        return [("const", spec), ("sinusoid", spec)]
    # meyer: gaussian envelope along x, Meyer profile along y
    return [("gaussian", env), ("meyer", spec)]


def _factor_values(kind: str, spec: TemplateSpec, x: np.ndarray) -> np.ndarray:
    """Factor values; real-valued kinds stay real (promoted on combination)."""
    if kind == "gaussian":
        return np.exp(x * x * (-0.5 / spec.sigma**2))
    if kind == "gabor":
        out = np.empty(x.shape, dtype=np.complex128)
        out.real = x * x * (-0.5 / spec.sigma**2)
        out.imag = (2.0 * np.pi * spec.omega) * x
        return np.exp(out, out=out)
    if kind == "sinusoid":
        out = np.empty(x.shape, dtype=np.complex128)
        out.real = 0.0
        out.imag = (2.0 * np.pi * spec.omega) * x
        return np.exp(out, out=out)
    if kind == "meyer":
        return _meyer_values(x)
    if kind == "bump":
        return _bump_values(x, spec.radius)
    if kind == "const":
        return np.ones_like(x)
    raise ValueError(kind)


def _factor_grads(kind: str, spec: TemplateSpec, x: np.ndarray,
                  values: np.ndarray) -> np.ndarray:
    """d/dx of a factor, reusing already computed values where possible."""
    if kind == "gaussian":
        return values * (x * (-1.0 / spec.sigma**2))
    if kind == "gabor":
        factor = np.empty(x.shape, dtype=np.complex128)
        factor.real = x * (-1.0 / spec.sigma**2)
        factor.imag = 2.0 * np.pi * spec.omega
        factor *= values
        return factor
    if kind == "sinusoid":
        return values * (2j * np.pi * spec.omega)
    if kind == "meyer":
        return _meyer_grad(x)
    if kind == "bump":
        return _bump_grad(x, spec.radius)
    if kind == "const":
        return np.zeros_like(x)
    raise ValueError(kind)


def _axis_views(spec: TemplateSpec, v) -> list[np.ndarray]:
    v = np.atleast_2d(np.asarray(v, dtype=np.float64))
    if v.shape[-1] != spec.d_in:
        raise ValueError(f"points have dimension {v.shape[-1]}, template "
                         f"expects {spec.d_in}")
    # contiguous per-axis copies keep the elementwise kernels fast
    return [np.ascontiguousarray(v[..., i]) for i in range(spec.d_in)]


def eval_axes(spec: TemplateSpec, axes: list) -> np.ndarray:
    """psi over per-axis coordinate arrays (may return a real dtype)."""
    factors = _axis_factors(spec)
    out = _factor_values(factors[0][0], factors[0][1], axes[0])
    for axis in range(1, spec.d_in):
        out = out * _factor_values(factors[axis][0], factors[axis][1],
                                   axes[axis])
    return out


def eval_template_many(spec: TemplateSpec, v: np.ndarray) -> np.ndarray:
    """Evaluate psi at an array of points; last axis is the coordinate."""
    return np.asarray(eval_axes(spec, _axis_views(spec, v)),
                      dtype=np.complex128)


def eval_template(spec: TemplateSpec, x) -> complex:
    """psi(x) for a single point (scalar for d_in=1, pair for d_in=2)."""
    v = np.atleast_1d(np.asarray(x, dtype=np.float64)).reshape(1, -1)
    return complex(eval_template_many(spec, v)[0])


def eval_template_grad_many(spec: TemplateSpec, v: np.ndarray) -> np.ndarray:
    """Gradient of psi w.r.t. each input coordinate, shape (..., d_in)."""
    axes = _axis_views(spec, v)
    factors = _axis_factors(spec)
    vals = [_factor_values(k, s, axes[i])
            for i, (k, s) in enumerate(factors)]
    grads = [_factor_grads(k, s, axes[i], vals[i])
             for i, (k, s) in enumerate(factors)]
    out = np.empty(axes[0].shape + (spec.d_in,), dtype=np.complex128)
    for axis in range(spec.d_in):
        g = grads[axis]
        for other in range(spec.d_in):
            if other != axis:
                g = g * vals[other]
        out[..., axis] = g
    return out


def eval_template_grad(spec: TemplateSpec, x) -> np.ndarray:
    v = np.atleast_1d(np.asarray(x, dtype=np.float64)).reshape(1, -1)
    return eval_template_grad_many(spec, v)[0]


def eval_value_grad_axes(spec: TemplateSpec, axes: list):
    """Values and per-axis gradients in one pass (shared factor work).

    Returns (value, [dpsi/dx_axis per axis]); dtype may stay real for
    purely real templates.  Training hot path.
    """
    factors = _axis_factors(spec)
    vals = [_factor_values(k, s, axes[i])
            for i, (k, s) in enumerate(factors)]
    grads = [_factor_grads(k, s, axes[i], vals[i])
             for i, (k, s) in enumerate(factors)]
    if spec.d_in == 1:
        return vals[0], grads
    return vals[0] * vals[1], [grads[0] * vals[1], vals[0] * grads[1]]


def eval_template_value_and_grad_many(spec: TemplateSpec, v: np.ndarray):
    """Values and coordinate gradients in one pass; grad shape (..., d_in)."""
    axes = _axis_views(spec, v)
    value, grads = eval_value_grad_axes(spec, axes)
    grad = np.empty(axes[0].shape + (spec.d_in,), dtype=np.complex128)
    for i in range(spec.d_in):
        grad[..., i] = grads[i]
    return np.asarray(value, dtype=np.complex128), grad


def in_support(spec: TemplateSpec, v: np.ndarray) -> np.ndarray:
    """Whether points lie in supp(psi).  True everywhere except for bumps."""
    v = np.atleast_2d(np.asarray(v, dtype=np.float64))
    if spec.kind == "bump":
        return np.all(np.abs(v) < spec.radius, axis=-1)
    return np.ones(v.shape[:-1], dtype=bool)


@dataclass(frozen=True)
class FourierSupportDesc:
    """Frequency support of psi-hat: exact set kind plus an effective box.

    kind: 'interval' (exact 1D support), 'box' (exact per-axis product),
    'everything' (unbounded support with rapid decay).  effective_box holds
    per-axis (lo, hi) bounds containing >= 99.9% of the |psi-hat|^2 energy.
    """

    kind: str
    effective_box: tuple = field(default_factory=tuple)
    exact: bool = False


def _bump_half_width() -> float:
    """99.9% energy half-width of the unit bump's spectrum (cached)."""
    if "bump_hw" not in _meyer_cache:
        n = 4096
        grid = Grid1D(n, -4.0, 4.0)
        vals = _bump_values(grid.points(), 1.0)
        spec = np.abs(fft_1d(vals)) ** 2
        freqs = grid.freqs()
        order = np.argsort(np.abs(freqs), kind="stable")
        cum = np.cumsum(spec[order])
        idx = np.searchsorted(cum, 0.999 * cum[-1])
        _meyer_cache["bump_hw"] = float(np.abs(freqs[order][min(idx, n - 1)]))
    return _meyer_cache["bump_hw"]


def fourier_support(spec: TemplateSpec) -> FourierSupportDesc:
    """Fourier support description of a template under the cyclic convention."""
    def gauss_hw(sigma):
        return _Z999 / (2.0 * np.sqrt(2.0) * np.pi * sigma)

    if spec.kind == "gaussian":
        c = gauss_hw(spec.sigma)
        box = tuple((-c, c) for _ in range(spec.d_in))
        return FourierSupportDesc("everything", box)
    if spec.kind == "gabor":
        c = gauss_hw(spec.sigma)
        band = (spec.omega - c, spec.omega + c)
        if spec.d_in == 1:
            return FourierSupportDesc("everything", (band,))
        return FourierSupportDesc("everything", ((-c, c), band))
    if spec.kind == "sinusoid":
        point = (spec.omega, spec.omega)
        if spec.d_in == 1:
            return FourierSupportDesc("interval", (point,), exact=True)
        return FourierSupportDesc("box", ((0.0, 0.0), point), exact=True)
    if spec.kind == "meyer":
        band = (MEYER_LO, MEYER_HI)
        if spec.d_in == 1:
            return FourierSupportDesc("interval", (band,), exact=True)
        c = gauss_hw(spec.env_sigma)
        return FourierSupportDesc("box", ((-c, c), band))
    # bump
    c = _bump_half_width() / spec.radius
    box = tuple((-c, c) for _ in range(spec.d_in))
    return FourierSupportDesc("everything", box)


def template_spectrum(spec: TemplateSpec, grid):
    """Sampled spectrum of a template on a grid (SpectrumReport).

    Raises AliasingError when the grid's Nyquist frequency does not cover
    the template's effective support, reporting the minimum adequate n.
    """
    from .spectral import measure_spectrum

    desc = fourier_support(spec)
    if isinstance(grid, Grid1D):
        axes = [grid]
    elif isinstance(grid, Grid2D):
        axes = [grid.xaxis, grid.yaxis]
    else:
        raise TypeError("grid must be Grid1D or Grid2D")
    for axis, (lo, hi) in zip(axes, desc.effective_box):
        need = max(abs(lo), abs(hi))
        if axis.nyquist < need:
            n_min = 1
            while n_min / (2.0 * axis.length) < need:
                n_min *= 2
            raise AliasingError(
                f"grid with n={axis.n} over length {axis.length:g} cannot "
                f"resolve frequencies up to {need:.4g}; need n >= {n_min}"
            )
    if isinstance(grid, Grid1D):
        values = eval_template_many(spec, grid.points()[:, None])
    else:
        values = eval_template_many(spec, grid.points()).reshape(
            grid.ny, grid.nx)
    return measure_spectrum(values, grid)
