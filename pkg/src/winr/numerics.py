"""Complex numerics shared by every other module.

FFTs are restricted to power-of-two lengths (all grids in this package are
dyadic) and follow the unnormalized-forward / 1/n-inverse convention of the
plain DFT.  The frequency axis is cyclic: bin ``k`` of an ``n``-point
transform over a domain of length ``T`` sits at ``k/T`` for ``k < n/2`` and
``(k - n)/T`` otherwise.  Every spectral check in the package uses this
mapping.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg


class SizeError(ValueError):
    """Sequence length does not satisfy the power-of-two contract."""


class SingularMatrixError(ValueError):
    """Design matrix is rank deficient at the working tolerance."""


def _check_pow2(n: int) -> None:
    if n < 1 or (n & (n - 1)) != 0:
        raise SizeError(f"length {n} is not a power of two")


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid of ``n`` samples over ``[lo, hi)``; ``n`` a power of two."""

    n: int
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if self.n < 2 or (self.n & (self.n - 1)) != 0:
            raise SizeError(f"grid size {self.n} is not a power of two >= 2")
        if not self.hi > self.lo:
            raise ValueError("empty domain")

    @property
    def length(self) -> float:
        return self.hi - self.lo

    @property
    def spacing(self) -> float:
        return self.length / self.n

    def points(self) -> np.ndarray:
        return self.lo + self.spacing * np.arange(self.n)

    def freqs(self) -> np.ndarray:
        """Cyclic frequencies in fftfreq order: k/T, then (k-n)/T."""
        return np.fft.fftfreq(self.n, d=self.spacing)

    @property
    def nyquist(self) -> float:
        return self.n / (2.0 * self.length)


@dataclass(frozen=True)
class Grid2D:
    """Tensor grid: ``nx`` by ``ny`` samples over ``[xlo,xhi) x [ylo,yhi)``.

    Raster order is C order of ``(ny, nx)`` arrays, x varying fastest.
    """

    nx: int
    ny: int
    xlo: float = 0.0
    xhi: float = 1.0
    ylo: float = 0.0
    yhi: float = 1.0

    def __post_init__(self):
        for n in (self.nx, self.ny):
            if n < 2 or (n & (n - 1)) != 0:
                raise SizeError(f"grid size {n} is not a power of two >= 2")
        if not (self.xhi > self.xlo and self.yhi > self.ylo):
            raise ValueError("empty domain")

    @property
    def xaxis(self) -> Grid1D:
        return Grid1D(self.nx, self.xlo, self.xhi)

    @property
    def yaxis(self) -> Grid1D:
        return Grid1D(self.ny, self.ylo, self.yhi)

    def points(self) -> np.ndarray:
        """(ny*nx, 2) array of (x, y) sample coordinates in raster order."""
        xs = self.xaxis.points()
        ys = self.yaxis.points()
        xx, yy = np.meshgrid(xs, ys)
        return np.column_stack([xx.ravel(), yy.ravel()])


def fft_1d(values, inverse: bool = False) -> np.ndarray:
    """Unnormalized forward DFT (inverse divides by n); power-of-two only.

    Backed by numpy's FFT, which matches this normalization exactly.
    """
    x = np.asarray(values, dtype=np.complex128)
    _check_pow2(x.shape[-1])
    return np.fft.ifft(x) if inverse else np.fft.fft(x)


def fft_2d(values, inverse: bool = False) -> np.ndarray:
    """Row-column application of fft_1d; both dimensions powers of two."""
    x = np.asarray(values, dtype=np.complex128)
    if x.ndim != 2:
        raise ValueError("fft_2d expects a 2D array")
    _check_pow2(x.shape[0])
    _check_pow2(x.shape[1])
    return np.fft.ifft2(x) if inverse else np.fft.fft2(x)


def hilbert_transform(values) -> np.ndarray:
    """Analytic signal ``x + i*H(x)`` of a real sequence.

    Negative-frequency bins are zeroed, positive bins doubled; DC and the
    Nyquist bin keep unit gain, so the output's spectrum is supported on
    non-negative frequencies only.
    """
    x = np.asarray(values, dtype=np.float64)
    n = x.shape[-1]
    _check_pow2(n)
    spec = np.fft.fft(x)
    gain = np.zeros(n)
    gain[0] = 1.0
    gain[n // 2] = 1.0
    gain[1:n // 2] = 2.0
    return np.fft.ifft(spec * gain)


def lstsq(design, targets) -> np.ndarray:
    """Least-squares solve of ``design @ c ~= targets`` via Householder QR.

    Requires rows >= cols and full column rank; a rank-deficient design
    raises SingularMatrixError naming the offending column.  The normal
    equations are deliberately not used here (they are the test oracle).
    """
    a = np.asarray(design, dtype=np.complex128)
    y = np.asarray(targets, dtype=np.complex128)
    if a.ndim != 2:
        raise ValueError("design must be a matrix")
    m, n = a.shape
    if m < n:
        raise ValueError(f"underdetermined system: {m} rows < {n} cols")
    q, r = np.linalg.qr(a, mode="reduced")
    diag = np.abs(np.diag(r))
    tol = max(m, n) * np.finfo(np.float64).eps * (diag.max() if n else 0.0)
    bad = np.nonzero(diag <= tol)[0]
    if bad.size:
        raise SingularMatrixError(
            f"design matrix is rank deficient: column {int(bad[0])} "
            f"(|R[{int(bad[0])},{int(bad[0])}]| = {diag[bad[0]]:.3e})"
        )
    return scipy.linalg.solve_triangular(r, q.conj().T @ y)
