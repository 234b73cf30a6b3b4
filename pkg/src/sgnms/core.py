"""Grids, fields and discrete calculus on a uniform periodic 1-D domain.

Everything downstream (lifting, integrators, diagnostics) is built on the
three primitives here: periodic differentiation, periodic quadrature and a
periodic antiderivative with the mean split off.  Fields are plain float64
numpy arrays of length ``grid.n``; no wrapper class is used.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DryStateError, GridMismatchError

# A field is a bare float64 array whose length must equal grid.n; operations
# validate the shape through Grid1D.check_field rather than a wrapper class.
Field = np.ndarray

DIFF_KINDS = ("fd2", "fd4", "fourier")


@dataclass(frozen=True)
class Grid1D:
    """Uniform periodic grid with points x_j = j*L/n, j = 0..n-1."""

    length: float
    n: int

    def __post_init__(self):
        if not self.length > 0:
            raise ValueError(f"domain length must be positive, got {self.length}")
        if self.n < 8:
            raise ValueError(f"need at least 8 grid points, got {self.n}")

    @property
    def dx(self) -> float:
        return self.length / self.n

    @property
    def n_is_odd(self) -> bool:
        # Even n makes the two-point averaging stencil of the box scheme
        # singular (checkerboard mode); flagged so runs can warn up front.
        return self.n % 2 == 1

    @cached_property
    def x(self) -> np.ndarray:
        return self.dx * np.arange(self.n)

    def check_field(self, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if f.shape != (self.n,):
            raise GridMismatchError(
                f"field of shape {f.shape} does not fit grid with n={self.n}"
            )
        return f


@dataclass(frozen=True)
class Params:
    """Physical constants (only gravity enters the equations)."""

    g: float = 1.0

    def __post_init__(self):
        if not self.g > 0:
            raise ValueError(f"gravity must be positive, got {self.g}")


@dataclass(frozen=True)
class PhysicalState:
    """Depth and depth-averaged velocity at one instant."""

    grid: Grid1D
    h: np.ndarray
    u: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "h", self.grid.check_field(self.h))
        object.__setattr__(self, "u", self.grid.check_field(self.u))
        if self.h.min() <= 0:
            raise DryStateError(f"min depth {self.h.min():.3e} is not positive")


class DiffOperator:
    """Periodic differentiation of one of three kinds: fd2, fd4, fourier.

    fd2/fd4 are central stencils with exact periodic wrap-around; fourier is
    exact spectral differentiation (Nyquist mode of even-n grids is dropped,
    which keeps the operator real and skew-symmetric).
    """

    def __init__(self, grid: Grid1D, kind: str = "fourier"):
        if kind not in DIFF_KINDS:
            raise ValueError(f"unknown derivative kind {kind!r}, expected one of {DIFF_KINDS}")
        self.grid = grid
        self.kind = kind
        if kind == "fourier":
            k = 2.0 * np.pi * np.fft.rfftfreq(grid.n, d=grid.dx)
            ik = 1j * k
            if grid.n % 2 == 0:
                ik[-1] = 0.0
            self._ik = ik

    def __call__(self, f: np.ndarray) -> np.ndarray:
        f = self.grid.check_field(f)
        dx = self.grid.dx
        if self.kind == "fd2":
            return (np.roll(f, -1) - np.roll(f, 1)) / (2.0 * dx)
        if self.kind == "fd4":
            # grouped differences so a constant field maps to exact zero
            return (
                8.0 * (np.roll(f, -1) - np.roll(f, 1)) - (np.roll(f, -2) - np.roll(f, 2))
            ) / (12.0 * dx)
        return np.fft.irfft(self._ik * np.fft.rfft(f), n=self.grid.n)

    def rows(self, fs: np.ndarray) -> np.ndarray:
        """Apply the derivative to each row of an (m, n) stack of fields."""
        fs = np.asarray(fs, dtype=float)
        if fs.ndim != 2 or fs.shape[1] != self.grid.n:
            raise GridMismatchError(f"row stack of shape {fs.shape} does not fit n={self.grid.n}")
        dx = self.grid.dx
        if self.kind == "fd2":
            return (np.roll(fs, -1, axis=1) - np.roll(fs, 1, axis=1)) / (2.0 * dx)
        if self.kind == "fd4":
            return (
                8.0 * (np.roll(fs, -1, axis=1) - np.roll(fs, 1, axis=1))
                - (np.roll(fs, -2, axis=1) - np.roll(fs, 2, axis=1))
            ) / (12.0 * dx)
        return np.fft.irfft(self._ik[None, :] * np.fft.rfft(fs, axis=1), n=self.grid.n, axis=1)

    def matrix(self) -> np.ndarray:
        """Dense matrix of the operator; used by implicit spectral solvers."""
        n = self.grid.n
        out = np.empty((n, n))
        eye = np.eye(n)
        for j in range(n):
            out[:, j] = self(eye[:, j])
        return out

    def antiderivative_split(self, f: np.ndarray) -> tuple[float, np.ndarray]:
        """Split f into mean c plus the derivative of a mean-free periodic F.

        Returns (c, F) with derivative(F) + c ~ f.  The antiderivative is
        always taken spectrally; for fd kinds the round trip therefore holds
        to the stencil's truncation order rather than machine precision.
        """
        f = self.grid.check_field(f)
        c = float(f.mean())
        spec = np.fft.rfft(f - c)
        k = 2.0 * np.pi * np.fft.rfftfreq(self.grid.n, d=self.grid.dx)
        inv = np.zeros_like(spec)
        inv[1:] = spec[1:] / (1j * k[1:])
        if self.grid.n % 2 == 0:
            inv[-1] = 0.0
        F = np.fft.irfft(inv, n=self.grid.n)
        return c, F - F.mean()


def derivative(f: np.ndarray, op: DiffOperator) -> np.ndarray:
    return op(f)


def integrate(grid: Grid1D, f: np.ndarray) -> float:
    """Periodic trapezoid rule: dx * sum(f); spectrally accurate for smooth f."""
    return float(grid.dx * grid.check_field(f).sum())


def antiderivative_split(f: np.ndarray, op: DiffOperator) -> tuple[float, np.ndarray]:
    return op.antiderivative_split(f)


def resample(f: np.ndarray, grid_from: Grid1D, n_to: int) -> np.ndarray:
    """Trigonometric resampling of a periodic field onto an n_to-point grid."""
    grid_from.check_field(f)
    spec = np.fft.rfft(f) / grid_from.n
    m_to = n_to // 2 + 1
    out = np.zeros(m_to, dtype=complex)
    m = min(len(spec), m_to)
    out[:m] = spec[:m]
    if grid_from.n % 2 == 0 and m_to > len(spec):
        out[len(spec) - 1] *= 0.5  # unfold the source Nyquist mode into +/- pair
    return np.fft.irfft(out * n_to, n=n_to)


def shift_periodic(f: np.ndarray, grid: Grid1D, delta: float) -> np.ndarray:
    """Exact spectral translation: returns g with g(x) = f(x - delta)."""
    grid.check_field(f)
    k = 2.0 * np.pi * np.fft.rfftfreq(grid.n, d=grid.dx)
    return np.fft.irfft(np.fft.rfft(f) * np.exp(-1j * k * delta), n=grid.n)
