"""Grids, complex fields, and spectral primitives.

Uniform periodic grids with power-of-two point counts; all derivative
and momentum-space work goes through the FFT.  Fields are treated as
immutable values: every operation returns a new field and never touches
its input arrays.

Unit conventions (SI): grid lengths in metres, wavenumbers in 1/m,
momenta in kg·m/s.  The momentum-space transform uses the symmetric
continuum normalization f(k) = (2π)^{-1/2} ∫ ψ(x) e^{-ikx} dx so that
Parseval holds with the dk = 2π/L measure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import hbar

Array = np.ndarray


def _check_power_of_two(n: int) -> bool:
    return n >= 64 and (n & (n - 1)) == 0


# positions()/wavenumbers() land in per-step inner loops, so the arrays are
# memoized per (n, length) and handed out read-only
_axis_cache: dict = {}


def _cached_axis(kind: str, n: int, length: float) -> Array:
    key = (kind, n, length)
    out = _axis_cache.get(key)
    if out is None:
        if kind == "x":
            out = np.arange(n) * (length / n)
        else:
            out = 2.0 * np.pi * np.fft.fftfreq(n, d=length / n)
        out.flags.writeable = False
        if len(_axis_cache) > 64:
            _axis_cache.clear()
        _axis_cache[key] = out
    return out


@dataclass(frozen=True)
class Grid1D:
    """Uniform periodic 1D grid on [0, length_m)."""

    length_m: float
    n: int

    def __post_init__(self):
        if self.length_m <= 0.0:
            raise ValueError("grid length must be positive")
        if not _check_power_of_two(self.n):
            raise ValueError("grid point count must be a power of two >= 64")

    @property
    def dx(self) -> float:
        return self.length_m / self.n

    @property
    def dk(self) -> float:
        return 2.0 * np.pi / self.length_m

    def positions(self) -> Array:
        return _cached_axis("x", self.n, self.length_m)

    def wavenumbers(self) -> Array:
        """Angular wavenumbers in FFT layout, [-π/dx, π/dx)."""
        return _cached_axis("k", self.n, self.length_m)

    def round_wavenumber(self, q: float) -> float:
        """Snap q to the nearest grid-representable wavenumber m·2π/L."""
        return self.dk * np.rint(q / self.dk)


@dataclass(frozen=True)
class Grid2D:
    """Uniform periodic 2D grid; axis sizes may differ but each is a power of two."""

    lengths_m: tuple[float, float]
    shape: tuple[int, int]

    def __post_init__(self):
        if any(L <= 0.0 for L in self.lengths_m):
            raise ValueError("grid lengths must be positive")
        if any(not _check_power_of_two(n) for n in self.shape):
            raise ValueError("grid point counts must be powers of two >= 64")

    @property
    def dx(self) -> tuple[float, float]:
        return (self.lengths_m[0] / self.shape[0], self.lengths_m[1] / self.shape[1])

    @property
    def cell_area(self) -> float:
        d = self.dx
        return d[0] * d[1]

    def positions(self) -> tuple[Array, Array]:
        """Meshgrid coordinate arrays (indexing='ij')."""
        x = np.arange(self.shape[0]) * self.dx[0]
        y = np.arange(self.shape[1]) * self.dx[1]
        return np.meshgrid(x, y, indexing="ij")

    def wavenumbers(self) -> tuple[Array, Array]:
        kx = 2.0 * np.pi * np.fft.fftfreq(self.shape[0], d=self.dx[0])
        ky = 2.0 * np.pi * np.fft.fftfreq(self.shape[1], d=self.dx[1])
        return np.meshgrid(kx, ky, indexing="ij")

    def round_wavevector(self, q: tuple[float, float]) -> tuple[float, float]:
        dk = (2.0 * np.pi / self.lengths_m[0], 2.0 * np.pi / self.lengths_m[1])
        return (dk[0] * np.rint(q[0] / dk[0]), dk[1] * np.rint(q[1] / dk[1]))


@dataclass(frozen=True)
class ComplexField1D:
    """Complex scalar field sampled on a Grid1D."""

    grid: Grid1D
    values: Array

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.complex128)
        if v.shape != (self.grid.n,):
            raise ValueError("field values must match the grid point count")
        if not np.all(np.isfinite(v.view(np.float64))):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", v)


def _wrap_field_1d(grid: Grid1D, values: Array) -> ComplexField1D:
    """Constructor bypass for hot loops whose arrays were validated in batch."""
    f = object.__new__(ComplexField1D)
    object.__setattr__(f, "grid", grid)
    object.__setattr__(f, "values", values)
    return f


@dataclass(frozen=True)
class Bispinor2D:
    """Two-component complex field (upper, lower) on a Grid2D."""

    grid: Grid2D
    upper: Array
    lower: Array

    def __post_init__(self):
        for name in ("upper", "lower"):
            v = np.asarray(getattr(self, name), dtype=np.complex128)
            if v.shape != self.grid.shape:
                raise ValueError(f"{name} component must match the grid shape")
            if not np.all(np.isfinite(v.view(np.float64))):
                raise ValueError(f"{name} component must be finite")
            object.__setattr__(self, name, v)


# ----- norms and observables -----


def l2_norm(field) -> float:
    """sqrt(∫|ψ|²) by the trapezoid-free uniform-grid quadrature (sum·cell)."""
    if isinstance(field, Bispinor2D):
        dens = np.abs(field.upper) ** 2 + np.abs(field.lower) ** 2
        return float(np.sqrt(dens.sum() * field.grid.cell_area))
    return float(np.sqrt((np.abs(field.values) ** 2).sum() * field.grid.dx))


def density(field) -> Array:
    if isinstance(field, Bispinor2D):
        return np.abs(field.upper) ** 2 + np.abs(field.lower) ** 2
    return np.abs(field.values) ** 2


def expectation_momentum(field: ComplexField1D) -> float:
    """⟨p⟩ = Σ ħk |f_k|² / Σ |f_k|² over the FFT spectrum (per-mode weights
    cancel, so the raw FFT coefficients suffice)."""
    spec = np.fft.fft(field.values)
    w = np.abs(spec) ** 2
    total = w.sum()
    if total == 0.0:
        raise ValueError("cannot take momentum expectation of a null field")
    k = field.grid.wavenumbers()
    return float(hbar * (k * w).sum() / total)


def expectation_wavevector_2d(field: Bispinor2D) -> tuple[float, float]:
    """Spectral ⟨k⟩ of a bispinor, summed over both components."""
    su = np.fft.fft2(field.upper)
    sl = np.fft.fft2(field.lower)
    w = np.abs(su) ** 2 + np.abs(sl) ** 2
    total = w.sum()
    if total == 0.0:
        raise ValueError("cannot take momentum expectation of a null field")
    kx, ky = field.grid.wavenumbers()
    return (float((kx * w).sum() / total), float((ky * w).sum() / total))


def current_density(field: ComplexField1D, mass: float) -> Array:
    """Probability current J = (ħ/m) Im(ψ* ∂ψ/∂x), spectral derivative."""
    k = field.grid.wavenumbers()
    dpsi = np.fft.ifft(1j * k * np.fft.fft(field.values))
    return (hbar / mass) * np.imag(np.conj(field.values) * dpsi)


# ----- momentum space -----


def to_momentum_space(field: ComplexField1D) -> Array:
    """Continuum-normalized spectrum on grid.wavenumbers(); Parseval holds
    as Σ|f|² dk = Σ|ψ|² dx."""
    return np.fft.fft(field.values) * field.grid.dx / np.sqrt(2.0 * np.pi)


def from_momentum_space(grid: Grid1D, spectrum: Array) -> ComplexField1D:
    values = np.fft.ifft(np.asarray(spectrum) * np.sqrt(2.0 * np.pi) / grid.dx)
    return ComplexField1D(grid, values)


# ----- packet builders -----


def gaussian_packet(grid: Grid1D, center: float, sigma: float, k0: float) -> ComplexField1D:
    """Unit-norm Gaussian wave packet exp(-(x-c)²/(4σ²) + ik0 x).

    σ is the position-space standard deviation of |ψ|².  k0 is snapped to
    the grid so the phase is periodic on the box.
    """
    x = grid.positions()
    k0 = grid.round_wavenumber(k0)
    norm = (2.0 * np.pi * sigma**2) ** (-0.25)
    psi = norm * np.exp(-((x - center) ** 2) / (4.0 * sigma**2) + 1j * k0 * x)
    return ComplexField1D(grid, psi)


def gaussian_packet_2d(
    grid: Grid2D, center: tuple[float, float], sigma: float, k0: tuple[float, float]
) -> tuple[Array, Array]:
    """Scalar 2D Gaussian envelope times plane wave; returns (envelope·phase, k0_snapped).

    Spinor structure is attached by the Dirac module, which knows the band.
    """
    X, Y = grid.positions()
    k0s = grid.round_wavevector(k0)
    r2 = (X - center[0]) ** 2 + (Y - center[1]) ** 2
    norm = (2.0 * np.pi * sigma**2) ** (-0.5)
    scalar = norm * np.exp(-r2 / (4.0 * sigma**2) + 1j * (k0s[0] * X + k0s[1] * Y))
    return scalar, np.array(k0s)
