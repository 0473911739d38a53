"""
Anisotropic tensor grid and Fourier pseudo-spectral operators.

The computational box is ``prod_a [-L xi_a, L xi_a)`` sampled with ``N_a``
points per axis (``N_a`` even).  Grid functions are plain ``numpy`` arrays of
shape ``(Nx, Ny, Nz)``; spectral coefficients are stored in standard FFT order
(``0 .. N/2-1, -N/2 .. -1``) together with the matching frequency tables.

Normalisation follows the usual pseudo-spectral convention::

    fhat_k = (1/N) sum_j f_j exp(-i nu_k (x_j + L xi))      (forward)
    f_j    = sum_k fhat_k exp(+i nu_k (x_j + L xi))          (inverse)

with ``nu_k = pi k / (L xi)``.  Since ``x_j + L xi = j h`` the phase factor is
exactly the DFT kernel, so both maps reduce to ``fftn / N`` and ``ifftn * N``.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _fft

__all__ = [
    "Grid",
    "build_grid",
    "forward_transform",
    "inverse_transform",
    "laplacian",
    "gradient_component",
    "angular_momentum_z",
    "inner_product",
    "norm",
]

_AXES = {"x": 0, "y": 1, "z": 2, 0: 0, 1: 1, 2: 2}


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform grid on the anisotropic box ``D_{L xi}``.

    Parameters
    ----------
    L : float
        Half-width of the longest side.
    xi : tuple of float
        Anisotropy vector, components in ``(0, 1]`` with maximum exactly 1.
    N : tuple of int
        Even point counts per axis (each at least 4).
    """

    L: float
    xi: tuple
    N: tuple

    def __post_init__(self):
        L = float(self.L)
        xi = tuple(float(v) for v in np.ravel(self.xi))
        N = tuple(int(v) for v in np.ravel(self.N))
        if len(xi) != 3 or len(N) != 3:
            raise ValueError("xi and N must have three components")
        if not np.isfinite(L) or L <= 0:
            raise ValueError(f"L must be positive, got {self.L!r}")
        if any(not (0.0 < v <= 1.0) for v in xi):
            raise ValueError(f"xi components must lie in (0, 1], got {xi}")
        if abs(max(xi) - 1.0) > 1e-12:
            raise ValueError(f"max(xi) must equal 1, got {max(xi)}")
        for n, raw in zip(N, np.ravel(self.N)):
            if n != raw or n % 2 or n < 4:
                raise ValueError(f"grid counts must be even integers >= 4, got {tuple(self.N)}")
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "N", N)

    # ------------------------------------------------------------------ geometry

    @property
    def shape(self):
        return self.N

    @property
    def size(self):
        return self.N[0] * self.N[1] * self.N[2]

    @property
    def half_widths(self):
        return tuple(self.L * v for v in self.xi)

    @property
    def h(self):
        return tuple(2.0 * self.L * v / n for v, n in zip(self.xi, self.N))

    @property
    def cell_volume(self):
        hx, hy, hz = self.h
        return hx * hy * hz

    @property
    def anisotropy_strength(self):
        return 1.0 / (self.xi[0] * self.xi[1] * self.xi[2])

    @cached_property
    def axes(self):
        """1D coordinate arrays ``x_j = -L xi + j h`` per axis."""
        return tuple(-b + h * np.arange(n) for b, h, n in zip(self.half_widths, self.h, self.N))

    @cached_property
    def coords(self):
        """Broadcastable coordinate arrays ``(X, Y, Z)``."""
        x, y, z = self.axes
        return x[:, None, None], y[None, :, None], z[None, None, :]

    @cached_property
    def r2(self):
        X, Y, Z = self.coords
        return X * X + Y * Y + Z * Z

    # ---------------------------------------------------------------- frequencies

    @cached_property
    def wavenumbers(self):
        """Integer Fourier indices ``k`` per axis in FFT order."""
        return tuple(np.fft.fftfreq(n, 1.0 / n).astype(int) for n in self.N)

    @cached_property
    def frequencies(self):
        """1D frequency tables ``nu_k = pi k / (L xi)`` per axis in FFT order."""
        return tuple(np.pi * k / b for k, b in zip(self.wavenumbers, self.half_widths))

    @cached_property
    def nu(self):
        nx, ny, nz = self.frequencies
        return nx[:, None, None], ny[None, :, None], nz[None, None, :]

    @cached_property
    def nu2(self):
        """``|nu_k|^2`` on the full spectral array."""
        nx, ny, nz = self.nu
        return nx * nx + ny * ny + nz * nz

    def same_as(self, other):
        return (
            isinstance(other, Grid)
            and self.N == other.N
            and self.L == other.L
            and self.xi == other.xi
        )

    def check(self, f, name="field"):
        if np.shape(f) != self.N:
            raise ValueError(f"{name} has shape {np.shape(f)}, grid expects {self.N}")

    # ---------------------------------------------------------------- operators

    def fft(self, f):
        self.check(f)
        return _fft.fftn(f) / self.size

    def ifft(self, c):
        self.check(c, "coefficients")
        return _fft.ifftn(c) * self.size

    def laplacian(self, f):
        return _fft.ifftn(-self.nu2 * _fft.fftn(np.asarray(f, dtype=complex)))

    def gradient(self, f, axis):
        a = _AXES[axis]
        mult = 1j * self.nu[a]
        return _fft.ifftn(mult * _fft.fftn(np.asarray(f, dtype=complex)))

    def lz(self, f):
        """``-i (x d_y f - y d_x f)`` with spectral derivatives."""
        fh = _fft.fftn(np.asarray(f, dtype=complex))
        dx = _fft.ifftn(1j * self.nu[0] * fh)
        dy = _fft.ifftn(1j * self.nu[1] * fh)
        X, Y, _ = self.coords
        return -1j * (X * dy - Y * dx)

    def inner(self, u, v):
        """Real inner product ``Re(h^3 sum u conj(v))``."""
        return self.cell_volume * float(np.vdot(v, u).real)

    def norm(self, u):
        return np.sqrt(self.cell_volume * float(np.vdot(u, u).real))

    def normalize(self, u):
        return u / self.norm(u)


def build_grid(L, xi, N):
    """Validate and construct a :class:`Grid`."""
    return Grid(L, tuple(np.ravel(xi)), tuple(np.ravel(N)))


def forward_transform(f, grid):
    """Discrete Fourier coefficients of a physical-space grid function."""
    return grid.fft(f)


def inverse_transform(c, grid):
    """Physical-space values of the Fourier series with coefficients ``c``."""
    return grid.ifft(c)


def laplacian(f, grid):
    grid.check(f)
    return grid.laplacian(f)


def gradient_component(f, grid, axis):
    grid.check(f)
    return grid.gradient(f, axis)


def angular_momentum_z(f, grid):
    grid.check(f)
    return grid.lz(f)


def inner_product(u, v, grid):
    grid.check(u, "u")
    grid.check(v, "v")
    return grid.inner(u, v)


def norm(u, grid):
    grid.check(u)
    return grid.norm(u)
