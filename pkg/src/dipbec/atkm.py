"""
Free-space Coulomb and dipolar potentials by the anisotropic truncated kernel method.

A density supported in ``D_{L xi}`` is zero-padded onto the twofold box
``D_{2L xi}`` (same mesh, ``2N`` points per axis).  Its potential is the
Fourier multiplier ``Uhat_k`` applied on that box, where ``Uhat_k`` is the
Fourier integral of the Coulomb kernel truncated to ``D_{2L xi}``.  Because
the box grows with the density's own anisotropy, the coefficient table always
holds exactly ``8 Nx Ny Nz`` numbers.

The kernel integral is split as

    1/(4 pi r) = erf(a r)/(4 pi r) + erfc(a r)/(4 pi r).

The smooth first piece is written as a sum of Gaussians, whose box Fourier
integrals factor into closed-form 1D integrals.  The second piece decays like
``exp(-a^2 r^2)`` and is negligible at the box faces, so its Fourier integral is
the whole-space transform ``(1 - exp(-k^2/4a^2)) / k^2``.
"""

import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import erf, erfcinv, roots_legendre, wofz

from . import _fft

log = logging.getLogger(__name__)

__all__ = [
    "SOGError",
    "SumOfGaussians",
    "build_sog",
    "gaussian_box_integral",
    "KernelTable",
    "precompute_kernel_coefficients",
    "coulomb_potential",
    "dipolar_potential",
    "unit_orientation",
    "save_kernel_table",
    "load_kernel_table",
]

_FOUR_PI = 4.0 * np.pi
_SOG_PREFACTOR = 1.0 / (2.0 * np.pi**1.5)


class SOGError(RuntimeError):
    """The requested sum-of-Gaussians accuracy could not be reached."""


@dataclass(frozen=True)
class SumOfGaussians:
    """``1/(4 pi r) ~ sum_l w_l exp(-(t_l r)^2)`` on ``[delta, r_max]``.

    ``exponents`` holds the inverse widths ``t_l``; ``widths`` gives
    ``s_l = 1/t_l`` for the ``exp(-r^2/s_l^2)`` form.  For ``r < delta`` the sum
    reproduces ``erf(t_max r)/(4 pi r)`` instead of the singular kernel.
    """

    weights: np.ndarray
    exponents: np.ndarray
    delta: float
    r_max: float
    eps: float
    t_max: float
    max_rel_error: float

    def __len__(self):
        return len(self.weights)

    @property
    def widths(self):
        return 1.0 / self.exponents

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        flat = r.reshape(-1, 1)
        out = np.exp(-((flat * self.exponents) ** 2)) @ self.weights
        return out.reshape(r.shape)


def _panel_nodes(a, b, width, order):
    x, w = roots_legendre(order)
    n = max(1, int(np.ceil((b - a) / width)))
    edges = np.linspace(a, b, n + 1)
    centre = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = (centre[:, None] + half[:, None] * x).ravel()
    weights = (half[:, None] * w).ravel()
    return nodes, weights


def _sog_terms(delta, r_max, eps, order):
    # 1/(4 pi r) = (2 pi^1.5)^-1 int exp(u - r^2 e^{2u}) du over the real line
    t_max = float(erfcinv(1e-2 * eps)) / delta
    t_min = 1e-3 * eps / r_max
    u_max = np.log(t_max)
    u_mid = min(-np.log(r_max) - 3.0, u_max - 1.0)
    u_min = min(np.log(t_min), u_mid - 1.0)
    lo_u, lo_w = _panel_nodes(u_min, u_mid, 6.0, 16)
    hi_u, hi_w = _panel_nodes(u_mid, u_max, 1.0, order)
    u = np.concatenate([lo_u, hi_u])
    wu = np.concatenate([lo_w, hi_w])
    t = np.exp(u)
    return _SOG_PREFACTOR * wu * t, t, t_max


def build_sog(delta, r_max, eps=1e-12, max_terms=2000):
    """Sum-of-Gaussians approximation of the Coulomb kernel.

    The log-substituted integral representation of ``1/r`` is discretised by
    composite Gauss-Legendre panels; the panel order is raised until the
    relative error, measured at ``10^4`` log-spaced radii in ``[delta, r_max]``,
    is at most ``eps``.
    """
    delta = float(delta)
    r_max = float(r_max)
    eps = float(eps)
    if not (0.0 < delta < r_max):
        raise ValueError(f"need 0 < delta < r_max, got delta={delta}, r_max={r_max}")
    if not (1e-15 < eps < 1e-2):
        raise ValueError(f"eps must lie in (1e-15, 1e-2), got {eps}")

    r = np.geomspace(delta, r_max, 10_000)
    exact = 1.0 / (_FOUR_PI * r)
    for order in range(8, 33, 2):
        w, t, t_max = _sog_terms(delta, r_max, eps, order)
        if len(w) > max_terms:
            break
        approx = np.exp(-((r[:, None] * t) ** 2)) @ w
        err = float(np.max(np.abs(approx - exact) / exact))
        if err <= eps:
            keep = w * np.exp(-((delta * t) ** 2)) > 1e-6 * eps / (_FOUR_PI * r_max)
            keep |= t * delta < 1.0
            return SumOfGaussians(w[keep], t[keep], delta, r_max, eps, t_max, err)
    raise SOGError(
        f"cannot reach relative accuracy {eps:g} on [{delta:g}, {r_max:g}] "
        f"within {max_terms} terms"
    )


def gaussian_box_integral(t, nu, b):
    """``int_{-b}^{b} exp(-t^2 y^2) cos(nu y) dy`` in closed form.

    Uses the Faddeeva function so that neither ``exp(-nu^2/4t^2)`` nor the
    complex error function is ever formed on its own.
    """
    t, nu = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(nu, dtype=float))
    a = nu / (2.0 * t)
    tb = t * b
    z = -a + 1j * tb
    val = np.exp(-a * a) - np.real(np.exp(-tb * tb - 1j * nu * b) * wofz(z))
    out = np.sqrt(np.pi) / t * val
    zero = nu == 0
    if np.any(zero):
        out = np.where(zero, np.sqrt(np.pi) / t * erf(tb), out)
    return out


def _twofold_frequencies(grid):
    return tuple(
        np.pi * np.fft.fftfreq(2 * n, 1.0 / (2 * n)) / (2.0 * b)
        for n, b in zip(grid.N, grid.half_widths)
    )


@dataclass(eq=False)
class KernelTable:
    """Fourier coefficients of the truncated Coulomb kernel on ``D_{2L xi}``.

    ``coefficients`` has shape ``2N`` in FFT order.  The kernel is even and
    real on a symmetric box, so the table is stored as real numbers.
    """

    grid: object
    coefficients: np.ndarray
    delta: float
    eps_sog: float
    n_terms: int = 0
    _half: np.ndarray = field(default=None, repr=False)
    _dipolar: dict = field(default_factory=dict, repr=False)
    _warned: bool = field(default=False, repr=False)

    def __post_init__(self):
        expected = tuple(2 * n for n in self.grid.N)
        if self.coefficients.shape != expected:
            raise ValueError(f"coefficient table has shape {self.coefficients.shape}, expected {expected}")
        nz = self.grid.N[2]
        self._half = np.ascontiguousarray(self.coefficients[:, :, : nz + 1])

    @property
    def size(self):
        return self.coefficients.size

    @property
    def nbytes(self):
        return self.coefficients.nbytes

    @property
    def frequencies(self):
        return _twofold_frequencies(self.grid)

    def dipolar_symbol_full(self, n, symmetric=True):
        """Full-spectrum multiplier ``-1 + 3 (n.nu)^2 Uhat`` on the twofold box.

        With ``symmetric`` the symbol is averaged with its image under
        ``k -> -k (mod 2N)``; this only changes the Nyquist planes and is what
        keeping the real part of the potential amounts to.
        """
        n = unit_orientation(n)
        nus = self.frequencies
        nn = sum(c * f.reshape(_axis_shape(a)) for a, (c, f) in enumerate(zip(n, nus)))
        sq = nn * nn
        if symmetric:
            flipped = [f[(-np.arange(f.size)) % f.size] for f in nus]
            mm = sum(c * f.reshape(_axis_shape(a)) for a, (c, f) in enumerate(zip(n, flipped)))
            sq = 0.5 * (sq + mm * mm)
        return -1.0 + 3.0 * sq * self.coefficients

    def dipolar_symbol(self, n):
        """Half-spectrum (``rfftn`` layout) dipolar multiplier for orientation ``n``."""
        key = tuple(unit_orientation(n))
        sym = self._dipolar.get(key)
        if sym is None:
            nz = self.grid.N[2]
            sym = np.ascontiguousarray(self.dipolar_symbol_full(key)[:, :, : nz + 1])
            self._dipolar[key] = sym
        return sym

    def check_density(self, rho):
        self.grid.check(rho, "density")
        if self._warned:
            return
        peak = float(np.max(np.abs(rho)))
        if peak == 0.0:
            return
        faces = max(
            float(np.max(np.abs(rho[[0, -1], :, :]))),
            float(np.max(np.abs(rho[:, [0, -1], :]))),
            float(np.max(np.abs(rho[:, :, [0, -1]]))),
        )
        if faces > 1e-10 * peak:
            log.warning(
                "density does not decay at the box boundary (face/peak = %.2e); "
                "the truncated-kernel potential assumes compact support",
                faces / peak,
            )
            self._warned = True

    def convolve(self, rho, symbol):
        """Apply a half-spectrum multiplier to ``rho`` on the twofold box."""
        nx, ny, nz = self.grid.N
        shape = (2 * nx, 2 * ny, 2 * nz)
        pad = np.zeros(shape)
        pad[nx // 2 : nx // 2 + nx, ny // 2 : ny // 2 + ny, nz // 2 : nz // 2 + nz] = rho
        spec = _fft.rfftn(pad)
        spec *= symbol
        out = _fft.irfftn(spec, shape)
        return out[nx // 2 : nx // 2 + nx, ny // 2 : ny // 2 + ny, nz // 2 : nz // 2 + nz].copy()

    def convolve_complex(self, rho, symbol_full):
        """Full complex route; returns the untruncated complex result on ``D_{L xi}``."""
        nx, ny, nz = self.grid.N
        pad = np.zeros((2 * nx, 2 * ny, 2 * nz), dtype=complex)
        pad[nx // 2 : nx // 2 + nx, ny // 2 : ny // 2 + ny, nz // 2 : nz // 2 + nz] = rho
        out = _fft.ifftn(symbol_full * _fft.fftn(pad))
        return out[nx // 2 : nx // 2 + nx, ny // 2 : ny // 2 + ny, nz // 2 : nz // 2 + nz]


def _axis_shape(axis):
    shape = [1, 1, 1]
    shape[axis] = -1
    return tuple(shape)


def default_delta(grid):
    return min(grid.h) / 4.0


def table_radius(grid):
    """Largest ``|y|`` on ``D_{2L xi}``."""
    return 2.0 * float(np.linalg.norm(grid.half_widths))


def precompute_kernel_coefficients(grid, sog=None, *, delta=None, eps_sog=1e-12):
    """Build the :class:`KernelTable` for ``grid``.

    Each Gaussian term contributes a product of three 1D box integrals, so the
    table is assembled as a rank-``len(sog)`` tensor sum; the erfc remainder is
    added in closed form.
    """
    r_need = table_radius(grid)
    if sog is None:
        if delta is None:
            delta = default_delta(grid)
        sog = build_sog(delta, r_need * (1.0 + 1e-9), eps_sog)
    if sog.r_max < r_need * (1.0 - 1e-12):
        raise ValueError(
            f"sum-of-Gaussians validity ends at r={sog.r_max:g} but the twofold box "
            f"reaches r={r_need:g}"
        )
    bmin = 2.0 * min(grid.half_widths)
    if sog.t_max * bmin < 6.0:
        raise ValueError(
            f"delta={sog.delta:g} is too large for the box: the near-field remainder "
            f"does not decay inside D_2L (t_max * b_min = {sog.t_max * bmin:.2f} < 6)"
        )

    fx, fy, fz = _twofold_frequencies(grid)
    bx, by, bz = (2.0 * b for b in grid.half_widths)
    t = sog.exponents[:, None]
    ix = sog.weights[:, None] * gaussian_box_integral(t, fx[None, :], bx)
    iy = gaussian_box_integral(t, fy[None, :], by)
    iz = gaussian_box_integral(t, fz[None, :], bz)

    nx2, ny2, nz2 = len(fx), len(fy), len(fz)
    coeffs = np.empty((nx2, ny2, nz2))
    step = max(1, int(4_000_000 // max(1, len(sog) * ny2)))
    for start in range(0, nx2, step):
        stop = min(nx2, start + step)
        block = ix[:, start:stop, None] * iy[:, None, :]
        coeffs[start:stop] = (block.reshape(len(sog), -1).T @ iz).reshape(stop - start, ny2, nz2)

    k2 = fx[:, None, None] ** 2 + fy[None, :, None] ** 2 + fz[None, None, :] ** 2
    a2 = 4.0 * sog.t_max**2
    with np.errstate(divide="ignore", invalid="ignore"):
        near = -np.expm1(-k2 / a2) / k2
    near[0, 0, 0] = 1.0 / a2
    coeffs += near
    return KernelTable(grid, coeffs, sog.delta, sog.eps, len(sog))


def unit_orientation(n):
    n = np.asarray(n, dtype=float).reshape(3)
    if abs(np.linalg.norm(n) - 1.0) > 1e-12:
        raise ValueError(f"dipole orientation must be a unit vector, |n| = {np.linalg.norm(n)!r}")
    return n


def coulomb_potential(density, table):
    """Coulomb potential ``U * rho`` restricted to ``D_{L xi}``."""
    table.check_density(density)
    return table.convolve(np.asarray(density, dtype=float), table._half)


def dipolar_potential(density, table, n):
    """Dipolar potential ``-rho - 3 U * d_nn rho`` computed spectrally on the twofold box."""
    table.check_density(density)
    return table.convolve(np.asarray(density, dtype=float), table.dipolar_symbol(n))


# ---------------------------------------------------------------------- cache

_MAGIC = b"DIPBECKT"
_VERSION = 1
_HEADER = struct.Struct("<8sI4d3q2d")


def save_kernel_table(table, path):
    """Write ``table`` as little-endian header + float64 coefficients in C order."""
    g = table.grid
    header = _HEADER.pack(_MAGIC, _VERSION, g.L, *g.xi, *g.N, table.delta, table.eps_sog)
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(table.coefficients, dtype="<f8").tobytes())
    return path


def read_kernel_header(path):
    with Path(path).open("rb") as fh:
        raw = fh.read(_HEADER.size)
    magic, version, L, x0, x1, x2, n0, n1, n2, delta, eps = _HEADER.unpack(raw)
    if magic != _MAGIC:
        raise ValueError(f"{path}: not a kernel table file")
    if version != _VERSION:
        raise ValueError(f"{path}: unsupported kernel table version {version}")
    return {"L": L, "xi": (x0, x1, x2), "N": (n0, n1, n2), "delta": delta, "eps_sog": eps}


def load_kernel_table(path, grid):
    """Read a cached table, checking that it was built for ``grid``."""
    head = read_kernel_header(path)
    if head["L"] != grid.L or head["xi"] != grid.xi or head["N"] != grid.N:
        raise ValueError(f"{path}: kernel table was built for a different grid")
    data = np.fromfile(path, dtype="<f8", offset=_HEADER.size)
    shape = tuple(2 * n for n in grid.N)
    if data.size != np.prod(shape):
        raise ValueError(f"{path}: truncated kernel table")
    return KernelTable(grid, data.reshape(shape).astype(float), head["delta"], head["eps_sog"])


def cached_kernel_table(grid, cache_dir, *, delta=None, eps_sog=1e-12):
    """Load the table for ``(grid, delta, eps_sog)`` from ``cache_dir`` or build and store it."""
    if delta is None:
        delta = default_delta(grid)
    key = "kt_L{:.6g}_xi{:.6g}-{:.6g}-{:.6g}_N{}x{}x{}_d{:.6e}_e{:.1e}.bin".format(
        grid.L, *grid.xi, *grid.N, delta, eps_sog
    )
    path = Path(cache_dir) / key
    if path.exists():
        head = read_kernel_header(path)
        if head["delta"] == delta and head["eps_sog"] == eps_sog:
            return load_kernel_table(path, grid)
    table = precompute_kernel_coefficients(grid, delta=delta, eps_sog=eps_sog)
    path.parent.mkdir(parents=True, exist_ok=True)
    save_kernel_table(table, path)
    return table
