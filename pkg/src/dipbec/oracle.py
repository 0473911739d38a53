"""
Slow, independent reference computations used to validate the fast solvers.

Nothing here touches the FFT machinery of the kernel table: convolutions are
integrated in spherical coordinates around the evaluation point, kernel Fourier
coefficients by tensor Gauss-Legendre quadrature in pyramid coordinates, and
energy gradients by central differences.
"""

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

__all__ = [
    "ErrorMetrics",
    "OracleError",
    "relative_error_E2",
    "direct_convolution_at",
    "fd_gradient_check",
    "box_kernel_integral",
    "coulomb_gaussian",
]

_FOUR_PI = 4.0 * np.pi
DEFAULT_BUDGET = 10_000_000


class OracleError(RuntimeError):
    """Quadrature did not reach its tolerance within the evaluation budget."""


@dataclass(frozen=True)
class ErrorMetrics:
    E2: float
    kappa: complex


def relative_error_E2(phi_h, phi_ref):
    """Phase-aligned relative error ``|phi_h - kappa phi_ref| / |phi_ref|``.

    ``kappa = <phi_h, phi_ref> / <phi_ref, phi_ref>`` uses the full complex
    sesquilinear sum.  Cell volumes cancel, so no grid is needed.
    """
    phi_h = np.asarray(phi_h)
    phi_ref = np.asarray(phi_ref)
    if phi_h.shape != phi_ref.shape:
        raise ValueError(f"shape mismatch: {phi_h.shape} vs {phi_ref.shape}")
    ref2 = float(np.vdot(phi_ref, phi_ref).real)
    if ref2 == 0.0:
        raise ValueError("reference field is zero")
    kappa = complex(np.vdot(phi_ref, phi_h)) / ref2
    diff = phi_h - kappa * phi_ref
    return ErrorMetrics(float(np.sqrt(np.vdot(diff, diff).real / ref2)), kappa)


def coulomb_gaussian(r, sigma=1.0):
    """Coulomb potential ``erf(r / (sigma sqrt 2)) / (4 pi r)`` of a unit-mass Gaussian."""
    from scipy.special import erf

    r = np.asarray(r, dtype=float)
    s = r / (sigma * np.sqrt(2.0))
    small = s < 1e-4
    safe = np.where(small, 1.0, r)
    out = erf(s) / (_FOUR_PI * safe)
    # erf(s)/s = (2/sqrt(pi)) (1 - s^2/3 + s^4/10 - ...)
    series = (2.0 / np.sqrt(np.pi)) * (1.0 - s * s / 3.0 + s**4 / 10.0) / (_FOUR_PI * sigma * np.sqrt(2.0))
    return np.where(small, series, out)


# ------------------------------------------------------------ convolution oracle


def _sphere_rule(n_theta, n_phi, axis):
    """Nodes ``omega`` and weights on the unit sphere, pole along ``axis``."""
    c, wc = leggauss(n_theta)
    ang = 2.0 * np.pi * np.arange(n_phi) / n_phi
    s = np.sqrt(1.0 - c * c)
    local = np.stack(
        [
            (s[:, None] * np.cos(ang)[None, :]).ravel(),
            (s[:, None] * np.sin(ang)[None, :]).ravel(),
            np.repeat(c, n_phi),
        ],
        axis=1,
    )
    w = np.repeat(wc, n_phi) * (2.0 * np.pi / n_phi)
    return local @ _frame(axis), w


def _frame(axis):
    """Rows ``e1, e2, e3`` of an orthonormal frame with ``e3 = axis``."""
    e3 = np.asarray(axis, dtype=float)
    nrm = np.linalg.norm(e3)
    e3 = np.array([0.0, 0.0, 1.0]) if nrm == 0.0 else e3 / nrm
    trial = np.array([1.0, 0.0, 0.0]) if abs(e3[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = trial - (trial @ e3) * e3
    e1 /= np.linalg.norm(e1)
    return np.stack([e1, np.cross(e3, e1), e3])


def _radial_rule(r_max, panel, order):
    n_pan = max(1, int(np.ceil(r_max / panel)))
    x, w = leggauss(order)
    edges = np.linspace(0.0, r_max, n_pan + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    r = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    wr = (half[:, None] * w[None, :]).ravel()
    return r, wr


def _shell_integral(f, point, r_max, panel, order, n_theta, n_phi):
    """``int_0^rmax r/(4 pi) int_S2 f(point - r omega) d omega dr``."""
    omega, w_ang = _sphere_rule(n_theta, n_phi, point)
    r, wr = _radial_rule(r_max, panel, order)
    total = 0.0
    chunk = max(1, 2_000_000 // omega.shape[0])
    for i in range(0, r.size, chunk):
        rr = r[i : i + chunk]
        pts = point[None, None, :] - rr[:, None, None] * omega[None, :, :]
        vals = np.asarray(f(pts[..., 0], pts[..., 1], pts[..., 2]), dtype=float)
        total += float(np.sum((wr[i : i + chunk] * rr)[:, None] * vals * w_ang[None, :]))
    return total / _FOUR_PI, r.size * omega.shape[0]


def _second_derivative(density, n, step):
    """Eighth-order central difference of ``density`` along ``n``."""
    coef = np.array([-1 / 560, 8 / 315, -1 / 5, 8 / 5, -205 / 72, 8 / 5, -1 / 5, 8 / 315, -1 / 560])
    shifts = np.arange(-4, 5) * step
    nx, ny, nz = n

    def d2(x, y, z):
        out = 0.0
        for c, s in zip(coef, shifts):
            out = out + c * density(x + s * nx, y + s * ny, z + s * nz)
        return out / (step * step)

    return d2


def direct_convolution_at(
    density,
    point,
    kernel="coulomb",
    n=None,
    *,
    support_radius=12.0,
    tol=1e-10,
    second_derivative=None,
    fd_step=0.05,
    budget=DEFAULT_BUDGET,
):
    """Free-space Coulomb or dipolar potential of ``density`` at one point.

    Parameters
    ----------
    density : callable
        ``density(x, y, z)`` evaluated on broadcast arrays; must be negligible
        outside the ball of radius ``support_radius`` about the origin.
    point : array_like
        Evaluation point.
    kernel : {"coulomb", "dipolar"}
        ``"dipolar"`` uses ``-rho(x) - 3 (U * d_nn rho)(x)`` with ``U = 1/(4 pi r)``.
    n : array_like, optional
        Dipole orientation (required for ``"dipolar"``).
    second_derivative : callable, optional
        Exact ``d_nn rho``; by default an eighth-order difference with step ``fd_step``.
    tol : float
        Target absolute accuracy; resolution doubles until two successive
        estimates agree to ``tol``.

    Returns
    -------
    float
    """
    point = np.asarray(point, dtype=float).reshape(3)
    if kernel == "coulomb":
        f = density
        local = 0.0
    elif kernel == "dipolar":
        if n is None:
            raise ValueError("dipolar kernel needs an orientation n")
        n = np.asarray(n, dtype=float).reshape(3)
        n = n / np.linalg.norm(n)
        d2 = second_derivative or _second_derivative(density, n, fd_step)
        f = lambda x, y, z: -3.0 * d2(x, y, z)  # noqa: E731
        local = -float(density(*point))
    else:
        raise ValueError(f"unknown kernel {kernel!r}")

    r_max = float(np.linalg.norm(point)) + float(support_radius)
    panel, order, n_theta, n_phi = 1.0, 12, 24, 48
    used = 0
    prev = None
    while True:
        val, cost = _shell_integral(f, point, r_max, panel, order, n_theta, n_phi)
        used += cost
        if prev is not None and abs(val - prev) <= tol * max(1.0, abs(val)):
            return local + val
        prev, before = val, prev
        panel *= 0.5
        n_theta = int(n_theta * 1.5)
        n_phi = int(n_phi * 1.5)
        nxt = int(np.ceil(r_max / panel)) * order * n_theta * n_phi
        if used + nxt > budget:
            raise OracleError(
                f"quadrature did not settle to {tol:g} within {budget} evaluations "
                f"(last two estimates {before!r}, {val!r})"
            )


# ------------------------------------------------------------ kernel coefficients


def box_kernel_integral(nu, half_widths, order=64):
    """``int_{box} exp(-i nu.y) / (4 pi |y|) dy`` over ``prod [-b_a, b_a]``.

    The box is split into octants and each octant into three pyramids with apex
    at the origin.  In pyramid coordinates ``y = s (b_0, v b_1, w b_2)`` the
    singularity cancels against the Jacobian ``s^2 b_0 b_1 b_2``, leaving a
    smooth integrand on the unit cube.  The kernel is even, so only the cosine
    part survives.
    """
    nu = np.asarray(nu, dtype=float).reshape(3)
    b = np.asarray(half_widths, dtype=float).reshape(3)
    x, w = leggauss(order)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    s, v, t = np.meshgrid(x, x, x, indexing="ij")
    ws = w[:, None, None] * w[None, :, None] * w[None, None, :]
    total = 0.0
    for apex in range(3):
        perm = [apex, (apex + 1) % 3, (apex + 2) % 3]
        bb, kk = b[perm], nu[perm]
        q = np.sqrt(bb[0] ** 2 + (v * bb[1]) ** 2 + (t * bb[2]) ** 2)
        osc = np.cos(kk[0] * s * bb[0]) * np.cos(kk[1] * s * v * bb[1]) * np.cos(kk[2] * s * t * bb[2])
        total += np.prod(bb) * float(np.sum(ws * s * osc / q))
    return 8.0 * total / _FOUR_PI


# ------------------------------------------------------------ gradient check


def fd_gradient_check(phi, p, model, eps_fd=1e-5):
    """Relative mismatch between a central difference of the energy and ``2 <H phi, p>``.

    ``model`` is a :class:`~dipbec.model.GPEModel`; the nonlinear terms are
    re-evaluated at the perturbed fields.
    """
    if not 1e-7 <= eps_fd <= 1e-3:
        raise ValueError(f"eps_fd must lie in [1e-7, 1e-3], got {eps_fd!r}")
    g = model.grid
    exact = 2.0 * g.inner(model.hamiltonian(phi, model.potential(phi)), p)
    fd = (model.energy(phi + eps_fd * p) - model.energy(phi - eps_fd * p)) / (2.0 * eps_fd)
    return abs(fd - exact) / max(1.0, abs(exact))
