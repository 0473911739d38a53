"""
Rotating dipolar GPE model: parameters, discrete Hamiltonian, and the energy functional.

The discrete energy is

    E(phi) = < -1/2 Lap phi + V phi + beta/2 |phi|^2 phi + lam/2 Phi phi - Omega Lz phi, phi >

with ``Phi`` the dipolar potential of ``|phi|^2`` and ``<.,.>`` the real grid
inner product.  :class:`GPEModel` binds one grid, parameter set and kernel
table together; the module-level functions are thin wrappers around it.
"""

from dataclasses import asdict, dataclass, field

import numpy as np

from . import _fft
from .atkm import dipolar_potential, unit_orientation

__all__ = [
    "ModelParams",
    "EnergyReport",
    "GPEModel",
    "trap_field",
    "apply_hamiltonian",
    "energy_breakdown",
    "virial_residual",
    "NormalizationError",
]


class NormalizationError(ValueError):
    """Raised when a field handed to the energy is not on the unit sphere."""


@dataclass(frozen=True)
class ModelParams:
    beta: float = 0.0
    lam: float = 0.0
    omega: float = 0.0
    gamma: tuple = (1.0, 1.0, 1.0)
    n: tuple = (0.0, 0.0, 1.0)

    def __post_init__(self):
        gamma = tuple(float(g) for g in np.ravel(self.gamma))
        if len(gamma) != 3 or any(not g > 0 for g in gamma):
            raise ValueError(f"trap frequencies must be three positive numbers, got {self.gamma!r}")
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "n", tuple(float(c) for c in unit_orientation(self.n)))
        for name in ("beta", "lam", "omega"):
            object.__setattr__(self, name, float(getattr(self, name)))


@dataclass
class EnergyReport:
    E_total: float
    E_kin: float
    E_pot: float
    E_int: float
    E_dip: float
    E_rot: float
    mu: float
    virial: float

    def as_dict(self):
        return asdict(self)


def trap_field(grid, params):
    """Harmonic trap ``(gx^2 x^2 + gy^2 y^2 + gz^2 z^2) / 2`` on the grid."""
    X, Y, Z = grid.coords
    gx, gy, gz = params.gamma
    return 0.5 * ((gx * X) ** 2 + (gy * Y) ** 2 + (gz * Z) ** 2)


@dataclass(eq=False)
class GPEModel:
    """Discrete operators of the GPE on a fixed grid.

    ``table`` may be ``None`` when ``lam == 0``; the dipolar potential is then
    identically zero and no convolutions are performed.
    """

    grid: object
    params: ModelParams
    table: object = None
    V: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.table is not None and not self.table.grid.same_as(self.grid):
            raise ValueError("kernel table was built for a different grid")
        self.V = trap_field(self.grid, self.params)

    @property
    def has_dipoles(self):
        return self.params.lam != 0.0

    # ------------------------------------------------------------- potentials

    def dipolar(self, rho):
        """Dipolar potential of a real density (zeros when ``lam == 0``)."""
        if not self.has_dipoles:
            return np.zeros(self.grid.N)
        if self.table is None:
            raise ValueError("a kernel table is required when lam != 0")
        return dipolar_potential(rho, self.table, self.params.n)

    def potential(self, phi):
        return self.dipolar(np.abs(phi) ** 2)

    # ------------------------------------------------------------- operators

    def _kinetic_and_lz(self, psi):
        g = self.grid
        fh = _fft.fftn(psi)
        kin = _fft.ifftn(0.5 * g.nu2 * fh)
        if self.params.omega == 0.0:
            return kin, None
        dx = _fft.ifftn(1j * g.nu[0] * fh)
        dy = _fft.ifftn(1j * g.nu[1] * fh)
        X, Y, _ = g.coords
        return kin, -1j * (X * dy - Y * dx)

    def hamiltonian(self, phi, Phi, psi=None):
        """``H_phi psi`` with the nonlinear coefficients frozen at ``phi`` (``psi`` defaults to ``phi``)."""
        p = self.params
        if psi is None:
            psi = phi
        kin, lz = self._kinetic_and_lz(psi)
        local = self.V + p.beta * np.abs(phi) ** 2
        if self.has_dipoles:
            local = local + p.lam * Phi
        out = kin + local * psi
        if p.omega != 0.0:
            out -= p.omega * lz
        return out

    def kinetic_energy(self, phi):
        g = self.grid
        fh = _fft.fftn(phi)
        # sum_j |f_j|^2 = N sum_k |fhat_k|^2 with fhat = fftn / N
        return 0.5 * g.cell_volume * float(np.sum(g.nu2 * np.abs(fh) ** 2)) / g.size

    def energy_parts(self, phi, Phi):
        g, p = self.grid, self.params
        rho = np.abs(phi) ** 2
        hv = g.cell_volume
        e_kin = self.kinetic_energy(phi)
        e_pot = hv * float(np.sum(self.V * rho))
        e_int = 0.5 * p.beta * hv * float(np.sum(rho * rho)) if p.beta != 0.0 else 0.0
        e_dip = 0.5 * p.lam * hv * float(np.sum(Phi * rho)) if self.has_dipoles else 0.0
        if p.omega != 0.0:
            e_rot = -p.omega * g.inner(g.lz(phi), phi)
        else:
            e_rot = 0.0
        return e_kin, e_pot, e_int, e_dip, e_rot

    def energy(self, phi, Phi=None):
        if Phi is None:
            Phi = self.potential(phi)
        return sum(self.energy_parts(phi, Phi))

    def energy_difference(self, new, Phi_new, old, Phi_old):
        """``E(new) - E(old)`` evaluated in difference form.

        Every term is rewritten as ``<A(new - old), new + old>`` (and
        ``<drho, Phi_new + Phi_old>`` for the dipolar part), so the result keeps
        full relative precision even when the two energies agree to many digits.
        """
        g, p = self.grid, self.params
        hv = g.cell_volume
        d = new - old
        s = new + old
        drho = np.real(d * np.conj(s))
        dh = _fft.fftn(d)
        sh = _fft.fftn(s)
        de = 0.5 * hv * float(np.sum(g.nu2 * np.real(dh * np.conj(sh)))) / g.size
        de += hv * float(np.sum(self.V * drho))
        if p.beta != 0.0:
            srho = np.abs(new) ** 2 + np.abs(old) ** 2
            de += 0.5 * p.beta * hv * float(np.sum(drho * srho))
        if self.has_dipoles:
            de += 0.5 * p.lam * hv * float(np.sum(drho * (Phi_new + Phi_old)))
        if p.omega != 0.0:
            de -= p.omega * g.inner(g.lz(d), s)
        return de

    def report(self, phi, Phi=None):
        if Phi is None:
            Phi = self.potential(phi)
        e_kin, e_pot, e_int, e_dip, e_rot = self.energy_parts(phi, Phi)
        total = e_kin + e_pot + e_int + e_dip + e_rot
        mu = self.grid.inner(self.hamiltonian(phi, Phi), phi)
        virial = 2.0 * e_kin - 2.0 * e_pot + 3.0 * e_int + 3.0 * e_dip
        return EnergyReport(total, e_kin, e_pot, e_int, e_dip, e_rot, mu, virial)


def apply_hamiltonian(phi, Phi, params, grid):
    """``H_phi phi`` for a given dipolar potential ``Phi`` of ``|phi|^2``."""
    grid.check(phi)
    grid.check(Phi, "Phi")
    return GPEModel(grid, params).hamiltonian(phi, Phi)


def energy_breakdown(phi, params, grid, table=None):
    """Energy decomposition, chemical potential and virial value of a unit-norm field."""
    grid.check(phi)
    nrm = grid.norm(phi)
    if abs(nrm - 1.0) > 1e-8:
        raise NormalizationError(f"field must have unit norm, got {nrm!r}")
    return GPEModel(grid, params, table).report(phi)


def virial_residual(report):
    """``|2 E_kin - 2 E_pot + 3 E_int + 3 E_dip|``."""
    return abs(2.0 * report.E_kin - 2.0 * report.E_pot + 3.0 * report.E_int + 3.0 * report.E_dip)
