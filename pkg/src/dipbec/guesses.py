"""
The ten standard initial guesses.

``a`` is the harmonic-oscillator Gaussian, ``b`` adds one unit of angular
momentum through the factor ``x + iy``, ``c``/``d``/``e`` mix the two, and ``f`` is
the Thomas-Fermi profile.  Barred kinds are pointwise complex conjugates.  All
guesses are normalised with the discrete grid norm.
"""

from enum import Enum

import numpy as np

from .model import trap_field

__all__ = ["GuessKind", "ALL_KINDS", "make_initial", "thomas_fermi_mu", "parse_kind"]


class GuessKind(str, Enum):
    A = "a"
    B = "b"
    B_BAR = "bbar"
    C = "c"
    C_BAR = "cbar"
    D = "d"
    D_BAR = "dbar"
    E = "e"
    E_BAR = "ebar"
    F = "f"

    @property
    def conjugate(self):
        return self.value.endswith("bar")

    @property
    def base(self):
        return GuessKind(self.value[0])


ALL_KINDS = tuple(GuessKind)


def parse_kind(text):
    """Accept ``"bbar"``, ``"b_bar"``, ``"b̄"`` or a :class:`GuessKind`."""
    if isinstance(text, GuessKind):
        return text
    key = str(text).strip().lower().replace("_", "").replace("̄", "bar")
    try:
        return GuessKind(key)
    except ValueError:
        names = ", ".join(k.value for k in GuessKind)
        raise ValueError(f"unknown guess kind {text!r} (expected one of {names})") from None


def thomas_fermi_mu(params):
    """``mu_TF = (15 beta gx gy gz / (4 pi))^(2/5) / 2``."""
    beta = params.beta
    if not beta > 0:
        raise ValueError(f"Thomas-Fermi guess needs beta > 0, got {beta!r}")
    gx, gy, gz = params.gamma
    return 0.5 * (15.0 * beta * gx * gy * gz / (4.0 * np.pi)) ** 0.4


def _gaussian(grid):
    return np.pi ** -0.75 * np.exp(-0.5 * grid.r2) + 0j


def _vortex(grid, a):
    X, Y, _ = grid.coords
    return grid.normalize((X + 1j * Y) * a)


def make_initial(kind, grid, params):
    """Evaluate guess ``kind`` on ``grid`` and normalise it."""
    kind = parse_kind(kind)
    base = kind.base
    if base is GuessKind.F:
        mu = thomas_fermi_mu(params)
        tf = np.sqrt(np.maximum(mu - trap_field(grid, params), 0.0) / params.beta)
        if not np.any(tf > 0):
            raise ValueError("Thomas-Fermi profile is zero on every grid point")
        return grid.normalize(tf + 0j)

    a = grid.normalize(_gaussian(grid))
    if base is GuessKind.A:
        phi = a
    else:
        b = _vortex(grid, a)
        w = params.omega
        if base is GuessKind.B:
            phi = b
        elif base is GuessKind.C:
            phi = grid.normalize(a + b)
        elif base is GuessKind.D:
            phi = grid.normalize((1.0 - w) * a + w * b)
        else:
            phi = grid.normalize(w * a + (1.0 - w) * b)
    return np.conj(phi) if kind.conjugate else phi
