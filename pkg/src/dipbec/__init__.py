"""
Ground states of rotating dipolar Bose-Einstein condensates.

Fourier pseudo-spectral discretisation on anisotropic boxes, dipolar
potentials by the anisotropic truncated kernel method, and a preconditioned
Riemannian conjugate-gradient minimiser with a cascadic multigrid driver.
"""

__version__ = "0.1.0"

from .atkm import (  # noqa: E402
    KernelTable,
    build_sog,
    coulomb_potential,
    dipolar_potential,
    precompute_kernel_coefficients,
)
from .cascade import CascadeSchedule, build_tables, run_cascade, spectral_prolong  # noqa: E402
from .grid import Grid, build_grid  # noqa: E402
from .guesses import GuessKind, make_initial, thomas_fermi_mu  # noqa: E402
from .model import EnergyReport, GPEModel, ModelParams, energy_breakdown  # noqa: E402
from .pcg import StoppingCriterion, minimize  # noqa: E402

__all__ = [
    "Grid",
    "build_grid",
    "KernelTable",
    "build_sog",
    "precompute_kernel_coefficients",
    "coulomb_potential",
    "dipolar_potential",
    "ModelParams",
    "GPEModel",
    "EnergyReport",
    "energy_breakdown",
    "StoppingCriterion",
    "minimize",
    "CascadeSchedule",
    "build_tables",
    "run_cascade",
    "spectral_prolong",
    "GuessKind",
    "make_initial",
    "thomas_fermi_mu",
]
