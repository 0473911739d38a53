"""
One-way cascadic multigrid: solve on a coarse grid, prolong spectrally, repeat.

Level ``i`` of an ``m``-level schedule uses ``N^i = k * 2^i`` points per axis,
so the finest level is ``k * 2^(m-1)``.  Every level has its own kernel table,
built before the cascade starts.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from . import _fft
from .atkm import precompute_kernel_coefficients
from .grid import Grid
from .model import GPEModel
from .pcg import StoppingCriterion, minimize

log = logging.getLogger(__name__)

__all__ = [
    "CascadeSchedule",
    "CascadeResult",
    "LevelError",
    "spectral_prolong",
    "level_tolerance",
    "build_tables",
    "run_cascade",
]


class LevelError(RuntimeError):
    """A solver failure annotated with the cascade level it occurred on."""

    def __init__(self, level, original):
        super().__init__(f"level {level}: {original}")
        self.level = level
        self.original = original


def level_tolerance(eps, level, levels):
    """Stopping tolerance for ``level`` (0 = coarsest); the finest level uses ``eps`` itself."""
    if level == levels - 1:
        return eps
    return max(eps, 1e-8 * 100.0 ** (levels - 1 - level))


@dataclass
class CascadeSchedule:
    """Grid hierarchy and per-level stopping rules.

    Parameters
    ----------
    fine : Grid
        Target (finest) grid.
    levels : int
        Number of levels; every coarse count must stay even and at least 4.
    eps : float
        Tolerance on the finest level.
    max_iter : int
        Iteration cap applied on every level.
    """

    fine: Grid
    levels: int = 3
    eps: float = 1e-10
    max_iter: int = 10_000
    stops: list = field(init=False)

    def __post_init__(self):
        if int(self.levels) < 1:
            raise ValueError("a cascade needs at least one level")
        self.levels = int(self.levels)
        div = 2 ** (self.levels - 1)
        for n in self.fine.N:
            if n % div or (n // div) % 2 or n // div < 4:
                raise ValueError(
                    f"grid counts {self.fine.N} do not support {self.levels} levels "
                    "(coarsest counts must be even and at least 4)"
                )
        self.stops = [
            StoppingCriterion(level_tolerance(self.eps, i, self.levels), self.max_iter)
            for i in range(self.levels)
        ]

    @property
    def base_counts(self):
        div = 2 ** (self.levels - 1)
        return tuple(n // div for n in self.fine.N)

    def grid(self, level):
        k = self.base_counts
        return Grid(self.fine.L, self.fine.xi, tuple(c * 2**level for c in k))

    @property
    def grids(self):
        return [self.grid(i) for i in range(self.levels)]


@dataclass
class CascadeResult:
    result: object
    levels: list
    handoff_energies: list

    @property
    def phi(self):
        return self.result.phi

    @property
    def report(self):
        return self.result.report

    @property
    def converged(self):
        return self.result.converged

    @property
    def finest_iterations(self):
        return self.result.iterations


def spectral_prolong(phi_coarse, coarse, fine):
    """Trigonometric interpolation of a coarse field onto a grid with doubled counts.

    Coarse coefficients are embedded in the fine spectrum with the high modes set to
    zero.  The coarse Nyquist coefficient is split evenly between ``+N/2`` and
    ``-N/2`` so that real fields stay real and resolved modes are reproduced exactly.
    The result is renormalised to unit norm.
    """
    if not (
        fine.L == coarse.L
        and fine.xi == coarse.xi
        and all(f == 2 * c for f, c in zip(fine.N, coarse.N))
    ):
        raise ValueError(f"cannot prolong from {coarse.N} to {fine.N}: counts must double on the same box")
    coarse.check(phi_coarse, "coarse field")
    ch = _fft.fftn(np.asarray(phi_coarse, dtype=complex)) / coarse.size
    for axis, n in enumerate(coarse.N):
        ch = _split_nyquist(ch, axis, n)
    fh = np.zeros(fine.N, dtype=complex)
    idx = tuple(_pad_index(n) for n in coarse.N)
    fh[np.ix_(*idx)] = ch
    out = _fft.ifftn(fh) * fine.size
    return fine.normalize(out)


def _pad_index(n):
    # coarse axis after Nyquist split has n + 1 entries: 0..n/2, -n/2..-1
    return np.concatenate([np.arange(n // 2 + 1), np.arange(-n // 2, 0) + 2 * n])


def _split_nyquist(c, axis, n):
    c = np.moveaxis(c, axis, 0)
    half = 0.5 * c[n // 2]
    out = np.concatenate([c[: n // 2], half[None], half[None], c[n // 2 + 1 :]], axis=0)
    return np.moveaxis(out, 0, axis)


def build_tables(schedule, params, *, delta=None, eps_sog=1e-12, factory=None):
    """One kernel table per level (``None`` entries when the model has no dipoles)."""
    if params.lam == 0.0:
        return [None] * schedule.levels
    make = factory or (lambda g: precompute_kernel_coefficients(g, delta=delta, eps_sog=eps_sog))
    return [make(g) for g in schedule.grids]


def run_cascade(schedule, params, phi0, tables=None, *, callback=None):
    """Run the minimiser level by level, seeding each level with the prolonged solution.

    ``phi0`` lives on the coarsest grid.  ``callback(level, record)`` is called for
    every accepted iteration.  Returns a :class:`CascadeResult` whose ``levels`` holds
    the per-level :class:`~dipbec.pcg.MinimizeResult` objects.
    """
    grids = schedule.grids
    if tables is None:
        tables = build_tables(schedule, params)
    if len(tables) != schedule.levels:
        raise ValueError(f"expected {schedule.levels} kernel tables, got {len(tables)}")
    grids[0].check(phi0, "initial field")
    phi = phi0
    results, handoff = [], []
    for i, (g, table, stop) in enumerate(zip(grids, tables, schedule.stops)):
        model = GPEModel(g, params, table)
        if i > 0:
            phi = spectral_prolong(phi, grids[i - 1], g)
            e_in = model.energy(phi)
            handoff.append((results[-1].report.E_total, e_in))
            log.info("level %d hand-off: E %.12f -> %.12f", i, results[-1].report.E_total, e_in)
        cb = None if callback is None else (lambda rec, i=i: callback(i, rec))
        try:
            res = minimize(phi, model, stop, callback=cb)
        except Exception as exc:
            raise LevelError(i, exc) from exc
        log.info("level %d %s: %d iterations, E=%.14f", i, g.N, res.iterations, res.report.E_total)
        results.append(res)
        phi = res.phi
    return CascadeResult(results[-1], results, handoff)
