"""
Orchestration of a full run: kernel tables, guess sweep through the cascade,
ground-state selection and artifact output.
"""

import json
import logging
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .atkm import cached_kernel_table, precompute_kernel_coefficients
from .cascade import CascadeSchedule, LevelError, build_tables, run_cascade
from .guesses import GuessKind, make_initial
from .io import export_slice, write_diagnostics, write_field

log = logging.getLogger(__name__)

__all__ = ["GuessOutcome", "RunArtifacts", "run", "select_ground_state", "core_density_ratio"]

TIE_TOLERANCE = 1e-12


@dataclass
class GuessOutcome:
    kind: GuessKind
    cascade: object = None
    error: str = None
    seconds: float = 0.0

    @property
    def ok(self):
        return self.cascade is not None

    @property
    def energy(self):
        return self.cascade.report.E_total if self.ok else float("inf")


@dataclass
class RunArtifacts:
    spec: object
    outcomes: list
    best: GuessOutcome
    files: dict = field(default_factory=dict)
    table_seconds: float = 0.0

    @property
    def converged(self):
        return self.best is not None and self.best.cascade.converged

    @property
    def report(self):
        return self.best.cascade.report

    @property
    def phi(self):
        return self.best.cascade.phi


def select_ground_state(outcomes, tol=TIE_TOLERANCE):
    """Lowest-energy successful outcome; within ``tol`` the earlier kind wins."""
    best = None
    for out in outcomes:
        if not out.ok:
            continue
        if best is None or out.energy < best.energy - tol:
            best = out
    return best


def core_density_ratio(phi, grid, radius=1.0):
    """Minimum of ``|phi|^2`` within ``radius`` of the z-axis on the plane nearest ``z = 0``,
    divided by the peak density on that plane.  Values near zero indicate a vortex core."""
    iz = int(np.argmin(np.abs(grid.axes[2])))
    rho = np.abs(phi[:, :, iz]) ** 2
    X, Y, _ = grid.coords
    near = (X[:, :, 0] ** 2 + Y[:, :, 0] ** 2) <= radius**2
    if not np.any(near):
        raise ValueError("no grid points within the probe radius")
    return float(np.min(rho[near]) / np.max(rho))


def _tables(spec, schedule):
    if spec.params.lam == 0.0:
        return [None] * schedule.levels
    if spec.cache:
        make = lambda g: cached_kernel_table(g, spec.cache, delta=spec.delta, eps_sog=spec.eps_sog)  # noqa: E731
    else:
        make = lambda g: precompute_kernel_coefficients(g, delta=spec.delta, eps_sog=spec.eps_sog)  # noqa: E731
    return build_tables(schedule, spec.params, factory=make)


def run(spec, *, guesses=None, levels=None, directory=None, write=True):
    """Solve ``spec`` for every requested guess and keep the lowest energy.

    Parameters override the corresponding fields of ``spec``.  Solver failures
    for individual guesses are recorded and do not abort the sweep.  When
    ``write`` is true the artifacts listed in ``spec.artifacts`` are written to
    the output directory.
    """
    kinds = tuple(guesses) if guesses is not None else spec.guesses
    levels = spec.levels if levels is None else int(levels)
    schedule = CascadeSchedule(spec.grid, levels, spec.eps, spec.max_iter)
    tic = time.perf_counter()
    tables = _tables(spec, schedule)
    table_seconds = time.perf_counter() - tic
    log.info("kernel tables for %d levels in %.2f s", levels, table_seconds)

    outcomes = []
    diag = []
    coarse = schedule.grid(0)
    for kind in kinds:
        if kind.base is GuessKind.F and spec.params.beta <= 0.0:
            if len(kinds) > 1:
                log.info("skipping Thomas-Fermi guess: beta <= 0")
                outcomes.append(GuessOutcome(kind, error="Thomas-Fermi guess needs beta > 0"))
                continue
        phi0 = make_initial(kind, coarse, spec.params)
        t0 = time.perf_counter()
        try:
            res = run_cascade(
                schedule,
                spec.params,
                phi0,
                tables,
                callback=lambda lvl, rec, kind=kind: diag.append((kind, lvl, rec)),
            )
        except LevelError as exc:
            log.warning("guess %s failed: %s", kind.value, exc)
            outcomes.append(GuessOutcome(kind, error=str(exc), seconds=time.perf_counter() - t0))
            continue
        out = GuessOutcome(kind, res, seconds=time.perf_counter() - t0)
        log.info(
            "guess %-4s E=%.14f  iterations %s  %s",
            kind.value,
            out.energy,
            [r.iterations for r in res.levels],
            res.result.status,
        )
        outcomes.append(out)

    best = select_ground_state(outcomes)
    arts = RunArtifacts(spec, outcomes, best, table_seconds=table_seconds)
    if write:
        _write(arts, schedule, diag, directory or spec.directory)
    return arts


def _summary(arts, schedule):
    spec = arts.spec
    best = arts.best
    doc = {
        "version": __version__,
        "python": platform.python_version(),
        "grid": {"L": spec.grid.L, "xi": spec.grid.xi, "N": spec.grid.N, "levels": schedule.levels},
        "model": {
            "beta": spec.params.beta,
            "lambda": spec.params.lam,
            "omega": spec.params.omega,
            "gamma": spec.params.gamma,
            "n": spec.params.n,
        },
        "solver": {"eps": spec.eps, "max_iter": spec.max_iter, "level_eps": [s.eps for s in schedule.stops]},
        "atkm": {"delta": spec.delta, "eps_sog": spec.eps_sog},
        "table_seconds": arts.table_seconds,
        "guesses": [
            {
                "kind": o.kind.value,
                "ok": o.ok,
                "error": o.error,
                "energy": o.energy if o.ok else None,
                "converged": o.cascade.converged if o.ok else False,
                "iterations": [r.iterations for r in o.cascade.levels] if o.ok else None,
                "seconds": o.seconds,
            }
            for o in arts.outcomes
        ],
    }
    if best is not None:
        res = best.cascade.result
        doc["ground_state"] = {
            "guess": best.kind.value,
            "converged": res.converged,
            "status": res.status,
            "residual_norm": res.res_norm,
            "virial_abs": abs(res.report.virial),
            "core_density_ratio": core_density_ratio(res.phi, spec.grid),
            "energy": res.report.as_dict(),
            "handoff_energies": best.cascade.handoff_energies,
        }
    else:
        doc["ground_state"] = None
    return doc


def _write(arts, schedule, diag, directory):
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    wanted = set(arts.spec.artifacts)
    files = {}
    if "report" in wanted:
        p = out / "report.json"
        p.write_text(json.dumps(_summary(arts, schedule), indent=2) + "\n")
        files["report"] = p
    if "diagnostics" in wanted:
        p = out / "diagnostics.csv"
        write_diagnostics(p, diag)
        files["diagnostics"] = p
    if arts.best is not None:
        g = arts.spec.grid
        if "field" in wanted:
            p = out / "ground_state.dpbf"
            write_field(p, arts.phi, g, arts.spec.params)
            files["field"] = p
        if "slice" in wanted:
            p = out / "slice_z0.csv"
            p.write_text(export_slice(arts.phi, g, "z=0")[0])
            files["slice"] = p
    arts.files = files
