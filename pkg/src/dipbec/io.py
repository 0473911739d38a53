"""
Run configuration, field dumps, diagnostics tables and plane slices.

Configuration files are INI documents::

    [grid]
    L = 16
    xi = 1, 1, 1
    N = 64            ; or three counts
    levels = 3

    [model]
    beta = 100
    lambda = 80
    omega = 0.2
    gamma = 1, 1, 1
    n = 0, 0, 1

    [solver]
    eps = 1e-10
    max_iter = 10000
    guess = all       ; or a comma-separated list of kinds

    [atkm]
    delta =           ; empty: a quarter of the smallest mesh size
    eps_sog = 1e-12
    cache =           ; directory for kernel tables, empty disables caching

    [output]
    directory = out
    artifacts = report, diagnostics, field, slice

Field dumps are a fixed little-endian header followed by the values as
interleaved real/imaginary ``float64`` pairs in C order (see :data:`FIELD_HEADER`).
"""

import configparser
import csv
import io as _io
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid import Grid
from .guesses import ALL_KINDS, parse_kind
from .model import ModelParams

__all__ = [
    "ConfigError",
    "RunSpec",
    "parse_config",
    "load_config",
    "FIELD_MAGIC",
    "FIELD_HEADER",
    "write_field",
    "read_field",
    "write_diagnostics",
    "export_slice",
    "parse_plane",
]

ARTIFACTS = ("report", "diagnostics", "field", "slice")


class ConfigError(ValueError):
    """Invalid run configuration; ``problems`` lists ``(path, message)`` pairs."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(f"{p}: {m}" for p, m in self.problems))


@dataclass
class RunSpec:
    grid: Grid
    params: ModelParams
    levels: int = 3
    eps: float = 1e-10
    max_iter: int = 10_000
    guesses: tuple = ALL_KINDS
    delta: float = None
    eps_sog: float = 1e-12
    cache: str = None
    directory: str = "out"
    artifacts: tuple = ARTIFACTS
    source: dict = field(default_factory=dict, repr=False)


def _floats(text, count=None):
    vals = [float(v) for v in str(text).replace(",", " ").split()]
    if count is not None and len(vals) == 1 and count > 1:
        vals = vals * count
    if count is not None and len(vals) != count:
        raise ValueError(f"expected {count} numbers, got {len(vals)}")
    return vals


class _Reader:
    def __init__(self, cp):
        self.cp = cp
        self.problems = []

    def get(self, section, key, convert, default=None):
        path = f"{section}.{key}"
        if not self.cp.has_option(section, key) or self.cp.get(section, key).strip() == "":
            return default
        raw = self.cp.get(section, key).strip()
        try:
            return convert(raw)
        except (ValueError, TypeError) as exc:
            self.problems.append((path, f"{exc} (value {raw!r})"))
            return default

    def required(self, path, value):
        if value is None and not any(p == path for p, _ in self.problems):
            self.problems.append((path, "required"))

    def check(self, path, ok, message):
        if not ok:
            self.problems.append((path, message))
        return ok


def _counts(raw):
    vals = _floats(raw, 3)
    if any(v != int(v) for v in vals):
        raise ValueError("grid counts must be integers")
    return tuple(int(v) for v in vals)


def parse_config(text):
    """Parse and validate an INI run configuration."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([("<document>", str(exc).splitlines()[0])]) from exc
    rd = _Reader(cp)
    for sec in cp.sections():
        rd.check(sec, sec in ("grid", "model", "solver", "atkm", "output"), "unknown section")

    L = rd.get("grid", "L", float)
    rd.required("grid.L", L)
    xi = rd.get("grid", "xi", lambda s: tuple(_floats(s, 3)), (1.0, 1.0, 1.0))
    N = rd.get("grid", "N", _counts)
    rd.required("grid.N", N)
    levels = rd.get("grid", "levels", int, 3)

    beta = rd.get("model", "beta", float, 0.0)
    lam = rd.get("model", "lambda", float, 0.0)
    omega = rd.get("model", "omega", float, 0.0)
    gamma = rd.get("model", "gamma", lambda s: tuple(_floats(s, 3)), (1.0, 1.0, 1.0))
    n = rd.get("model", "n", lambda s: tuple(_floats(s, 3)), (0.0, 0.0, 1.0))

    eps = rd.get("solver", "eps", float, 1e-10)
    max_iter = rd.get("solver", "max_iter", int, 10_000)
    guesses = rd.get("solver", "guess", _guess_list, ALL_KINDS)

    delta = rd.get("atkm", "delta", float)
    eps_sog = rd.get("atkm", "eps_sog", float, 1e-12)
    cache = rd.get("atkm", "cache", str)

    directory = rd.get("output", "directory", str, "out")
    artifacts = rd.get("output", "artifacts", _artifact_list, ARTIFACTS)

    grid = params = None
    if L is not None and N is not None:
        try:
            grid = Grid(L, xi, N)
        except ValueError as exc:
            rd.problems.append(("grid", str(exc)))
    if n is not None:
        nn = float(np.linalg.norm(n))
        if rd.check("model.n", nn > 0 and abs(nn - 1.0) <= 1e-9, f"orientation must be a unit vector (|n| = {nn:.12g})"):
            n = tuple(np.asarray(n) / nn)
        else:
            n = (0.0, 0.0, 1.0)
    try:
        params = ModelParams(beta, lam, omega, gamma, n)
    except (ValueError, TypeError) as exc:
        rd.problems.append(("model", str(exc)))
    rd.check("model.beta", beta is None or beta >= 0, "must be non-negative")
    rd.check("solver.eps", eps is None or eps > 0, "must be positive")
    rd.check("solver.max_iter", max_iter is None or max_iter >= 1, "must be at least 1")
    rd.check("grid.levels", levels is None or levels >= 1, "must be at least 1")
    rd.check("atkm.delta", delta is None or delta > 0, "must be positive")
    rd.check("atkm.eps_sog", eps_sog is None or 1e-15 < eps_sog < 1e-2, "must lie in (1e-15, 1e-2)")
    if grid is not None and levels and levels >= 1:
        div = 2 ** (levels - 1)
        rd.check(
            "grid.levels",
            all(c % div == 0 and (c // div) % 2 == 0 and c // div >= 4 for c in grid.N),
            f"counts {grid.N} cannot be halved {levels - 1} times to even counts >= 4",
        )
    if rd.problems:
        raise ConfigError(rd.problems)
    return RunSpec(
        grid=grid,
        params=params,
        levels=levels,
        eps=eps,
        max_iter=max_iter,
        guesses=guesses,
        delta=delta,
        eps_sog=eps_sog,
        cache=cache,
        directory=directory,
        artifacts=artifacts,
        source={s: dict(cp.items(s)) for s in cp.sections()},
    )


def load_config(path):
    return parse_config(Path(path).read_text())


def _guess_list(raw):
    if raw.strip().lower() == "all":
        return ALL_KINDS
    kinds = [parse_kind(k) for k in raw.replace(",", " ").split()]
    if not kinds:
        raise ValueError("no guess kinds given")
    # keep the canonical order so that tie-breaking is deterministic
    return tuple(k for k in ALL_KINDS if k in kinds)


def _artifact_list(raw):
    items = [a.strip().lower() for a in raw.replace(",", " ").split()]
    bad = [a for a in items if a not in ARTIFACTS]
    if bad:
        raise ValueError(f"unknown artifacts {bad} (expected from {list(ARTIFACTS)})")
    return tuple(items)


# ------------------------------------------------------------------ field dumps

FIELD_MAGIC = b"DIPBECFD"
FIELD_VERSION = 1
#: magic, version, L, xi[3], N[3], beta, lam, omega, gamma[3], n[3]
FIELD_HEADER = struct.Struct("<8sI4d3q9d")


def write_field(path, phi, grid, params):
    """Write ``phi`` with a self-describing header; the payload is bit-exact."""
    grid.check(phi)
    data = np.ascontiguousarray(phi, dtype="<c16")
    head = FIELD_HEADER.pack(
        FIELD_MAGIC,
        FIELD_VERSION,
        grid.L,
        *grid.xi,
        *grid.N,
        params.beta,
        params.lam,
        params.omega,
        *params.gamma,
        *params.n,
    )
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(data.tobytes(order="C"))


def read_field(path):
    """Return ``(phi, grid, params)`` from a field dump."""
    raw = Path(path).read_bytes()
    if len(raw) < FIELD_HEADER.size:
        raise ValueError(f"{path}: file too short for a field header")
    vals = FIELD_HEADER.unpack_from(raw)
    magic, version = vals[0], vals[1]
    if magic != FIELD_MAGIC:
        raise ValueError(f"{path}: not a field dump (magic {magic!r})")
    if version != FIELD_VERSION:
        raise ValueError(f"{path}: unsupported field dump version {version}")
    L, xi, N = vals[2], vals[3:6], vals[6:9]
    beta, lam, omega = vals[9:12]
    gamma, n = vals[12:15], vals[15:18]
    grid = Grid(L, xi, N)
    params = ModelParams(beta, lam, omega, gamma, n)
    expected = FIELD_HEADER.size + 16 * grid.size
    if len(raw) != expected:
        raise ValueError(f"{path}: payload has {len(raw)} bytes, expected {expected}")
    phi = np.frombuffer(raw, dtype="<c16", offset=FIELD_HEADER.size).reshape(grid.N).astype(complex)
    return phi, grid, params


# ------------------------------------------------------------------ diagnostics

DIAGNOSTIC_COLUMNS = ("guess", "level", "n", "energy", "mu", "res_norm", "t", "dE", "corrected", "halvings", "wall")


def write_diagnostics(path, rows):
    """Write iteration records ``(guess, level, IterationRecord)`` as CSV."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(DIAGNOSTIC_COLUMNS)
        for guess, level, rec in rows:
            w.writerow(
                [
                    getattr(guess, "value", guess),
                    level,
                    rec.n,
                    repr(rec.energy),
                    repr(rec.mu),
                    f"{rec.res_norm:.6e}",
                    f"{rec.t:.6e}",
                    f"{rec.dE:.6e}",
                    int(rec.corrected),
                    rec.halvings,
                    f"{rec.wall:.6f}",
                ]
            )


# ------------------------------------------------------------------ slices

_PLANE_AXIS = {"x": 0, "y": 1, "z": 2}


def parse_plane(text):
    """``"z=0"`` -> ``(2, 0.0)``."""
    try:
        name, value = str(text).replace(" ", "").split("=")
        return _PLANE_AXIS[name.lower()], float(value)
    except (ValueError, KeyError):
        raise ValueError(f"plane must look like 'z=0', got {text!r}") from None


def export_slice(phi, grid, plane="z=0"):
    """Density ``|phi|^2`` on the grid plane nearest to ``plane`` as CSV text.

    Columns are the two in-plane coordinates and the density, row-major in
    the first in-plane coordinate.  Returns ``(text, index, coordinate)`` where
    ``coordinate`` is the grid plane actually used.
    """
    grid.check(phi)
    axis, value = parse_plane(plane)
    ax = grid.axes[axis]
    h = grid.h[axis]
    lo, hi = ax[0], ax[-1] + h
    if not lo - 0.5 * h <= value <= hi - 0.5 * h:
        raise ValueError(f"plane {plane!r} lies outside the domain [{lo:g}, {hi - h:g}]")
    idx = int(np.argmin(np.abs(ax - value)))
    rho = np.take(np.abs(phi) ** 2, idx, axis=axis)
    names = [k for k, a in _PLANE_AXIS.items() if a != axis]
    c1, c2 = (grid.axes[a] for a in range(3) if a != axis)
    buf = _io.StringIO()
    buf.write(f"# {'xyz'[axis]}={float(ax[idx])!r} index={idx}\n")
    buf.write(f"{names[0]},{names[1]},density\n")
    for i, u in enumerate(c1.tolist()):
        for j, v in enumerate(c2.tolist()):
            buf.write(f"{u!r},{v!r},{float(rho[i, j])!r}\n")
    return buf.getvalue(), idx, float(ax[idx])
