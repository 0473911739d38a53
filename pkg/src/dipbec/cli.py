"""Command-line interface: ``dipbec solve | potential-test | slice``."""

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import _fft
from .atkm import coulomb_potential, dipolar_potential, precompute_kernel_coefficients
from .guesses import ALL_KINDS, parse_kind
from .io import ConfigError, export_slice, load_config, read_field
from .oracle import coulomb_gaussian, direct_convolution_at
from .runner import run

log = logging.getLogger("dipbec")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 2


def _guess_arg(text):
    if text.strip().lower() == "all":
        return ALL_KINDS
    try:
        kinds = {parse_kind(k) for k in text.split(",")}
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    return tuple(k for k in ALL_KINDS if k in kinds)


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser():
    ap = argparse.ArgumentParser(prog="dipbec", description="Ground states of rotating dipolar BECs.")
    ap.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="compute a ground state from a config file")
    s.add_argument("config", type=Path)
    s.add_argument("--out", type=Path, help="output directory (overrides [output] directory)")
    s.add_argument("--guess", type=_guess_arg, help="guess kind, comma-separated kinds, or 'all'")
    s.add_argument("--levels", type=_positive_int, help="cascade levels (overrides [grid] levels)")
    s.add_argument("--threads", type=_positive_int, help=f"FFT threads (default: ${_fft.THREADS_ENV})")

    p = sub.add_parser("potential-test", help="compare kernel-table potentials with quadrature oracles")
    p.add_argument("config", type=Path)
    p.add_argument("--points", type=_positive_int, default=5, help="dipolar oracle points (default 5)")
    p.add_argument("--threads", type=_positive_int)

    sl = sub.add_parser("slice", help="export a density slice of a field dump as CSV")
    sl.add_argument("dump", type=Path)
    sl.add_argument("--plane", default="z=0")
    sl.add_argument("--out", type=Path, required=True)
    return ap


def _solve(args):
    spec = load_config(args.config)
    arts = run(spec, guesses=args.guess, levels=args.levels, directory=args.out)
    if arts.best is None:
        print("no guess produced a solution", file=sys.stderr)
        return EXIT_ERROR
    r = arts.report
    kind = arts.best.kind.value
    res = arts.best.cascade.result
    print(f"guess        {kind}")
    print(f"status       {res.status}")
    print(f"energy       {r.E_total:.14f}")
    print(f"mu           {r.mu:.14f}")
    print(f"|virial|     {abs(r.virial):.4e}")
    print(f"|residual|   {res.res_norm:.4e}")
    print(f"iterations   {[lvl.iterations for lvl in arts.best.cascade.levels]}")
    for name, path in arts.files.items():
        print(f"{name:<12} {path}")
    return EXIT_OK if arts.converged else EXIT_NOT_CONVERGED


def _potential_test(args):
    spec = load_config(args.config)
    g = spec.grid
    table = precompute_kernel_coefficients(g, delta=spec.delta, eps_sog=spec.eps_sog)
    sigma = min(1.0, min(g.half_widths) / 8.0)
    norm = (2.0 * np.pi * sigma**2) ** -1.5
    rho = norm * np.exp(-g.r2 / (2.0 * sigma**2))
    u = coulomb_potential(rho, table)
    err_c = float(np.max(np.abs(u - coulomb_gaussian(np.sqrt(g.r2), sigma))))
    print(f"grid {g.N}  box half-widths {g.half_widths}  gaussian sigma {sigma:g}")
    print(f"kernel table: {table.n_terms} gaussians, {table.size} coefficients")
    print(f"coulomb  max |ATKM - erf closed form| = {err_c:.3e}")

    n = spec.params.n
    phi = dipolar_potential(rho, table, n)
    dens = lambda x, y, z: norm * np.exp(-(x * x + y * y + z * z) / (2.0 * sigma**2))  # noqa: E731
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(args.points):
        idx = tuple(int(rng.integers(c // 2 - c // 8, c // 2 + c // 8 + 1)) for c in g.N)
        pt = np.array([g.axes[a][idx[a]] for a in range(3)])
        ref = direct_convolution_at(dens, pt, "dipolar", n, support_radius=12.0 * sigma, tol=1e-9, fd_step=0.05 * sigma)
        worst = max(worst, abs(phi[idx] - ref))
        print(f"dipolar  x={np.array2string(pt, precision=3)}  ATKM {phi[idx]: .12e}  oracle {ref: .12e}")
    print(f"dipolar  max |ATKM - oracle| = {worst:.3e}")
    ok = err_c <= 1e-10 and worst <= 1e-6
    print("PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_NOT_CONVERGED


def _slice(args):
    phi, grid, _ = read_field(args.dump)
    text, idx, coord = export_slice(phi, grid, args.plane)
    args.out.write_text(text)
    print(f"wrote {args.out} (plane index {idx}, coordinate {coord:g})")
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "threads", None):
        _fft.set_threads(args.threads)
    handlers = {"solve": _solve, "potential-test": _potential_test, "slice": _slice}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        for path, msg in exc.problems:
            print(f"config error: {path}: {msg}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
