"""
Preconditioned Riemannian conjugate gradients on the unit sphere of grid functions.

One outer iteration:

1. dipolar potential ``Phi_n`` of ``|phi_n|^2`` (carried over from the last step);
2. residual ``r_n = H phi_n - mu_n phi_n``, ``mu_n = <H phi_n, phi_n>``;
3. direction ``p_n = J(-P r_n) + beta_n J(p_{n-1})`` with the clamped
   Polak-Ribiere coefficient;
4. step from the quadratic model of ``t -> E(R(t p_n))``, falling back to
   steepest descent when ``p_n`` is not a descent direction and to ``t = 0.3``
   when the model has no minimum, then halved until the energy decreases;
5. great-circle retraction.

Iteration stops once ``max |phi_{n+1} - phi_n| <= eps``.
"""

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import _fft
from .model import GPEModel

log = logging.getLogger(__name__)

__all__ = [
    "StoppingCriterion",
    "SolverState",
    "IterationRecord",
    "MinimizeResult",
    "StagnationError",
    "PositivityError",
    "Preconditioner",
    "project_tangent",
    "retract",
    "residual",
    "apply_preconditioner",
    "cg_beta",
    "step_size",
    "minimize",
]

DEFAULT_STEP = 0.3
MAX_HALVINGS = 50


class StagnationError(RuntimeError):
    """Step halving failed to produce an energy decrease."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class PositivityError(ValueError):
    """The potential part of the preconditioner is not positive definite."""


@dataclass
class StoppingCriterion:
    eps: float = 1e-10
    max_iter: int = 10_000

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"stopping tolerance must be positive, got {self.eps!r}")
        if int(self.max_iter) < 1:
            raise ValueError("max_iter must be at least 1")
        self.max_iter = int(self.max_iter)


@dataclass
class SolverState:
    phi: np.ndarray
    Phi: np.ndarray
    r: np.ndarray = None
    p: np.ndarray = None
    pairing: float = None
    t: float = None
    mu: float = None
    energy: float = None
    n: int = 0


@dataclass
class IterationRecord:
    n: int
    energy: float
    mu: float
    res_norm: float
    t: float
    dE: float
    step_inf: float
    corrected: bool
    halvings: int
    wall: float
    slope: float = float("nan")
    tangency: float = float("nan")
    norm_error: float = float("nan")


@dataclass
class MinimizeResult:
    phi: np.ndarray
    Phi: np.ndarray
    report: object
    trace: list = field(default_factory=list)
    converged: bool = False
    status: str = ""
    iterations: int = 0
    res_norm: float = float("nan")

    @property
    def energy(self):
        return self.report.E_total


# ---------------------------------------------------------------- manifold tools


def project_tangent(f, phi, grid):
    """``J_phi(f) = f - <f, phi> phi`` for unit-norm ``phi``."""
    return f - grid.inner(f, phi) * phi


def retract(phi, p, t, grid):
    """Great-circle step ``cos(t|p|) phi + sin(t|p|) p/|p|``."""
    pn = grid.norm(p)
    if pn == 0.0:
        return phi.copy()
    a = t * pn
    return np.cos(a) * phi + (np.sin(a) / pn) * p


def residual(phi, Phi, params_or_model, grid=None):
    """``(r, mu)`` with ``r = H phi - mu phi``."""
    model = _as_model(params_or_model, grid)
    hphi = model.hamiltonian(phi, Phi)
    mu = model.grid.inner(hphi, phi)
    return hphi - mu * phi, mu


def _as_model(params_or_model, grid, table=None):
    if isinstance(params_or_model, GPEModel):
        return params_or_model
    return GPEModel(grid, params_or_model, table)


class Preconditioner:
    """``P = P_V^{1/2} P_Lap P_V^{1/2}`` frozen at the current iterate.

    ``P_Lap = (alpha - Lap/2)^-1`` acts diagonally in Fourier space and
    ``P_V = (alpha + V + beta|phi|^2 + |lam| max(Phi, 0))^-1`` pointwise, with
    the shift ``alpha = <-Lap phi/2 + V phi + beta|phi|^2 phi, phi> + |lam <Phi phi, phi>|``.
    """

    def __init__(self, model, phi, Phi, alpha=None):
        g, p = model.grid, model.params
        rho = np.abs(phi) ** 2
        if alpha is None:
            hv = g.cell_volume
            alpha = model.kinetic_energy(phi) + hv * float(np.sum(model.V * rho))
            alpha += p.beta * hv * float(np.sum(rho * rho))
            if model.has_dipoles:
                alpha += abs(p.lam * hv * float(np.sum(Phi * rho)))
        self.alpha = float(alpha)
        denom = self.alpha + model.V + p.beta * rho
        if model.has_dipoles:
            # (1 + sign Phi) Phi / 2 = max(Phi, 0), sign(0) = 0
            denom = denom + abs(p.lam) * np.maximum(Phi, 0.0)
        if not np.all(denom > 0):
            raise PositivityError(
                f"preconditioner denominator is not positive (min {float(np.min(denom)):.3e})"
            )
        self.denominator = denom
        self.sqrt_pv = 1.0 / np.sqrt(denom)
        self.p_lap = 1.0 / (self.alpha + 0.5 * g.nu2)

    def __call__(self, r):
        s = self.sqrt_pv * r
        s = _fft.ifftn(self.p_lap * _fft.fftn(s))
        return self.sqrt_pv * s


def apply_preconditioner(r, phi, Phi, params_or_model, grid=None):
    model = _as_model(params_or_model, grid)
    return Preconditioner(model, phi, Phi)(r)


def cg_beta(r_n, pr_n, r_prev, pairing_prev, phi_n, grid):
    """Clamped Polak-Ribiere coefficient ``max(beta_PR, 0)``.

    ``pairing_prev`` is ``<r_{n-1}, J_{phi_{n-1}}(P r_{n-1})>``; a vanishing
    denominator restarts with steepest descent.
    """
    if not pairing_prev:
        return 0.0
    num = grid.inner(r_n - project_tangent(r_prev, phi_n, grid), project_tangent(pr_n, phi_n, grid))
    return max(num / pairing_prev, 0.0)


def curvature(model, phi, Phi, p, mu, hp=None):
    """Second-order coefficient ``<H p, p> + <g, p> - mu |p|^2`` of the energy along the retraction."""
    g, prm = model.grid, model.params
    if hp is None:
        hp = model.hamiltonian(phi, Phi, p)
    q = np.real(np.conj(phi) * p)
    w = prm.beta * q
    if model.has_dipoles:
        w = w + prm.lam * model.dipolar(q)
    # g = 2 phi (beta q + lam K q), so <g, p> = 2 h^3 sum (beta q + lam K q) q
    gp = 2.0 * g.cell_volume * float(np.sum(w * q))
    return g.inner(hp, p) + gp - mu * g.inner(p, p)


def step_size(phi, p, Phi, model, *, hphi=None, mu=None, steepest=None):
    """Guards (i) and (ii) of the step-size control.

    Returns ``(t, corrected, p, slope)``.  If ``<H phi, p> >= 0`` the direction
    is replaced by ``steepest`` (``J(-P r)``) and ``corrected`` is set.  ``t``
    minimises the quadratic model when its curvature is positive and is
    ``0.3`` otherwise; halving until the energy drops is left to the caller.
    """
    g = model.grid
    if hphi is None or mu is None:
        hphi = model.hamiltonian(phi, Phi)
        mu = g.inner(hphi, phi)
    slope = g.inner(hphi, p)
    corrected = False
    if slope >= 0.0 and steepest is not None:
        p = steepest
        slope = g.inner(hphi, p)
        corrected = True
    denom = curvature(model, phi, Phi, p, mu)
    t = -slope / denom if denom > 0.0 else DEFAULT_STEP
    return t, corrected, p, slope


def minimize(phi0, model, stop=None, *, callback=None):
    """Minimise the discrete energy on the unit sphere starting from ``phi0``.

    ``model`` is a :class:`~dipbec.model.GPEModel` (its kernel table must already
    be built).  Returns a :class:`MinimizeResult`; reaching ``max_iter`` returns
    the last (lowest-energy) iterate with ``converged=False``.
    """
    stop = stop or StoppingCriterion()
    g = model.grid
    phi = np.asarray(phi0, dtype=complex)
    g.check(phi, "initial field")
    nrm = g.norm(phi)
    if abs(nrm - 1.0) > 1e-10:
        raise ValueError(f"initial field must have unit norm, got {nrm!r}")

    Phi = model.potential(phi)
    state = SolverState(phi, Phi)
    trace = []
    p_prev = r_prev = None
    pairing_prev = None
    status = "max_iter"
    converged = False

    for n in range(stop.max_iter):
        tic = time.perf_counter()
        hphi = model.hamiltonian(phi, Phi)
        mu = g.inner(hphi, phi)
        r = hphi - mu * phi
        res_norm = g.norm(r)
        prec = Preconditioner(model, phi, Phi)
        pr = prec(r)
        steepest = -project_tangent(pr, phi, g)
        pairing = -g.inner(r, steepest)
        if p_prev is None:
            p = steepest
        else:
            beta = cg_beta(r, pr, r_prev, pairing_prev, phi, g)
            p = steepest + beta * project_tangent(p_prev, phi, g)

        t, corrected, p, slope = step_size(phi, p, Phi, model, hphi=hphi, mu=mu, steepest=steepest)
        state.r, state.p, state.mu, state.pairing, state.n = r, p, mu, pairing, n
        if g.norm(p) == 0.0 or slope >= 0.0:
            status, converged = "stationary", True
            break

        for halvings in range(MAX_HALVINGS + 1):
            new = retract(phi, p, t, g)
            new_Phi = model.potential(new)
            dE = model.energy_difference(new, new_Phi, phi, Phi)
            step_inf = float(np.max(np.abs(new - phi)))
            if dE < 0.0:
                break
            if step_inf <= stop.eps:
                # no representable decrease left at steps below the tolerance
                break
            t *= 0.5
        else:
            raise StagnationError(
                f"energy did not decrease after {MAX_HALVINGS} step halvings at iteration {n}",
                state,
            )
        if dE >= 0.0:
            status, converged = "precision", True
            break

        energy = model.energy(phi, Phi) if n == 0 else trace[-1].energy + trace[-1].dE
        rec = IterationRecord(
            n,
            energy,
            mu,
            res_norm,
            t,
            dE,
            step_inf,
            corrected,
            halvings,
            time.perf_counter() - tic,
            slope=slope,
            tangency=max(abs(g.inner(p, phi)), abs(g.inner(r, phi))),
            norm_error=abs(g.norm(new) - 1.0),
        )
        trace.append(rec)
        if callback is not None:
            callback(rec)
        if n % 50 == 0:
            log.debug("iter %d  E=%.14f  mu=%.10f  |r|=%.3e  t=%.3e", n, energy, mu, res_norm, t)

        phi, Phi = new, new_Phi
        state.phi, state.Phi, state.t = phi, Phi, t
        p_prev, r_prev, pairing_prev = p, r, pairing
        if step_inf <= stop.eps:
            status, converged = "converged", True
            break

    report = model.report(phi, Phi)
    r_final, _ = residual(phi, Phi, model)
    state.energy = report.E_total
    return MinimizeResult(
        phi=phi,
        Phi=Phi,
        report=report,
        trace=trace,
        converged=converged,
        status=status,
        iterations=len(trace),
        res_norm=g.norm(r_final),
    )
