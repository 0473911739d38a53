import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_field
from dipbec import pcg
from dipbec.grid import Grid
from dipbec.guesses import make_initial
from dipbec.model import GPEModel, ModelParams
from dipbec.pcg import (
    PositivityError,
    Preconditioner,
    StagnationError,
    StoppingCriterion,
    apply_preconditioner,
    cg_beta,
    minimize,
    project_tangent,
    residual,
    retract,
    step_size,
)


@pytest.fixture(scope="module")
def grid32():
    return Grid(8.0, (1.0, 1.0, 1.0), (32, 32, 32))


@pytest.fixture(scope="module")
def harmonic_run(grid32):
    m = GPEModel(grid32, ModelParams())
    return minimize(make_initial("c", grid32, m.params), m, StoppingCriterion(1e-10))


@pytest.fixture(scope="module")
def full_run(full_model16, grid16):
    phi0 = make_initial("c", grid16, full_model16.params)
    return minimize(phi0, full_model16, StoppingCriterion(1e-10))


class TestProjection:
    def test_self_projection(self, grid16, rng):
        phi = random_field(grid16, rng)
        assert grid16.norm(project_tangent(phi, phi, grid16)) <= 1e-13

    def test_tangent_unchanged(self, grid16, rng):
        phi = random_field(grid16, rng)
        f = project_tangent(random_field(grid16, rng), phi, grid16)
        assert np.max(np.abs(project_tangent(f, phi, grid16) - f)) <= 1e-13

    @settings(max_examples=10, deadline=None)
    @given(st.integers(0, 10_000))
    def test_idempotent_and_orthogonal(self, grid16, seed):
        rng = np.random.default_rng(seed)
        phi = random_field(grid16, rng)
        f = 3.0 * random_field(grid16, rng)
        once = project_tangent(f, phi, grid16)
        assert abs(grid16.inner(once, phi)) <= 1e-12
        assert np.max(np.abs(project_tangent(once, phi, grid16) - once)) <= 1e-13


class TestRetraction:
    def test_zero_step(self, grid16, rng):
        phi = random_field(grid16, rng)
        p = project_tangent(random_field(grid16, rng), phi, grid16)
        assert np.array_equal(retract(phi, p, 0.0, grid16), phi)

    def test_zero_direction(self, grid16, rng):
        phi = random_field(grid16, rng)
        assert np.array_equal(retract(phi, np.zeros_like(phi), 0.7, grid16), phi)

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 10_000), st.floats(0.0, 10.0))
    def test_unit_norm(self, grid16, seed, t):
        rng = np.random.default_rng(seed)
        phi = random_field(grid16, rng)
        p = project_tangent(random_field(grid16, rng), phi, grid16)
        assert abs(grid16.norm(retract(phi, p, t, grid16)) - 1.0) <= 1e-13

    def test_second_order(self, grid16, rng):
        phi = random_field(grid16, rng)
        p = project_tangent(random_field(grid16, rng), phi, grid16)
        errs = [grid16.norm(retract(phi, p, t, grid16) - (phi + t * p)) for t in (1e-2, 5e-3, 2.5e-3)]
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(np.abs(orders - 2.0) < 0.05)


class TestResidual:
    def test_eigenstate(self):
        g = Grid(10.0, (1, 1, 1), (48, 48, 48))
        phi = g.normalize(np.exp(-0.5 * g.r2) + 0j)
        r, mu = residual(phi, np.zeros(g.N), ModelParams(), g)
        assert g.norm(r) <= 1e-10
        assert mu == pytest.approx(1.5, abs=1e-12)

    def test_orthogonal(self, full_model16, grid16, rng):
        phi = random_field(grid16, rng)
        r, _ = residual(phi, full_model16.potential(phi), full_model16)
        assert abs(grid16.inner(r, phi)) <= 1e-11


class TestPreconditioner:
    def test_positive_on_random_states(self, full_model16, grid16, rng):
        for _ in range(5):
            phi = random_field(grid16, rng)
            P = Preconditioner(full_model16, phi, full_model16.potential(phi))
            assert np.all(P.denominator > 0)
            r = random_field(grid16, rng)
            assert grid16.inner(P(r), r) > 0

    def test_smoothing(self, grid16):
        m = GPEModel(grid16, ModelParams(beta=1.0))
        m.V = np.zeros(grid16.N)
        phi = grid16.normalize(np.ones(grid16.N, dtype=complex))
        P = Preconditioner(m, phi, np.zeros(grid16.N))
        X, _, _ = grid16.coords
        norms = []
        for k in range(1, 8):
            w = np.exp(1j * np.pi * k * (X + grid16.L) / grid16.L) * np.ones(grid16.N)
            norms.append(grid16.norm(P(w)))
        assert np.all(np.diff(norms) < 0)

    def test_non_positive_raises(self, grid16):
        m = GPEModel(grid16, ModelParams(beta=-1e5))
        phi = make_initial("a", grid16, m.params)
        with pytest.raises(PositivityError):
            apply_preconditioner(phi, phi, np.zeros(grid16.N), m)


class TestBeta:
    def test_transported_residual(self, grid16, rng):
        phi = random_field(grid16, rng)
        r_prev = random_field(grid16, rng)
        r = project_tangent(r_prev, phi, grid16)
        assert cg_beta(r, random_field(grid16, rng), r_prev, 1.3, phi, grid16) == 0.0

    def test_clamped(self, grid16, rng):
        phi = random_field(grid16, rng)
        r_prev = project_tangent(random_field(grid16, rng), phi, grid16)
        r = 0.5 * r_prev
        assert cg_beta(r, r, r_prev, 1.0, phi, grid16) == 0.0

    def test_zero_denominator(self, grid16, rng):
        phi = random_field(grid16, rng)
        r = random_field(grid16, rng)
        assert cg_beta(r, r, 0.5 * r, 0.0, phi, grid16) == 0.0

    def test_positive_value(self, grid16, rng):
        phi = random_field(grid16, rng)
        r = project_tangent(random_field(grid16, rng), phi, grid16)
        b = cg_beta(r, r, np.zeros_like(r), 2.0, phi, grid16)
        assert b == pytest.approx(grid16.inner(r, r) / 2.0)


class TestStepSize:
    def _setup(self, model, grid, rng):
        phi = random_field(grid, rng)
        Phi = model.potential(phi)
        r, mu = residual(phi, Phi, model)
        steep = -project_tangent(Preconditioner(model, phi, Phi)(r), phi, grid)
        return phi, Phi, steep

    def test_quadratic_model(self, full_model16, grid16, rng, monkeypatch):
        phi, Phi, steep = self._setup(full_model16, grid16, rng)
        slope = grid16.inner(full_model16.hamiltonian(phi, Phi), steep)
        p = steep / -slope
        monkeypatch.setattr(pcg, "curvature", lambda *a, **k: 2.0)
        t, corrected, _, s = step_size(phi, p, Phi, full_model16, steepest=steep)
        assert s == pytest.approx(-1.0, rel=1e-12)
        assert t == pytest.approx(0.5, rel=1e-12)
        assert not corrected

    def test_default_step(self, full_model16, grid16, rng, monkeypatch):
        phi, Phi, steep = self._setup(full_model16, grid16, rng)
        monkeypatch.setattr(pcg, "curvature", lambda *a, **k: -1.0)
        t, _, _, _ = step_size(phi, steep, Phi, full_model16, steepest=steep)
        assert t == 0.3

    def test_ascent_direction_is_replaced(self, full_model16, grid16, rng):
        phi, Phi, steep = self._setup(full_model16, grid16, rng)
        t, corrected, p, s = step_size(phi, -steep, Phi, full_model16, steepest=steep)
        assert corrected and p is steep and s < 0 and t > 0


class TestMinimize:
    def test_harmonic_ground_state(self, harmonic_run):
        r = harmonic_run.report
        assert harmonic_run.converged
        assert r.E_total == pytest.approx(1.5, abs=1e-10)
        assert r.mu == pytest.approx(1.5, abs=1e-10)

    @pytest.mark.parametrize("run", ["harmonic_run", "full_run"])
    def test_trace_invariants(self, run, request):
        res = request.getfixturevalue(run)
        tr = res.trace
        assert len(tr) > 3
        assert all(rec.dE < 0 for rec in tr)
        e = [rec.energy for rec in tr] + [res.report.E_total]
        assert np.all(np.diff(e) < 1e-13)
        assert all(rec.slope < 0 for rec in tr)
        assert max(rec.tangency for rec in tr) <= 1e-10
        assert max(rec.norm_error for rec in tr) <= 1e-12
        assert all(rec.wall >= 0 for rec in tr)

    def test_full_model_stationary(self, full_run):
        assert full_run.converged
        assert full_run.res_norm <= 1e-8

    def test_gauge_robust(self, full_model16, grid16, full_run):
        phi0 = make_initial("c", grid16, full_model16.params)
        res = minimize(np.exp(0.9j) * phi0, full_model16, StoppingCriterion(1e-10))
        assert res.report.E_total == pytest.approx(full_run.report.E_total, abs=1e-9)

    def test_max_iter(self, full_model16, grid16):
        phi0 = make_initial("c", grid16, full_model16.params)
        res = minimize(phi0, full_model16, StoppingCriterion(1e-10, max_iter=3))
        assert not res.converged and res.status == "max_iter" and res.iterations == 3

    def test_stagnation(self, grid16, monkeypatch):
        m = GPEModel(grid16, ModelParams())
        monkeypatch.setattr(m, "energy_difference", lambda *a: 1.0)
        with pytest.raises(StagnationError) as info:
            minimize(make_initial("c", grid16, m.params), m, StoppingCriterion(1e-300))
        assert info.value.state is not None

    def test_not_normalised(self, grid16):
        m = GPEModel(grid16, ModelParams())
        with pytest.raises(ValueError):
            minimize(np.ones(grid16.N, dtype=complex), m)

    def test_callback(self, grid16):
        m = GPEModel(grid16, ModelParams())
        seen = []
        res = minimize(make_initial("a", grid16, m.params), m, callback=seen.append)
        assert seen == res.trace

    @pytest.mark.parametrize("eps, it", [(0.0, 10), (-1.0, 10), (1e-10, 0)])
    def test_bad_criterion(self, eps, it):
        with pytest.raises(ValueError):
            StoppingCriterion(eps, it)
