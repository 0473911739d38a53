import numpy as np
import pytest

from dipbec.atkm import precompute_kernel_coefficients
from dipbec.cascade import (
    CascadeSchedule,
    LevelError,
    build_tables,
    level_tolerance,
    run_cascade,
    spectral_prolong,
)
from dipbec.grid import Grid
from dipbec.guesses import make_initial
from dipbec.model import GPEModel, ModelParams
from dipbec.pcg import StoppingCriterion, minimize


class TestSchedule:
    def test_counts(self):
        s = CascadeSchedule(Grid(16, (1, 1, 1), (64, 64, 32)), levels=3)
        assert s.base_counts == (16, 16, 8)
        assert [g.N for g in s.grids] == [(16, 16, 8), (32, 32, 16), (64, 64, 32)]
        assert s.grid(2).same_as(s.fine)

    def test_tolerances(self):
        s = CascadeSchedule(Grid(16, (1, 1, 1), (64, 64, 64)), levels=3, eps=1e-12)
        assert [st.eps for st in s.stops] == pytest.approx([1e-4, 1e-6, 1e-12])
        assert level_tolerance(1e-3, 0, 3) == 1e-3

    @pytest.mark.parametrize("N, levels", [((20, 20, 20), 3), ((8, 8, 8), 3), ((32, 32, 32), 0)])
    def test_invalid(self, N, levels):
        with pytest.raises(ValueError):
            CascadeSchedule(Grid(8, (1, 1, 1), N), levels=levels)


class TestProlong:
    def test_resolved_mode_exact(self):
        c = Grid(4.0, (1, 0.5, 1), (8, 8, 8))
        f = Grid(4.0, (1, 0.5, 1), (16, 16, 16))

        def mode(g):
            X, Y, Z = g.coords
            return np.exp(1j * (np.pi / 4 * (X + 4) * 2 + np.pi / 2 * (Y + 2) * 3 - np.pi / 4 * (Z + 4)))

        out = spectral_prolong(c.normalize(mode(c)), c, f)
        assert np.max(np.abs(out - f.normalize(mode(f)))) <= 1e-13

    def test_real_field_with_nyquist_stays_real(self, rng):
        c = Grid(4.0, (1, 1, 1), (8, 8, 8))
        f = Grid(4.0, (1, 1, 1), (16, 16, 16))
        out = spectral_prolong(c.normalize(rng.standard_normal(c.N) + 0j), c, f)
        assert np.max(np.abs(out.imag)) <= 1e-14

    def test_interpolates_coarse_points(self, rng):
        c = Grid(4.0, (1, 1, 1), (8, 8, 8))
        f = Grid(4.0, (1, 1, 1), (16, 16, 16))
        phi = c.normalize(rng.standard_normal(c.N) + 1j * rng.standard_normal(c.N))
        out = spectral_prolong(phi, c, f)
        s = out[::2, ::2, ::2]
        ratio = s / phi
        assert np.allclose(ratio, ratio.flat[0], rtol=1e-12)
        assert f.norm(out) == pytest.approx(1.0, abs=1e-14)

    def test_incompatible(self):
        with pytest.raises(ValueError):
            spectral_prolong(np.zeros((8, 8, 8)), Grid(4, (1, 1, 1), (8, 8, 8)), Grid(4, (1, 1, 1), (24, 24, 24)))
        with pytest.raises(ValueError):
            spectral_prolong(np.zeros((8, 8, 8)), Grid(4, (1, 1, 1), (8, 8, 8)), Grid(5, (1, 1, 1), (16, 16, 16)))

    def test_prolonged_energy_error_decreases(self):
        p = ModelParams()
        fine = Grid(8.0, (1, 1, 1), (64, 64, 64))
        m_fine = GPEModel(fine, p)
        gaps = []
        for n in (16, 32):
            c = Grid(8.0, (1, 1, 1), (n, n, n))
            res = minimize(make_initial("a", c, p), GPEModel(c, p), StoppingCriterion(1e-11))
            g = c
            phi = res.phi
            while g.N[0] < 64:
                nxt = Grid(8.0, (1, 1, 1), tuple(2 * k for k in g.N))
                phi, g = spectral_prolong(phi, g, nxt), nxt
            gaps.append(abs(m_fine.energy(phi) - 1.5))
        assert gaps[1] < 1e-3 * gaps[0]


class TestRunCascade:
    def test_single_level_is_direct(self, grid16, table16):
        p = ModelParams(beta=100, lam=80, omega=0.2)
        s = CascadeSchedule(grid16, levels=1, eps=1e-10)
        phi0 = make_initial("c", grid16, p)
        cas = run_cascade(s, p, phi0, [table16])
        direct = minimize(phi0, GPEModel(grid16, p, table16), StoppingCriterion(1e-10))
        assert cas.report.E_total == direct.report.E_total
        assert cas.finest_iterations == direct.iterations
        assert np.array_equal(cas.phi, direct.phi)

    def test_three_levels_match_direct(self):
        p = ModelParams(beta=100, lam=80, omega=0.2)
        fine = Grid(8.0, (1, 1, 1), (32, 32, 32))
        s = CascadeSchedule(fine, levels=3, eps=1e-11)
        tables = build_tables(s, p)
        cas = run_cascade(s, p, make_initial("c", s.grid(0), p), tables)
        direct = minimize(make_initial("c", fine, p), GPEModel(fine, p, tables[-1]), StoppingCriterion(1e-11))
        assert cas.converged and direct.converged
        assert cas.report.E_total == pytest.approx(direct.report.E_total, abs=1e-9)
        assert len(cas.levels) == 3 and len(cas.handoff_energies) == 2

    def test_no_dipoles_no_tables(self, grid16):
        s = CascadeSchedule(grid16, levels=2)
        assert build_tables(s, ModelParams(beta=10)) == [None, None]

    def test_wrong_table_count(self, grid16, table16):
        s = CascadeSchedule(grid16, levels=2)
        p = ModelParams(lam=1.0)
        with pytest.raises(ValueError):
            run_cascade(s, p, make_initial("a", s.grid(0), p), [table16])

    def test_errors_carry_level(self, grid16, monkeypatch):
        import dipbec.cascade as cascade

        def boom(*a, **k):
            raise RuntimeError("no")

        monkeypatch.setattr(cascade, "minimize", boom)
        s = CascadeSchedule(grid16, levels=2)
        p = ModelParams()
        with pytest.raises(LevelError) as info:
            run_cascade(s, p, make_initial("a", s.grid(0), p), [None, None])
        assert info.value.level == 0

    def test_tables_per_level(self):
        fine = Grid(8.0, (1, 1, 1), (16, 16, 16))
        s = CascadeSchedule(fine, levels=2)
        tabs = build_tables(s, ModelParams(lam=1.0))
        assert [t.grid.N for t in tabs] == [(8, 8, 8), (16, 16, 16)]
        assert np.allclose(tabs[1].coefficients, precompute_kernel_coefficients(fine).coefficients, atol=1e-15)
