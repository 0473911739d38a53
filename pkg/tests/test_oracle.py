import numpy as np
import pytest

from conftest import gaussian_density
from dipbec.atkm import dipolar_potential, precompute_kernel_coefficients
from dipbec.grid import Grid
from dipbec.oracle import (
    OracleError,
    box_kernel_integral,
    coulomb_gaussian,
    direct_convolution_at,
    relative_error_E2,
)


def unit_gaussian(x, y, z):
    return (2 * np.pi) ** -1.5 * np.exp(-(x * x + y * y + z * z) / 2)


class TestE2:
    def test_identical(self, rng):
        f = rng.standard_normal((6, 6, 6)) + 1j * rng.standard_normal((6, 6, 6))
        m = relative_error_E2(f, f)
        assert m.E2 == 0.0 and m.kappa == pytest.approx(1.0)

    def test_phase(self, rng):
        f = rng.standard_normal((6, 6, 6)) + 1j * rng.standard_normal((6, 6, 6))
        m = relative_error_E2(np.exp(0.8j) * f, f)
        assert m.E2 <= 1e-14
        assert m.kappa == pytest.approx(np.exp(0.8j), abs=1e-14)

    def test_phase_of_either_argument(self, rng):
        f = rng.standard_normal((6, 6, 6)) + 1j * rng.standard_normal((6, 6, 6))
        g = f + 0.1 * rng.standard_normal((6, 6, 6))
        base = relative_error_E2(g, f).E2
        assert relative_error_E2(np.exp(2.1j) * g, f).E2 == pytest.approx(base, abs=1e-14)
        assert relative_error_E2(g, np.exp(-0.4j) * f).E2 == pytest.approx(base, abs=1e-14)

    def test_orthogonal(self):
        a = np.zeros((4, 4, 4), dtype=complex)
        b = np.zeros((4, 4, 4), dtype=complex)
        a[0, 0, 0] = 1
        b[1, 0, 0] = 1
        m = relative_error_E2(a, b)
        assert m.E2 == pytest.approx(1.0) and m.kappa == 0

    def test_zero_reference(self):
        with pytest.raises(ValueError):
            relative_error_E2(np.ones(4), np.zeros(4))


class TestClosedForm:
    def test_origin_series(self):
        assert coulomb_gaussian(0.0) == pytest.approx(1 / (2 * np.pi) ** 1.5, rel=1e-15)
        assert coulomb_gaussian(1e-6) == pytest.approx(coulomb_gaussian(0.0), rel=1e-11)


class TestConvolution:
    def test_zero_density(self):
        f = lambda x, y, z: 0.0 * x  # noqa: E731
        assert direct_convolution_at(f, (0.2, 0.0, 0.1)) == 0.0
        assert direct_convolution_at(f, (0.2, 0.0, 0.1), "dipolar", (0, 0, 1)) == 0.0

    @pytest.mark.parametrize("pt", [(0, 0, 0), (1.0, 0.5, -0.3), (3.0, 2.0, 1.0)])
    def test_coulomb_gaussian(self, pt):
        r = np.linalg.norm(pt)
        assert direct_convolution_at(unit_gaussian, pt) == pytest.approx(coulomb_gaussian(r), abs=1e-8)

    def test_dipolar_against_kernel_table(self):
        g = Grid(16.0, (1, 1, 1), (64, 64, 64))
        table = precompute_kernel_coefficients(g)
        n = np.array([0.0, 0.6, 0.8])
        phi = dipolar_potential(gaussian_density(g), table, n)
        rng = np.random.default_rng(7)
        for _ in range(3):
            idx = tuple(int(i) for i in rng.integers(26, 38, 3))
            pt = [g.axes[a][idx[a]] for a in range(3)]
            assert direct_convolution_at(unit_gaussian, pt, "dipolar", n, tol=1e-9) == pytest.approx(phi[idx], abs=1e-6)

    def test_exact_second_derivative(self):
        def d2z(x, y, z):
            return (z * z - 1) * unit_gaussian(x, y, z)

        pt = (0.4, -0.2, 0.7)
        a = direct_convolution_at(unit_gaussian, pt, "dipolar", (0, 0, 1), second_derivative=d2z)
        b = direct_convolution_at(unit_gaussian, pt, "dipolar", (0, 0, 1))
        assert a == pytest.approx(b, abs=1e-9)

    def test_refinement_converges(self):
        from dipbec.oracle import _shell_integral

        pt = np.array([1.0, 0.5, -0.3])
        ref = coulomb_gaussian(np.linalg.norm(pt))
        errs = [abs(_shell_integral(unit_gaussian, pt, 13.0, panel, 6, nt, 2 * nt)[0] - ref) for panel, nt in [(4.0, 6), (2.0, 9), (1.0, 14)]]
        assert errs[0] > errs[1] > errs[2]

    def test_budget(self):
        with pytest.raises(OracleError):
            direct_convolution_at(unit_gaussian, (0.5, 0, 0), tol=1e-30, budget=2_000_000)

    def test_bad_kernel(self):
        with pytest.raises(ValueError):
            direct_convolution_at(unit_gaussian, (0, 0, 0), "yukawa")
        with pytest.raises(ValueError):
            direct_convolution_at(unit_gaussian, (0, 0, 0), "dipolar")


class TestBoxKernel:
    def test_cube_zero_mode(self):
        # int over the unit corner cube of 1/|y| is 3/2 ln(2 + sqrt 3) - pi/4
        ref = 8 * (1.5 * np.log(2 + np.sqrt(3)) - np.pi / 4) / (4 * np.pi)
        assert box_kernel_integral((0, 0, 0), (1, 1, 1)) == pytest.approx(ref, rel=1e-13)

    def test_order_convergence(self):
        nu = (np.pi / 8, np.pi / 4, 0.0)
        a = box_kernel_integral(nu, (8.0, 8.0, 4.0), order=48)
        b = box_kernel_integral(nu, (8.0, 8.0, 4.0), order=64)
        assert a == pytest.approx(b, rel=1e-12)
