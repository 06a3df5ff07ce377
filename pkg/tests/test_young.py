"""Young integration and calculus-identity residual oracles."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from holderflow.noise import NoiseSpec, SampledPath, restrict, sample_fbm
from holderflow.young import (
    IntegrandPath,
    check_chain_rule,
    check_integration_by_parts,
    check_ito_wentzell,
    young_integral,
    young_loeve_defect,
)


def _smooth_path(m=512, horizon=1.0):
    t = np.linspace(0.0, horizon, m + 1)
    return SampledPath(t, np.sin(2.0 * np.pi * t)[:, None], alpha=1.0)


class TestYoungIntegral:
    def test_refuses_subcritical_exponents(self):
        t = np.linspace(0.0, 1.0, 17)
        x = IntegrandPath(t, np.zeros(17), beta=0.4)
        y = SampledPath(t, t[:, None], alpha=0.5)
        with pytest.raises(ValueError, match="Young condition"):
            young_integral(x, y)

    def test_refuses_mismatched_grids(self):
        t1 = np.linspace(0.0, 1.0, 17)
        t2 = np.linspace(0.0, 1.0, 33)
        x = IntegrandPath(t1, np.ones(17), beta=1.0)
        y = SampledPath(t2, t2[:, None], alpha=1.0)
        with pytest.raises(ValueError, match="grid"):
            young_integral(x, y)

    def test_constant_integrand_exact(self):
        # ∫ c dY = c (Y_T - Y_0) with zero quadrature error.
        path = sample_fbm(NoiseSpec(hurst=0.75, resolution=128, seed=1))
        x = IntegrandPath(path.times, np.full(129, 2.5), beta=1.0)
        got = young_integral(x, path)
        assert got == pytest.approx(2.5 * path.values[-1, 0], abs=1e-14)

    def test_subinterval_additivity(self):
        path = sample_fbm(NoiseSpec(hurst=0.75, resolution=64, seed=4))
        x = IntegrandPath(path.times, np.cos(path.times), beta=1.0)
        mid = path.times[32]
        whole = young_integral(x, path)
        split = young_integral(x, path, 0.0, mid) + young_integral(x, path, mid, path.horizon)
        assert whole == pytest.approx(split, rel=1e-12)

    def test_matrix_integrand_contracts_increments(self):
        path = sample_fbm(NoiseSpec(hurst=0.75, dim=2, resolution=32, seed=7))
        mats = np.tile(np.eye(2), (33, 1, 1))
        x = IntegrandPath(path.times, mats, beta=1.0)
        got = young_integral(x, path)
        assert np.allclose(got, path.values[-1], atol=1e-14)

    @given(a=st.floats(-3, 3), b=st.floats(-3, 3))
    def test_linearity_in_integrand(self, a, b):
        path = sample_fbm(NoiseSpec(hurst=0.75, resolution=64, seed=2))
        f = np.sin(path.times)
        g = path.times**2
        xa = IntegrandPath(path.times, f, beta=1.0)
        xb = IntegrandPath(path.times, g, beta=1.0)
        xc = IntegrandPath(path.times, a * f + b * g, beta=1.0)
        lhs = young_integral(xc, path)
        rhs = a * young_integral(xa, path) + b * young_integral(xb, path)
        assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-12)

    def test_left_and_mid_rules_agree_under_refinement(self):
        # Both rules target the same limit; their gap must shrink with mesh.
        path = sample_fbm(NoiseSpec(hurst=0.75, resolution=4096, seed=3))
        gaps = []
        for stride in (16, 4, 1):
            p = restrict(path, stride)
            x = IntegrandPath(p.times, p.values[:, 0], beta=p.alpha)
            gaps.append(abs(young_integral(x, p, rule="left") - young_integral(x, p, rule="mid")))
        assert gaps[2] < gaps[1] < gaps[0]


class TestIntegrationByParts:
    def test_constant_paths_exact_zero(self):
        t = np.linspace(0.0, 1.0, 33)
        flat = SampledPath(t, np.zeros((33, 1)), alpha=1.0)
        assert check_integration_by_parts(flat, flat) == 0.0

    def test_residual_equals_quadratic_covariation_sum(self):
        # For left-point sums the identity defect is exactly Σ dX dY.
        x = sample_fbm(NoiseSpec(hurst=0.75, resolution=256, seed=5))
        y = sample_fbm(NoiseSpec(hurst=0.75, resolution=256, seed=6))
        residual = check_integration_by_parts(x, y)
        cross = abs(np.sum(np.diff(x.values[:, 0]) * np.diff(y.values[:, 0])))
        assert residual == pytest.approx(cross, rel=1e-10)

    def test_refuses_subcritical(self):
        t = np.linspace(0.0, 1.0, 9)
        p = SampledPath(t, t[:, None], alpha=0.45)
        with pytest.raises(ValueError):
            check_integration_by_parts(p, p)

    def test_decreases_under_refinement(self):
        x = sample_fbm(NoiseSpec(hurst=0.75, resolution=4096, seed=5))
        y = sample_fbm(NoiseSpec(hurst=0.75, resolution=4096, seed=6))
        res = [
            check_integration_by_parts(restrict(x, s), restrict(y, s))
            for s in (16, 4, 1)
        ]
        assert res[2] < res[1] < res[0]


class TestChainRule:
    def test_linear_function_exact_zero(self):
        path = sample_fbm(NoiseSpec(hurst=0.75, resolution=128, seed=0))
        res = check_chain_rule(lambda v: 4.0 * float(v[0]), lambda v: np.array([4.0]), path)
        assert res < 1e-12

    def test_refuses_subcritical(self):
        t = np.linspace(0.0, 1.0, 9)
        p = SampledPath(t, t[:, None], alpha=0.4)
        with pytest.raises(ValueError):
            check_chain_rule(lambda v: float(v[0]) ** 2, lambda v: 2.0 * v, p, gamma=1.0)

    def test_square_residual_small_on_smooth_path(self):
        res = check_chain_rule(
            lambda v: float(v[0]) ** 2, lambda v: 2.0 * v, _smooth_path(2048)
        )
        assert res < 1e-6

    def test_decreases_under_refinement_on_fbm(self):
        path = sample_fbm(NoiseSpec(hurst=0.75, resolution=4096, seed=8))
        res = [
            check_chain_rule(
                lambda v: float(v[0]) ** 3, lambda v: 3.0 * v**2, restrict(path, s)
            )
            for s in (16, 4, 1)
        ]
        assert res[2] < res[1] < res[0]


class TestItoWentzell:
    def test_flat_field_exact_zero(self):
        # g0 constant and h x-independent: every term is computed exactly.
        y = sample_fbm(NoiseSpec(hurst=0.75, resolution=64, seed=1))
        x = sample_fbm(NoiseSpec(hurst=0.75, resolution=64, seed=2))
        res = check_ito_wentzell(
            lambda grid: np.full_like(grid, 1.5),
            lambda t, grid: np.full_like(grid, 0.7),
            y,
            x,
        )
        assert res < 1e-12

    def test_refuses_vector_paths(self):
        y = sample_fbm(NoiseSpec(hurst=0.75, dim=2, resolution=32))
        x = sample_fbm(NoiseSpec(hurst=0.75, resolution=32))
        with pytest.raises(ValueError, match="scalar"):
            check_ito_wentzell(np.sin, lambda t, g: np.cos(g), y, x)

    def test_residual_small_on_fbm(self):
        y = sample_fbm(NoiseSpec(hurst=0.75, resolution=1024, seed=3))
        x = sample_fbm(NoiseSpec(hurst=0.75, resolution=1024, seed=4))
        res = check_ito_wentzell(
            np.sin, lambda t, grid: 0.5 * np.cos(grid + t), y, x
        )
        assert res < 1e-3


class TestYoungLoeve:
    def test_constant_integrand_zero_defect(self):
        path = sample_fbm(NoiseSpec(hurst=0.75, resolution=64, seed=9))
        x = IntegrandPath(path.times, np.ones(65), beta=1.0)
        defect, factor = young_loeve_defect(x, path, 0.0, path.horizon)
        assert defect < 1e-15
        assert factor < 1e-12

    def test_defect_within_envelope_on_fbm_pairs(self):
        # The empirical factor is the constant of the one-step estimate;
        # it must stay O(1) across windows.
        x_path = sample_fbm(NoiseSpec(hurst=0.75, resolution=512, seed=10))
        y_path = sample_fbm(NoiseSpec(hurst=0.75, resolution=512, seed=11))
        x = IntegrandPath(x_path.times, x_path.values[:, 0], beta=x_path.alpha)
        nx = x.seminorm
        from holderflow.noise import holder_seminorm

        ny = holder_seminorm(y_path, y_path.alpha)
        factors = []
        for i in range(0, 512 - 32, 32):
            s, t = y_path.times[i], y_path.times[i + 32]
            _, f = young_loeve_defect(x, y_path, s, t, norm_x=nx, norm_y=ny)
            factors.append(f)
        assert max(factors) < 10.0
