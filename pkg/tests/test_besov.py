"""Littlewood-Paley decomposition, Besov/Triebel norms, negative distances."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from holderflow.besov import (
    besov_norm,
    build_partition,
    deposit_nearest,
    dyadic_blocks,
    negative_distance,
    sobolev_embedding_check,
    triebel_norm,
)
from holderflow.fields import Grid


@pytest.fixture(scope="module")
def grid():
    return Grid(box=1.0, m=512, dim=1)


@pytest.fixture(scope="module")
def part(grid):
    return build_partition(grid)


class TestPartition:
    def test_rejects_lambda_outside_range(self, grid):
        with pytest.raises(ValueError, match="lambda"):
            build_partition(grid, lam=1.5)
        with pytest.raises(ValueError, match="lambda"):
            build_partition(grid, lam=1.0)

    def test_sums_to_one_on_lattice(self, part):
        total = np.sum(part.profiles, axis=0)
        assert np.max(np.abs(total - 1.0)) < 1e-12

    def test_blocks_two_apart_disjoint(self, part):
        profiles = part.profiles
        for i in range(profiles.shape[0]):
            for j in range(i + 2, profiles.shape[0]):
                assert np.max(np.abs(profiles[i] * profiles[j])) == 0.0

    def test_profiles_in_unit_interval(self, part):
        assert np.min(part.profiles) >= -1e-15
        assert np.max(part.profiles) <= 1.0 + 1e-15

    def test_two_dimensional_partition_sums_to_one(self):
        g2 = Grid(box=1.0, m=64, dim=2)
        p2 = build_partition(g2)
        assert np.max(np.abs(np.sum(p2.profiles, axis=0) - 1.0)) < 1e-12


class TestDecomposition:
    def test_reconstruction_exact(self, grid, part):
        rng = np.random.default_rng(0)
        f = rng.standard_normal(grid.m)
        dec = dyadic_blocks(f, part)
        assert np.max(np.abs(dec.reconstruct() - f)) < 1e-12

    def test_pure_mode_localized(self, grid, part):
        # A single Fourier mode lands only in blocks whose annulus covers it.
        k_index = 32
        f = np.cos(2 * np.pi * k_index * grid.nodes())
        dec = dyadic_blocks(f, part)
        radius = 2 * np.pi * k_index / part.r0
        active = [
            i
            for i, j in enumerate(part.j_range())
            if np.max(np.abs(dec.blocks[i])) > 1e-12
        ]
        for i in active:
            # Profile value at this frequency must be nonzero for the block.
            k_lattice = np.abs(2 * np.pi * np.fft.fftfreq(grid.m, d=grid.h))
            sel = np.argmin(np.abs(k_lattice - 2 * np.pi * k_index))
            assert part.profiles[i][sel] > 0.0
        assert 1 <= len(active) <= 2

    def test_low_frequency_cutoff_telescopes(self, grid, part):
        f = np.sin(2 * np.pi * 5 * grid.nodes())
        dec = dyadic_blocks(f, part)
        full = dec.low_frequency_cutoff(part.levels - 1)
        assert np.max(np.abs(full - f)) < 1e-12


class TestNorms:
    def test_refuses_p_out_of_range(self, part):
        with pytest.raises(ValueError):
            besov_norm(np.ones(512), 0.5, 1.0, 2.0, part)
        with pytest.raises(ValueError):
            triebel_norm(np.ones(512), 0.5, np.inf, 2.0, part)

    def test_besov_equals_triebel_at_p_q_two(self, grid, part):
        rng = np.random.default_rng(1)
        f = rng.standard_normal(grid.m)
        b = besov_norm(f, 0.7, 2.0, 2.0, part)
        t = triebel_norm(f, 0.7, 2.0, 2.0, part)
        assert abs(b - t) < 1e-10 * max(b, 1.0)

    def test_zero_field_zero_norm(self, part):
        assert besov_norm(np.zeros(512), -2.0, 2.0, 2.0, part) == 0.0

    @given(c=st.floats(min_value=0.1, max_value=100.0))
    def test_homogeneity(self, c, part):
        rng = np.random.default_rng(2)
        f = rng.standard_normal(512)
        a = besov_norm(f, -1.5, 2.0, 2.0, part)
        b = besov_norm(c * f, -1.5, 2.0, 2.0, part)
        assert b == pytest.approx(c * a, rel=1e-10)

    def test_smoothness_ordering(self, grid, part):
        # Higher smoothness weights high frequencies more.
        f = np.cos(2 * np.pi * 64 * grid.nodes())
        assert besov_norm(f, 1.0, 2.0, 2.0, part) > besov_norm(f, -1.0, 2.0, 2.0, part)


class TestDeposit:
    def test_mass_conservation_exact(self, grid):
        rng = np.random.default_rng(3)
        pts = rng.random((1000, 1))
        dep = deposit_nearest(pts, grid)
        assert np.sum(dep) * grid.cell_volume() == pytest.approx(1.0, abs=1e-14)

    def test_single_particle_single_node(self, grid):
        dep = deposit_nearest(np.array([[0.25]]), grid)
        assert np.count_nonzero(dep) == 1
        assert dep[128] == pytest.approx(1.0 / grid.cell_volume())

    @given(seed=st.integers(min_value=0, max_value=1000))
    def test_label_permutation_bitwise_invariant(self, seed, grid):
        rng = np.random.default_rng(4)
        pts = rng.random((257, 1))
        w = rng.standard_normal(257)
        perm = np.random.default_rng(seed).permutation(257)
        a = deposit_nearest(pts, grid, weights=w)
        b = deposit_nearest(pts[perm], grid, weights=w[perm])
        assert np.array_equal(a, b)

    def test_weighted_deposit_total(self, grid):
        pts = np.array([[0.1], [0.6]])
        w = np.array([2.0, -1.0])
        dep = deposit_nearest(pts, grid, weights=w)
        assert np.sum(dep) * grid.cell_volume() == pytest.approx(0.5)


class TestNegativeDistance:
    def test_identical_fields_zero(self, grid, part):
        f = np.sin(2 * np.pi * grid.nodes()) + 1.0
        assert negative_distance(f, f, 2.0, 2.0, part) == 0.0

    def test_warns_below_measure_threshold(self, grid, part):
        with pytest.warns(UserWarning, match="eta"):
            negative_distance(np.ones(512), np.zeros(512), 1.0, 2.0, part)

    def test_quantile_particles_vs_uniform_density_decreasing(self):
        g = Grid(box=1.0, m=4096, dim=1)
        p = build_partition(g)
        uniform = np.ones(g.m)
        dists = []
        for n in (64, 256, 1024):
            pts = ((np.arange(n) + 0.5) / n)[:, None]
            dep = deposit_nearest(pts, g)
            dists.append(negative_distance(dep, uniform, 2.0, 2.0, p))
        assert dists[2] < dists[1] < dists[0]


class TestSobolevEmbedding:
    def test_bounded_ratio_over_smooth_corpus(self, grid, part):
        rng = np.random.default_rng(5)
        ratios = []
        for _ in range(5):
            coef = rng.standard_normal(8) / (1 + np.arange(8)) ** 2
            x = grid.nodes()
            f = sum(c * np.cos(2 * np.pi * (k + 1) * x) for k, c in enumerate(coef))
            ratios.append(sobolev_embedding_check(f, 2.0, 2.0, part))
        assert max(ratios) < 50.0

    def test_refuses_subcritical_smoothness(self, part):
        with pytest.raises(ValueError):
            sobolev_embedding_check(np.ones(512), 0.2, 2.0, part)
