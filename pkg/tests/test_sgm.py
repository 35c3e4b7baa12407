import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lidarstereo.errors import InvalidInputError, InvalidParameterError
from lidarstereo.evaluation import evaluate
from lidarstereo.grids import CostVolume
from lidarstereo.guidance import SparseDisparitySet
from lidarstereo.sampler import SampleSpec, sample_sparse
from lidarstereo.sgm import (
    CENSUS_BITS,
    Guidance,
    SgmParams,
    aggregate_paths,
    census_transform,
    hamming_cost_volume,
    path_cost,
    run_sgm,
)
from lidarstereo.synthetic import random_dot_pair, two_level_disparity

from oracles import census_bits, exhaustive_scanline, popcount, sgm_penalty


class TestParams:
    def test_defaults(self):
        p = SgmParams()
        assert (p.p1, p.p2, p.paths) == (10.0, 150.0, 8)

    @pytest.mark.parametrize("kwargs", [dict(p1=20, p2=10), dict(paths=6), dict(d_min=5, d_max=2), dict(d_min=-1)])
    def test_rejects(self, kwargs):
        with pytest.raises(InvalidParameterError):
            SgmParams(**kwargs)


class TestCensus:
    def test_constant_image(self):
        assert np.all(census_transform(np.full((6, 7), 33.0)) == 0)

    def test_dim_and_bright_centre(self):
        img = np.full((5, 5), 100.0)
        img[2, 2] = 10.0
        assert census_transform(img)[2, 2] == 0
        img[2, 2] = 200.0
        assert census_transform(img)[2, 2] == 2**CENSUS_BITS - 1

    def test_matches_bitwise_oracle(self, rng):
        img = rng.integers(0, 6, size=(7, 7)).astype(float)
        desc = census_transform(img)
        for y in range(7):
            for x in range(7):
                assert int(desc[y, x]) == census_bits(img, x, y, 5, 5)


class TestHamming:
    def test_zero_at_true_shift(self, rng):
        right = rng.integers(0, 256, size=(20, 40)).astype(float)
        left = np.zeros_like(right)
        left[:, 6:] = right[:, :-6]
        left[:, :6] = rng.integers(0, 256, size=(20, 6))
        vol = hamming_cost_volume(census_transform(left), census_transform(right), 0, 10)
        # interior: both 5x5 windows lie fully inside the shifted region
        assert np.all(vol.cost[2:-2, 8:-2, 6] == 0)

    def test_all_bits_differ(self):
        left = np.array([[2**24 - 1, 2**24 - 1]], dtype=np.uint64)
        right = np.array([[0, 0]], dtype=np.uint64)
        vol = hamming_cost_volume(left, right, 0, 1)
        assert vol.cost[0, 0, 0] == 24 and vol.cost[0, 1, 1] == 24

    def test_out_of_range_is_worst(self, rng):
        desc = rng.integers(0, 2**24, size=(3, 8)).astype(np.uint64)
        vol = hamming_cost_volume(desc, desc, 2, 12)
        assert np.all(vol.cost[:, :2, 0] == 24)
        assert np.all(vol.cost[:, :, 10] == 24)  # d = 12 exceeds the width
        assert np.all(vol.cost[:, 2:, 0] >= 0) and vol.cost.max() <= 24

    def test_popcount_oracle(self, rng):
        left = rng.integers(0, 2**24, size=(10, 30)).astype(np.uint64)
        right = rng.integers(0, 2**24, size=(10, 30)).astype(np.uint64)
        vol = hamming_cost_volume(left, right, 3, 20)
        for _ in range(100):
            y, x, d = int(rng.integers(10)), int(rng.integers(30)), int(rng.integers(3, 21))
            expected = 24 if x - d < 0 else popcount(int(left[y, x]) ^ int(right[y, x - d]))
            assert vol.cost[y, x, d - 3] == expected

    def test_shape_mismatch(self):
        with pytest.raises(InvalidInputError):
            hamming_cost_volume(np.zeros((2, 2), np.uint64), np.zeros((2, 3), np.uint64), 0, 1)


class TestAggregation:
    def test_single_pixel_each_path_is_identity(self, rng):
        vol = CostVolume(rng.uniform(0, 24, size=(1, 1, 9)))
        for dx, dy in [(1, 0), (-1, 0), (0, 1), (1, -1)]:
            np.testing.assert_array_equal(path_cost(vol.cost, dx, dy, 10, 150), vol.cost)
        np.testing.assert_allclose(aggregate_paths(vol, SgmParams(d_max=8)).cost, 8 * vol.cost, rtol=1e-14)

    def test_scanline_matches_exhaustive_dp(self, rng):
        for _ in range(20):
            n, levels = int(rng.integers(2, 6)), int(rng.integers(2, 5))
            cost = rng.integers(0, 25, size=(n, levels)).astype(float)
            p1, p2 = sorted(rng.integers(0, 40, size=2).astype(float))
            got = path_cost(cost[None], 1, 0, p1, p2)[0]
            np.testing.assert_array_equal(got, exhaustive_scanline(cost, sgm_penalty(p1, p2)))
            # the reverse direction is the mirrored problem
            got = path_cost(cost[None], -1, 0, p1, p2)[0]
            np.testing.assert_array_equal(got, exhaustive_scanline(cost[::-1], sgm_penalty(p1, p2))[::-1])

    def test_vertical_and_diagonal_follow_their_lines(self, rng):
        cost = rng.integers(0, 25, size=(4, 4, 3)).astype(float)
        pen = sgm_penalty(10.0, 30.0)
        down = path_cost(cost, 0, 1, 10.0, 30.0)
        np.testing.assert_array_equal(down[:, 2], exhaustive_scanline(cost[:, 2], pen))
        diag = path_cost(cost, 1, 1, 10.0, 30.0)
        line = np.stack([cost[i, i] for i in range(4)])
        np.testing.assert_array_equal(np.stack([diag[i, i] for i in range(4)]), exhaustive_scanline(line, pen))

    @pytest.mark.parametrize("paths", [4, 8])
    def test_zero_penalties_sum_paths(self, rng, paths):
        vol = CostVolume(rng.uniform(0, 24, size=(5, 6, 7)))
        out = aggregate_paths(vol, SgmParams(d_max=6, p1=0, p2=0, paths=paths))
        np.testing.assert_allclose(out.cost, paths * vol.cost, rtol=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(0, 20), st.floats(0, 100), st.integers(0, 20))
    def test_constant_shift_per_pixel(self, seed, p1, extra, shift):
        rng = np.random.default_rng(seed)
        cost = rng.integers(0, 25, size=(1, 6, 5)).astype(float)
        x = int(rng.integers(6))
        shifted = cost.copy()
        shifted[0, x] += shift
        a = path_cost(cost, 1, 0, p1, p1 + extra)
        b = path_cost(shifted, 1, 0, p1, p1 + extra)
        expected = a.copy()
        expected[0, x] += shift
        np.testing.assert_allclose(b, expected, atol=1e-9)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_bounded_below_and_finite(self, seed):
        rng = np.random.default_rng(seed)
        vol = CostVolume(rng.uniform(0, 24, size=(4, 5, 6)))
        for dx, dy in [(1, 0), (0, -1), (-1, 1)]:
            lr = path_cost(vol.cost, dx, dy, 10, 150)
            assert np.all(np.isfinite(lr))
            assert np.all(lr >= vol.cost - 1e-12)  # the subtracted minimum never exceeds the carried term
        total = aggregate_paths(vol, SgmParams(d_max=5))
        assert np.all(total.cost >= 8 * vol.cost - 1e-9)


def constant_scene(seed=3, h=48, w=64, d=5):
    return random_dot_pair(np.full((h, w), float(d)), seed=seed)


class TestRunSgm:
    def test_constant_disparity(self):
        left, right, _ = constant_scene()
        disp = run_sgm(left, right, SgmParams(d_max=15))
        interior = disp[4:-4, 5 + 4:-4]
        assert np.mean(np.abs(interior - 5) <= 0.5) >= 0.95

    def test_riverbed_not_worse_than_unguided(self):
        gt = two_level_disparity(64, 64)
        left, right, gt = random_dot_pair(gt, seed=1, dot_size=2)
        guide, holdout = sample_sparse(gt, SampleSpec(percentage=0.05, seed=1))
        params = SgmParams(d_max=20)
        base = evaluate(run_sgm(left, right, params), holdout)
        guided = evaluate(run_sgm(left, right, params, Guidance("riverbed", guide)), holdout)
        assert guided.avg_error <= base.avg_error

    @pytest.mark.parametrize("mode", ["gauss", "riverbed"])
    def test_empty_guidance_bit_identical(self, mode):
        left, right, _ = constant_scene(seed=4, h=24, w=32)
        params = SgmParams(d_max=10)
        base = run_sgm(left, right, params)
        guided = run_sgm(left, right, params, Guidance(mode, SparseDisparitySet.empty()))
        assert guided.tobytes() == base.tobytes()

    def test_guidance_touches_only_modulated_slice(self):
        left, right, _ = constant_scene(seed=5, h=20, w=24)
        stages = {}
        run_sgm(left, right, SgmParams(d_max=9), Guidance("gauss", SparseDisparitySet.from_points([(12, 9, 5.0)])), stages)
        changed = np.any(stages["guided"].cost != stages["cost"].cost, axis=2)
        assert changed[9, 12] and changed.sum() == 1

    def test_size_mismatch(self):
        with pytest.raises(InvalidInputError):
            run_sgm(np.zeros((4, 4)), np.zeros((4, 5)), SgmParams(d_max=2))
