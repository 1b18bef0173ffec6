"""Tests for dataset generation, splits and persistence."""

import numpy as np
import pytest

from vfmlab.datasets import (
    CSV_COLUMNS,
    Dataset,
    Provenance,
    _resample_nonpositive,
    calibration_reference_inputs,
    dataset_filename,
    generate_d2,
    generate_d3,
    gor_to_fractions,
    load_dataset,
    sample_d1,
    save_dataset,
    split_random,
    split_temporal,
    stationary_inputs,
)
from vfmlab.process import DEFAULT_FLOW_SCALE, ProcessSpec, calibrate_flow_scale, evaluate_process


class TestSampleD1:
    def test_default_split_sizes(self):
        ds = sample_d1(10_000, 0.0, seed=1)
        assert len(ds) == 10_000
        assert len(ds.train_idx) == 6400
        assert len(ds.val_idx) == 1600
        assert len(ds.test_idx) == 2000

    def test_simplex_holds(self):
        ds = sample_d1(2000, 0.0, seed=1)
        total = ds.x[:, 4] + ds.x[:, 5] + ds.eta_gas
        np.testing.assert_allclose(total, 1.0, atol=1e-12)

    def test_marginal_hard_bounds(self):
        ds = sample_d1(5000, 0.0, seed=2)
        assert np.all((ds.x[:, 0] >= 30.0) & (ds.x[:, 0] <= 70.0))
        assert np.all((ds.x[:, 3] >= 0.0) & (ds.x[:, 3] <= 100.0))
        assert np.all((ds.x[:, 4] >= 0.0) & (ds.x[:, 4] <= 0.8))
        assert np.all((ds.x[:, 5] >= 0.0) & (ds.x[:, 5] <= 0.2))

    def test_p1_mean_matches_clt_band(self):
        # U(30,70) has mean 50 and sd 40/sqrt(12); a 10000-draw mean
        # stays within 0.7 (about 20 estimator sigmas) of 50.
        ds = sample_d1(10_000, 0.0, seed=3)
        assert abs(np.mean(ds.x[:, 0]) - 50.0) < 0.7

    def test_bit_reproducible(self):
        a = sample_d1(1000, 2.0, seed=4)
        b = sample_d1(1000, 2.0, seed=4)
        for attr in ("t", "x", "q_true", "y", "train_idx", "val_idx", "test_idx"):
            np.testing.assert_array_equal(getattr(a, attr), getattr(b, attr))
        assert a.provenance == b.provenance

    def test_seeds_differ(self):
        assert not np.array_equal(sample_d1(500, 0.0, 1).x, sample_d1(500, 0.0, 2).x)

    def test_noise_levels_share_inputs_and_standard_draws(self):
        # Same seed at different noise levels: identical inputs, and the
        # noise draws are the same standard normals scaled by sigma.
        lo = sample_d1(800, 1.0, seed=5)
        hi = sample_d1(800, 4.0, seed=5)
        np.testing.assert_array_equal(lo.x, hi.x)
        np.testing.assert_array_equal(lo.q_true, hi.q_true)
        # Extracting eps back out of y loses the last couple of bits to
        # cancellation, so compare absolutely rather than bitwise.
        np.testing.assert_allclose((hi.y - hi.q_true),
                                   4.0 * (lo.y - lo.q_true), atol=1e-10)

    def test_q_true_matches_process(self):
        ds = sample_d1(300, 0.0, seed=6)
        np.testing.assert_array_equal(ds.q_true, evaluate_process(ProcessSpec(), ds.x))

    def test_noise_magnitude(self):
        ds = sample_d1(10_000, 3.0, seed=7)
        eps = ds.y - ds.q_true
        assert abs(float(np.std(eps)) - 3.0) < 0.1
        assert abs(float(np.mean(eps))) < 0.1

    def test_noise_free_targets_equal_truth(self):
        ds = sample_d1(400, 0.0, seed=8)
        np.testing.assert_array_equal(ds.y, ds.q_true)

    def test_provenance(self):
        ds = sample_d1(1200, 2.5, seed=9)
        assert ds.provenance == Provenance("d1", 1200, 2.5, 9, 0)

    def test_small_n_left_unsplit(self):
        ds = sample_d1(100, 0.0, seed=1)
        assert len(ds.train_idx) == len(ds.val_idx) == len(ds.test_idx) == 0

    def test_n_below_one_rejected(self):
        with pytest.raises(ValueError, match="at least 1"):
            sample_d1(0, 0.0, seed=1)


class TestResample:
    def test_all_positive_untouched(self):
        values = np.array([1.0, 2.0, 3.0])
        out, redraws = _resample_nonpositive(values, lambda c: np.full(c, 9.0))
        np.testing.assert_array_equal(out, values)
        assert redraws == 0

    def test_nonpositive_replaced_and_counted(self):
        values = np.array([1.0, -2.0, 0.0, 3.0])
        out, redraws = _resample_nonpositive(values, lambda c: np.full(c, 9.0))
        np.testing.assert_array_equal(out, [1.0, 9.0, 9.0, 3.0])
        assert redraws == 2

    def test_repeated_redraw_counts_every_attempt(self):
        draws = iter([np.array([-1.0]), np.array([5.0])])
        out, redraws = _resample_nonpositive(np.array([-3.0]), lambda c: next(draws))
        np.testing.assert_array_equal(out, [5.0])
        assert redraws == 2


class TestGenerateD2:
    def test_pressure_profile(self):
        ds = generate_d2(5000)
        p1 = ds.x[:, 0]
        assert p1[0] == 70.0
        assert abs(p1[-1] - 32.0) < 0.01
        assert np.all(np.diff(p1) < 0)

    def test_opening_schedule(self):
        ds = generate_d2(5000)
        u = ds.x[:, 3]
        assert u[0] == 20.0
        assert u[-1] == 100.0
        steps = np.diff(u)
        assert set(np.unique(steps)) <= {0.0, 2.5}

    def test_split_sizes_and_order(self):
        ds = generate_d2(5000)
        assert (len(ds.train_idx), len(ds.val_idx), len(ds.test_idx)) == (2400, 600, 2000)
        assert ds.t[ds.train_idx].max() < ds.t[ds.val_idx].min()
        assert ds.t[ds.val_idx].max() < ds.t[ds.test_idx].min()
        np.testing.assert_array_equal(ds.train_idx, np.arange(0, 2400))
        np.testing.assert_array_equal(ds.val_idx, np.arange(2400, 3000))
        np.testing.assert_array_equal(ds.test_idx, np.arange(3000, 5000))

    def test_constant_columns(self):
        ds = generate_d2(1000)
        assert np.all(ds.x[:, 1] == 22.0)
        assert np.all(ds.x[:, 2] == 50.0)
        assert np.all(ds.x[:, 4] == 0.85)
        assert np.all(ds.x[:, 5] == 0.02)

    def test_noise_free(self):
        ds = generate_d2(500)
        np.testing.assert_array_equal(ds.y, ds.q_true)

    def test_flow_decreases_on_saturated_segment(self):
        # Once the choke is fully open only p1 still moves, and it
        # decays, so the flow must fall monotonically there.
        ds = generate_d2(5000)
        saturated = ds.x[:, 3] >= 100.0
        assert np.any(saturated)
        assert np.all(np.diff(ds.q_true[saturated]) < 0)

    def test_deterministic_across_seeds(self):
        # The schedule has no randomness; the seed only tags provenance.
        a, b = generate_d2(400, seed=1), generate_d2(400, seed=2)
        np.testing.assert_array_equal(a.x, b.x)
        np.testing.assert_array_equal(a.q_true, b.q_true)


class TestGenerateD3:
    def test_gor_is_linear_between_endpoints(self):
        ds = generate_d3(5000)
        fluid = ProcessSpec().fluid
        # Invert the fraction construction back to the volume ratio.
        r = ds.eta_gas / ds.x[:, 4]
        gor = r * fluid.rho_oil_sc / fluid.rho_gas_sc
        np.testing.assert_allclose(gor, np.linspace(200.0, 1000.0, 5000), rtol=1e-9)

    def test_fraction_trends(self):
        ds = generate_d3(2000)
        assert np.all(np.diff(ds.x[:, 4]) < 0)
        assert np.all(np.diff(ds.eta_gas) > 0)

    def test_constant_columns(self):
        ds = generate_d3(800)
        assert np.all(ds.x[:, 3] == 100.0)
        assert np.all(ds.x[:, 5] == 0.02)
        assert np.all(ds.x[:, 1] == 22.0)
        assert np.all(ds.x[:, 2] == 50.0)

    def test_pressure_profile_matches_d2(self):
        np.testing.assert_array_equal(generate_d3(3000).x[:, 0],
                                      generate_d2(3000).x[:, 0])

    def test_split_matches_d2_layout(self):
        ds = generate_d3(5000)
        assert (len(ds.train_idx), len(ds.val_idx), len(ds.test_idx)) == (2400, 600, 2000)

    def test_long_run_flow_decline(self):
        ds = generate_d3(5000)
        assert np.mean(ds.q_true[-100:]) < np.mean(ds.q_true[:100])

    def test_noise_free(self):
        ds = generate_d3(300)
        np.testing.assert_array_equal(ds.y, ds.q_true)


class TestGorToFractions:
    def test_zero_gor_means_no_gas(self):
        fluid = ProcessSpec().fluid
        eta_oil, eta_gas = gor_to_fractions(0.0, 0.02, fluid)
        assert eta_gas == 0.0
        assert eta_oil == pytest.approx(0.98, rel=1e-15)

    def test_reference_values(self):
        fluid = ProcessSpec().fluid
        eta_oil, eta_gas = gor_to_fractions(200.0, 0.02, fluid)
        assert eta_oil == pytest.approx(0.98 / 1.2, rel=1e-12)
        assert eta_gas == pytest.approx(0.98 * 0.2 / 1.2, rel=1e-12)
        eta_oil, eta_gas = gor_to_fractions(1000.0, 0.02, fluid)
        assert eta_oil == pytest.approx(0.49, rel=1e-12)
        assert eta_gas == pytest.approx(0.49, rel=1e-12)

    def test_simplex_by_construction(self, rng):
        fluid = ProcessSpec().fluid
        gor = rng.uniform(0.0, 5000.0, 200)
        eta_w = rng.uniform(0.0, 0.5, 200)
        eta_oil, eta_gas = gor_to_fractions(gor, eta_w, fluid)
        np.testing.assert_allclose(eta_oil + eta_gas + eta_w, 1.0, atol=1e-14)

    def test_invalid_arguments(self):
        fluid = ProcessSpec().fluid
        with pytest.raises(ValueError, match="gor"):
            gor_to_fractions(-1.0, 0.02, fluid)
        with pytest.raises(ValueError, match="eta_water"):
            gor_to_fractions(100.0, 1.0, fluid)


class TestSplits:
    def test_split_random_sizes(self):
        ds = sample_d1(1000, 0.0, seed=1)
        out = split_random(ds, n_test=200, val_frac=0.25, seed=3)
        assert len(out.test_idx) == 200
        assert len(out.val_idx) == 200
        assert len(out.train_idx) == 600

    def test_split_random_zero_val(self):
        ds = sample_d1(500, 0.0, seed=1)
        out = split_random(ds, n_test=100, val_frac=0.0, seed=3)
        assert len(out.val_idx) == 0
        assert len(out.train_idx) == 400

    def test_split_random_deterministic(self):
        ds = sample_d1(500, 0.0, seed=1)
        a = split_random(ds, 100, 0.2, seed=5)
        b = split_random(ds, 100, 0.2, seed=5)
        np.testing.assert_array_equal(a.test_idx, b.test_idx)
        np.testing.assert_array_equal(a.val_idx, b.val_idx)

    def test_split_random_size_violation(self):
        ds = sample_d1(100, 0.0, seed=1)
        with pytest.raises(ValueError, match="n_test"):
            split_random(ds, n_test=100, val_frac=0.2, seed=1)

    def test_split_temporal_boundaries(self):
        ds = generate_d2(5000)
        out = split_temporal(ds, n_test=2000, n_val=600)
        assert ds.t[out.train_idx].max() < ds.t[out.val_idx].min()
        assert ds.t[out.val_idx].max() < ds.t[out.test_idx].min()

    def test_split_temporal_zero_val(self):
        ds = generate_d2(500)
        out = split_temporal(ds, n_test=100, n_val=0)
        assert len(out.val_idx) == 0
        assert out.t[out.train_idx].max() + 1 == out.t[out.test_idx].min()

    def test_split_temporal_size_violation(self):
        ds = generate_d2(100)
        with pytest.raises(ValueError, match="n_test"):
            split_temporal(ds, n_test=90, n_val=10)

    def test_overlapping_splits_rejected(self):
        ds = sample_d1(50, 0.0, seed=1)
        with pytest.raises(ValueError, match="overlap"):
            Dataset(t=ds.t, x=ds.x, q_true=ds.q_true, y=ds.y,
                    train_idx=np.array([0, 1]), val_idx=np.array([1, 2]),
                    test_idx=np.arange(3, 50), provenance=ds.provenance)


class TestPersistence:
    def test_round_trip_bit_exact(self, tmp_path):
        ds = sample_d1(2500, 2.5, seed=11)
        path = tmp_path / dataset_filename(ds)
        save_dataset(ds, path)
        back = load_dataset(path)
        for attr in ("t", "x", "q_true", "y", "train_idx", "val_idx", "test_idx"):
            np.testing.assert_array_equal(getattr(back, attr), getattr(ds, attr),
                                          err_msg=attr)
        assert back.provenance == ds.provenance

    def test_round_trip_unsplit(self, tmp_path):
        ds = generate_d2(120)
        path = tmp_path / "d2_small.csv"
        save_dataset(ds, path)
        back = load_dataset(path)
        np.testing.assert_array_equal(back.x, ds.x)
        assert len(back.train_idx) == 0

    def test_filename_encodes_provenance(self):
        assert dataset_filename(sample_d1(100, 2.0, seed=3)) == "d1_n100_sigma2_seed3.csv"
        assert dataset_filename(sample_d1(100, 0.0, seed=0)) == "d1_n100_sigma0_seed0.csv"
        assert dataset_filename(sample_d1(100, 2.5, seed=7)) == "d1_n100_sigma2.5_seed7.csv"

    def test_header_columns(self, tmp_path):
        ds = generate_d3(50)
        path = tmp_path / "d3.csv"
        save_dataset(ds, path)
        lines = path.read_text().splitlines()
        assert lines[0].startswith("# generator=d3")
        assert tuple(lines[1].split(",")) == CSV_COLUMNS

    def test_load_rejects_missing_provenance(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("t,p1_bar\n0,50\n")
        with pytest.raises(ValueError, match="provenance"):
            load_dataset(path)

    def test_load_rejects_wrong_columns(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("# generator=d1 n=1 sigma_eps=0.0 seed=0 redraws=0\na,b\n1,2\n")
        with pytest.raises(ValueError, match="columns"):
            load_dataset(path)


class TestCalibrationReference:
    def test_packaged_scale_reproduces(self):
        # Recompute the frozen flow-scale constant from the packaged
        # calibration reference sample.
        x = calibration_reference_inputs()
        scale = calibrate_flow_scale(ProcessSpec(), x)
        assert scale == pytest.approx(DEFAULT_FLOW_SCALE, rel=1e-12)

    def test_reference_is_stationary_sample(self):
        x = calibration_reference_inputs(n=2000)
        assert x.shape == (2000, 6)
        assert np.all((x[:, 0] >= 30.0) & (x[:, 0] <= 70.0))

    def test_stationary_inputs_reports_redraws(self, rng):
        x, redraws = stationary_inputs(rng, 100)
        assert x.shape == (100, 6)
        assert redraws == 0
