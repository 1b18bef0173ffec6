"""End-to-end acceptance checks for the benchmark's headline claims.

Each test prints exactly one verdict line (run with ``-s`` to see them
as they land). The experiment fixtures run the real configurations at
ten trials each, so the whole file takes tens of minutes on one core;
everything in here is deterministic for a fixed master seed.
"""

import dataclasses
import time

import numpy as np
import pytest

from vfmlab import nnet
from vfmlab.choke import (FluidSpec, PhaseFractions, critical_pressure_ratio,
                          split_volumetric)
from vfmlab.datasets import sample_d1
from vfmlab.experiments import (default_config, run_exp1, run_exp2, run_exp3,
                                run_exp4, save_results)
from vfmlab.models import ModelKind, Normalization, build
from vfmlab.training import TrainConfig, map_loss, train

NET = nnet.NetSpec((6, 50, 50, 1))
NET_KIND_LIST = [ModelKind.DATA_DRIVEN, ModelKind.HYBRID_ERROR,
                 ModelKind.HYBRID_AREA]
LEARNED = ("data_driven", "hybrid_error", "hybrid_area", "mech_oracle")


def verdict(name: str, ok: bool, detail: str) -> None:
    print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")


@pytest.fixture(scope="module")
def d1_full():
    return sample_d1(10_000, 0.0, 0)


@pytest.fixture(scope="module")
def mean_flow(d1_full):
    return float(np.mean(d1_full.q_true))


@pytest.fixture(scope="module")
def exp1_result():
    return run_exp1(default_config("exp1", trials=10, n_grid=(8, 80, 800)))


@pytest.fixture(scope="module")
def exp2_result():
    return run_exp2(default_config("exp2", trials=10))


@pytest.fixture(scope="module")
def exp3_result():
    return run_exp3(default_config("exp3", trials=10))


@pytest.fixture(scope="module")
def exp4_result():
    return run_exp4(default_config("exp4", trials=10))


def _p50(result, model, control, metric="mae_test"):
    for s in result.summaries:
        if s.model == model and s.control == control and s.metric == metric:
            return s.p50
    raise AssertionError(f"no summary for {model}@{control}/{metric}")


class TestOracleRecovery:
    def test_structure_match_learns_process_and_mismatch_stays(
            self, d1_full, mean_flow):
        # Both physics models train on the same 6400 noise-free rows;
        # only the one whose structure contains the generating process
        # should reach sub-percent test error.
        t0 = time.time()
        cfg = TrainConfig(max_epochs=500, patience=100)
        x_test = d1_full.x[d1_full.test_idx]
        y_test = d1_full.q_true[d1_full.test_idx]
        pct = {}
        for kind in (ModelKind.MECH_ORACLE, ModelKind.MECH_PLAIN):
            fitted, _ = train(build(kind), d1_full, cfg)
            err = float(np.mean(np.abs(fitted.predict(x_test) - y_test)))
            pct[kind] = 100.0 * err / mean_flow
        minutes = (time.time() - t0) / 60.0
        ok = (pct[ModelKind.MECH_ORACLE] < 1.0
              and pct[ModelKind.MECH_PLAIN] > 5.0 and minutes < 15.0)
        verdict("oracle recovery on the stationary set", ok,
                f"matched-structure {pct[ModelKind.MECH_ORACLE]:.2f}% of "
                f"mean flow (<1%), plain physics "
                f"{pct[ModelKind.MECH_PLAIN]:.2f}% (>5%), "
                f"{minutes:.1f} min (<15)")
        assert pct[ModelKind.MECH_ORACLE] < 1.0
        assert pct[ModelKind.MECH_PLAIN] > 5.0
        assert minutes < 15.0


class TestSampleSizeStudy:
    def test_small_sample_ordering_and_sub_percent_at_800(
            self, exp1_result, mean_flow):
        d8 = _p50(exp1_result, "data_driven", 8)
        ha8 = _p50(exp1_result, "hybrid_area", 8)
        at800 = {m: _p50(exp1_result, m, 800) for m in LEARNED}
        limit = 0.01 * mean_flow
        small_ok = d8 > ha8
        large_ok = all(v < limit for v in at800.values())
        detail_800 = ", ".join(f"{m} {v:.3f}" for m, v in at800.items())
        verdict("sample-size study", small_ok and large_ok,
                f"at N=8 fully data-driven {d8:.2f} > area hybrid "
                f"{ha8:.2f}; at N=800 (limit {limit:.3f}): {detail_800}")
        assert small_ok, (
            f"at N=8 the data-driven net ({d8:.3f}) should sit above the "
            f"area hybrid ({ha8:.3f})")
        for m, v in at800.items():
            assert v < limit, (
                f"{m} at N=800 is {v:.3f}, above 1% of mean flow "
                f"({limit:.3f})")


class TestNoiseStudy:
    def test_physics_ratio_bands_and_net_degradation(self, exp2_result):
        grid = exp2_result.config.noise_grid
        phys = {m: [_p50(exp2_result, m, s, "rel_error") for s in grid]
                for m in ("mech_plain", "mech_oracle")}
        in_band = all(0.8 <= v <= 1.5 for vals in phys.values()
                      for v in vals)
        d_lo = _p50(exp2_result, "data_driven", 1.0, "rel_error")
        d_hi = _p50(exp2_result, "data_driven", 10.0, "rel_error")
        degrades = d_hi > d_lo
        lo = min(v for vals in phys.values() for v in vals)
        hi = max(v for vals in phys.values() for v in vals)
        verdict("noise-robustness study", in_band and degrades,
                f"physics ratio curves span [{lo:.3f},{hi:.3f}] within "
                f"[0.8,1.5]; data-driven ratio grows {d_lo:.2f} -> "
                f"{d_hi:.2f} from sigma 1 to 10")
        assert in_band, (
            f"physics relative-error curves leave [0.8,1.5]: span "
            f"[{lo:.3f},{hi:.3f}]")
        assert degrades, (
            f"data-driven ratio at sigma 10 ({d_hi:.3f}) does not exceed "
            f"its sigma 1 value ({d_lo:.3f})")


class TestDepletionDriftStudy:
    def test_extrapolation_orderings(self, exp3_result):
        table = exp3_result.table
        test = dict(zip(table.models, table.mae_test))
        m, mstar = test["mech_plain"], test["mech_oracle"]
        d = test["data_driven"]
        plain_is_worst = all(m >= v for v in test.values())
        oracle_is_best = all(mstar <= v for v in test.values())
        hybrid_near_d = (test["hybrid_area"] <= 1.2 * d
                         or test["hybrid_error"] <= 1.2 * d)
        ok = plain_is_worst and oracle_is_best and hybrid_near_d
        listing = ", ".join(f"{k} {v:.2f}" for k, v in sorted(
            test.items(), key=lambda kv: kv[1]))
        verdict("depletion-drift study", ok,
                f"test MAE {listing}; plain-physics-worst "
                f"{'holds' if plain_is_worst else 'fails'}, oracle-best "
                f"{'holds' if oracle_is_best else 'fails'}, "
                f"hybrid within 20% of data-driven "
                f"{'holds' if hybrid_near_d else 'fails'}")
        assert oracle_is_best, (
            f"oracle structure should have the smallest test MAE: "
            f"{listing}")
        assert hybrid_near_d, (
            f"no hybrid within 20% of the data-driven test MAE {d:.3f}")
        assert plain_is_worst, (
            f"plain physics should have the largest test MAE: {listing}")


class TestCompositionDriftStudy:
    def test_mismatch_ordering_and_validation_selection(self, exp4_result):
        table = exp4_result.table
        val = dict(zip(table.models, table.mae_val))
        test = dict(zip(table.models, table.mae_test))
        ordering = (test["mech_oracle"] < test["mech_plain"]
                    < test["data_driven"])
        contenders = ("mech_plain", "hybrid_area", "hybrid_error",
                      "data_driven")
        val_best = min(contenders, key=lambda m: val[m])
        test_best = min(contenders, key=lambda m: test[m])
        selection = val_best == test_best
        verdict("composition-drift study", ordering and selection,
                f"test MAE oracle {test['mech_oracle']:.2f} / plain "
                f"{test['mech_plain']:.2f} / data-driven "
                f"{test['data_driven']:.2f} (ordering "
                f"{'holds' if ordering else 'fails'}); validation picks "
                f"{val_best}, test winner {test_best} (selection "
                f"{'holds' if selection else 'fails'})")
        assert selection, (
            f"validation-best {val_best} is not test-best {test_best}")
        assert ordering, (
            f"expected oracle < plain < data-driven on test, got "
            f"{test['mech_oracle']:.3f} / {test['mech_plain']:.3f} / "
            f"{test['data_driven']:.3f}")


def _g_reference(y, x_g, v_g1, v_l, k, n):
    v_g2 = v_g1 * y ** (-1.0 / k)
    a = k / (k - 1.0)
    ratio2 = (1.0 - x_g) * v_l / (x_g * v_g2)
    num = a + (1.0 - x_g) * v_l * (1.0 - y) / (x_g * v_g1)
    den = a + n / 2.0 + n * ratio2 + (n / 2.0) * ratio2 ** 2
    return num / den


def _yc_bisect(x_g, v_g1, v_l, k, n):
    lo, hi = 1e-9, 1.0 - 1e-12
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _g_reference(mid, x_g, v_g1, v_l, k, n) - mid > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


class TestNumericalProperties:
    def test_kernel_and_training_identities(self, d1_full):
        worst_grad = 0.0
        grad_rng = np.random.default_rng(77)
        norm = Normalization.from_training(d1_full.x, d1_full.q_true)
        for kind in ModelKind:
            spec = NET if kind in NET_KIND_LIST else None
            for model_seed in range(5):
                model = build(kind, net_spec=spec, seed=40 + model_seed)
                if spec is not None:
                    flat = nnet.flatten(nnet.init(dataclasses.replace(
                        spec, seed=90 + model_seed)))
                    values = model.params.values.copy()
                    values[model.net_slice] = flat
                    model = model.with_values(values).with_norm(norm)
                theta = model.params.values
                for i in grad_rng.choice(len(d1_full.x), 10, replace=False):
                    x = d1_full.x[i]
                    g = model.predict_gradient(x)
                    coords = grad_rng.choice(len(theta),
                                             min(len(theta), 6),
                                             replace=False)
                    for c in coords:
                        h = 1e-6 * max(1.0, abs(theta[c]))
                        tp, tm = theta.copy(), theta.copy()
                        tp[c] += h
                        tm[c] -= h
                        fd = (model.with_values(tp).predict(x)
                              - model.with_values(tm).predict(x)) / (2 * h)
                        worst_grad = max(worst_grad, abs(g[c] - fd)
                                         / max(abs(fd), 1e-8))
        grad_ok = worst_grad < 1e-4

        yc_rng = np.random.default_rng(5)
        worst_yc = 0.0
        for _ in range(200):
            x_g = yc_rng.uniform(1e-4, 1.0)
            v_g1 = yc_rng.uniform(1e-3, 0.5)
            v_l = yc_rng.uniform(5e-4, 5e-3)
            k = yc_rng.uniform(1.05, 1.67)
            n = yc_rng.uniform(1.01, k)
            y = critical_pressure_ratio(x_g, v_g1, v_l, k, n)
            worst_yc = max(worst_yc,
                           abs(y - _yc_bisect(x_g, v_g1, v_l, k, n)))
        yc_ok = worst_yc < 1e-6

        fluid = FluidSpec()
        mix_rng = np.random.default_rng(6)
        worst_mass = 0.0
        for _ in range(100):
            w = mix_rng.dirichlet(np.ones(3))
            fr = PhaseFractions(*w)
            m = mix_rng.uniform(1e-6, 5.0)
            q_oil, q_gas, q_water, _ = split_volumetric(m, fr, fluid)
            back = (q_oil * fluid.rho_oil_sc + q_gas * fluid.rho_gas_sc
                    + q_water * fluid.rho_water_sc)
            worst_mass = max(worst_mass, abs(back - m) / m)
        mass_ok = worst_mass < 1e-9

        # Critical plateau: below the critical ratio the flow stops
        # responding to the downstream pressure.
        oracle = build(ModelKind.MECH_ORACLE)
        x_lo = np.array([80.0, 15.0, 77.0, 60.0, 0.55, 0.2])
        x_hi = x_lo.copy()
        x_hi[1] = 25.0
        plateau_gap = abs(float(oracle.predict(x_lo))
                          - float(oracle.predict(x_hi)))
        plateau_ok = plateau_gap == 0.0

        ds = sample_d1(1500, 2.0, seed=11)
        model = build(ModelKind.DATA_DRIVEN, net_spec=NET, seed=3)
        model = model.with_norm(Normalization.from_training(ds.x, ds.y))
        total = map_loss(model, ds.x, ds.y, 1.7)
        pieces = sum(
            map_loss(model, ds.x[s:s + 64], ds.y[s:s + 64], 1.7,
                     n_train=len(ds))
            for s in range(0, len(ds), 64))
        decomp_err = abs(pieces - total) / total
        decomp_ok = decomp_err < 1e-9

        ds_r = sample_d1(2800, 2.0, seed=21)
        ds_r = dataclasses.replace(ds_r, train_idx=np.arange(800),
                                   val_idx=np.array([], dtype=int),
                                   test_idx=np.arange(800, 2800))
        ridge = build(ModelKind.MECH_PLAIN)
        pv = ridge.params
        frozen = dataclasses.replace(
            pv, lower=np.array([pv.lower[0], pv.prior_mean[1]]),
            upper=np.array([pv.upper[0], pv.prior_mean[1]]))
        ridge = dataclasses.replace(ridge, params=frozen)
        fitted, _ = train(ridge, ds_r,
                          TrainConfig(batch_size=800, max_epochs=1500,
                                      patience=None, sigma_eps_assumed=2.0))
        x_tr, y_tr = ds_r.split_xy("train")
        h = ridge.with_values(
            np.array([1.0, pv.prior_mean[1]])).predict(x_tr)
        c_star = ((h @ y_tr / 4.0 + pv.prior_mean[0] / pv.prior_sigma[0] ** 2)
                  / (h @ h / 4.0 + 1.0 / pv.prior_sigma[0] ** 2))
        ridge_err = abs(fitted.params.values[0] - c_star) / abs(c_star)
        ridge_ok = ridge_err < 1e-3

        ok = (grad_ok and yc_ok and mass_ok and plateau_ok and decomp_ok
              and ridge_ok)
        verdict(
            "numerical property suite", ok,
            f"gradients vs finite differences {worst_grad:.2e} (<1e-4); "
            f"critical-ratio vs bisection {worst_yc:.2e} (<1e-6); "
            f"mass conservation {worst_mass:.2e} (<1e-9); choked-flow "
            f"plateau gap {plateau_gap:.1e} (=0); epoch decomposition "
            f"{decomp_err:.2e} (<1e-9); ridge closed form {ridge_err:.2e} "
            f"(<1e-3)")
        assert grad_ok and yc_ok and mass_ok and plateau_ok
        assert decomp_ok and ridge_ok


class TestReproducibility:
    def test_same_master_seed_same_tidy_bytes(self, tmp_path):
        config = default_config(
            "exp1", trials=2, n_grid=(8, 20),
            models=(ModelKind.MECH_PLAIN, ModelKind.MECH_ORACLE),
            train=TrainConfig(max_epochs=3, patience=None),
            train_overrides=(), d1_n=2500)
        paths = []
        for sub in ("one", "two"):
            out = tmp_path / sub
            out.mkdir()
            paths.append(save_results(run_exp1(config), out)["tidy"])
        same = open(paths[0], "rb").read() == open(paths[1], "rb").read()
        verdict("byte-identical reruns", same,
                "two runs with one master seed wrote identical tidy files")
        assert same


class TestCalibration:
    def test_mean_stationary_flow_in_band(self, mean_flow):
        ok = 40.7 <= mean_flow <= 42.7
        verdict("flow-scale calibration", ok,
                f"mean noise-free stationary flow {mean_flow:.3f} in "
                f"[40.7, 42.7]")
        assert ok
