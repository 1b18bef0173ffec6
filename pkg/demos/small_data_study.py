"""A thin slice of the training-set-size study, with readable output.

Runs two model architectures over a short grid of training-set sizes
with a handful of trials each, then prints the quantile summary the full
study would write to disk. Kept deliberately small so it finishes in
about a minute; the full-size study is the CLI's job (see the README).
"""

import os

from vfmlab import TrainConfig, default_config, run_exp1, save_results
from vfmlab.models import ModelKind

OUTDIR = os.path.join(os.path.dirname(__file__), "output")


def main():
    config = default_config(
        "exp1",
        trials=5,
        n_grid=(8, 80),
        models=(ModelKind.MECH_PLAIN, ModelKind.MECH_ORACLE,
                ModelKind.HYBRID_AREA),
        train=TrainConfig(max_epochs=600, patience=100),
        train_overrides=(),
        d1_n=4000)
    result = run_exp1(config)

    print("test-error quantiles by training-set size")
    print(f"{'N':>5} {'model':<13} {'p25':>8} {'p50':>8} {'p75':>8}")
    for s in result.summaries:
        if s.metric != "mae_test":
            continue
        print(f"{s.control:>5} {s.model:<13} "
              f"{s.p25:8.3f} {s.p50:8.3f} {s.p75:8.3f}")

    # The written files mirror what was just printed.
    paths = save_results(result, os.path.join(OUTDIR, "small_data"))
    for name, path in paths.items():
        print(f"{name}: {path}")

    # More data helps the learned models; the misspecified physics model
    # keeps its structural bias either way.
    p50 = {(s.model, s.control): s.p50 for s in result.summaries
           if s.metric == "mae_test"}
    oracle_gain = p50[("mech_oracle", 8)] / p50[("mech_oracle", 80)]
    plain_gain = p50[("mech_plain", 8)] / p50[("mech_plain", 80)]
    print(f"oracle error shrinks {oracle_gain:.1f}x from N=8 to N=80; "
          f"plain physics only {plain_gain:.1f}x")


if __name__ == "__main__":
    main()
