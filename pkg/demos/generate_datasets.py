"""Generate the three benchmark datasets and look at what is in them.

d1 is a stationary i.i.d. sample of the operating envelope, d2 ramps the
choke open while the upstream pressure depletes, and d3 raises the
gas-to-oil ratio at a fully open choke. The drift sets are noise-free;
d1 takes whatever output noise you ask for.
"""

import os

import numpy as np

from vfmlab import generate_d2, generate_d3, sample_d1, save_dataset
from vfmlab.datasets import dataset_filename

OUTDIR = os.path.join(os.path.dirname(__file__), "output")


def describe(ds):
    p = ds.provenance
    print(f"{p.generator}: n={p.n} sigma={p.sigma_eps:g} seed={p.seed}")
    print(f"  splits train/val/test = {len(ds.train_idx)}/"
          f"{len(ds.val_idx)}/{len(ds.test_idx)}")
    q = ds.q_true
    print(f"  flow   mean={q.mean():.2f}  min={q.min():.2f} "
          f"max={q.max():.2f}")
    u = ds.x[:, 3]
    print(f"  choke  opening {u.min():.1f}% .. {u.max():.1f}%")


def main():
    os.makedirs(OUTDIR, exist_ok=True)
    d1 = sample_d1(n=10_000, sigma_eps=2.0, seed=0)
    d2 = generate_d2(n=5000, seed=0)
    d3 = generate_d3(n=5000, seed=0)
    for ds in (d1, d2, d3):
        describe(ds)
        path = os.path.join(OUTDIR, dataset_filename(ds))
        save_dataset(ds, path)
        print(f"  wrote {path}")

    # The noisy targets wobble around the noise-free truth.
    resid = d1.y - d1.q_true
    print(f"d1 target noise: std={resid.std():.3f} "
          f"(configured {d1.provenance.sigma_eps:g})")

    # Drift shows up as a trend over the row index (time).
    half = len(d3) // 2
    print(f"d3 drift: mean flow first half {d3.q_true[:half].mean():.1f}, "
          f"second half {d3.q_true[half:].mean():.1f}")
    assert np.all(d3.x[:, 3] == 100.0), "d3 runs at a fully open choke"


if __name__ == "__main__":
    main()
