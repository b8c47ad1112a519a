"""Generate a synthetic stand-in for a monthly rainfall / malaria-incidence series.

Rainfall is seasonal and gamma distributed. Log incidence switches between a
low and a high regime, and the chance of entering the high regime rises with
rainfall accumulated over 5 months and shifted forward 2 months, matching the
demo config's preprocessing.

    python demo/make_synthetic_malaria.py demo/malaria_synthetic.csv
"""

import sys

import numpy as np

from inhmm.files import write_table
from inhmm.preprocess import accumulate_lag

T = 231
SEED = 1991


def generate(T=T, seed=SEED):
    rng = np.random.default_rng(seed)
    month = np.arange(T) % 12
    scale = 40.0 + 60.0 * (1.0 + np.sin(2 * np.pi * (month - 3) / 12))
    rain = rng.gamma(2.0, scale)
    acc = accumulate_lag(rain, window=5, lag=2)[:, 0]
    acc = np.where(np.isnan(acc), np.nanmean(acc), acc)
    score = (acc - acc.mean()) / acc.std()
    high = np.zeros(T, dtype=bool)
    for t in range(1, T):
        stay = 0.85 if high[t - 1] else 0.15
        p = 1.0 / (1.0 + np.exp(-(2.0 * score[t] + 4.0 * (stay - 0.5))))
        high[t] = rng.random() < p
    y = np.where(high, 6.0, 4.5) + 0.3 * rng.standard_normal(T)
    return np.arange(1, T + 1), rain, y


if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "malaria_synthetic.csv"
    write_table(out, *generate())
