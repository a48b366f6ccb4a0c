"""Synthetic data generators used by tests, scripts and smoke runs."""

from __future__ import annotations

import numpy as np
import pandas as pd
from scipy.special import expit


def make_uplift_frame(n: int = 2000, n_features: int = 4, seed: int = 0, effect: float = 0.8) -> pd.DataFrame:
    """Randomized trial with Gaussian features ``x1..xk``.

    The treatment shifts the log-odds by ``effect * x1`` so that uplift is
    heterogeneous and monotone in ``x1``.
    """
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, n_features))
    t = rng.integers(0, 2, size=n)
    eta = -0.5 + 0.6 * X[:, 1 % n_features] + t * (0.2 + effect * X[:, 0])
    y = rng.binomial(1, expit(eta))
    frame = pd.DataFrame(X, columns=[f"x{k + 1}" for k in range(n_features)])
    frame["treat"] = t
    frame["y"] = y
    return frame


def make_email_like(n: int = 20000, seed: int = 0) -> pd.DataFrame:
    """Prepared-format table with the columns of the e-mail campaign data.

    Columns: recency, history, mens, womens, zip_code, newbie, channel,
    treat, visit. Visit rates are near 11% (control) and 15% (treated) and
    the treatment effect grows with ``history`` and ``womens``.
    """
    rng = np.random.default_rng(seed)
    recency = rng.integers(1, 13, size=n).astype(float)
    history = np.round(29.99 + rng.lognormal(4.8, 1.0, size=n).clip(max=3300.0), 2)
    mens = rng.binomial(1, 0.55, size=n)
    womens = np.where(mens == 1, rng.binomial(1, 0.2, size=n), 1)
    zip_code = rng.choice(["Rural", "Surburban", "Urban"], p=[0.15, 0.45, 0.40], size=n)
    newbie = rng.binomial(1, 0.5, size=n)
    channel = rng.choice(["Multichannel", "Phone", "Web"], p=[0.12, 0.44, 0.44], size=n)
    treat = rng.integers(0, 2, size=n)
    lh = np.log(history)
    eta = (
        -1.75
        - 0.06 * recency
        + 0.25 * (lh - 4.9)
        - 0.35 * newbie
        + 0.2 * (channel == "Web")
        + treat * (0.35 + 0.3 * womens + 0.25 * (lh - 4.9) - 0.02 * recency)
    )
    visit = rng.binomial(1, expit(eta))
    return pd.DataFrame(
        {
            "recency": recency,
            "history": history,
            "mens": mens,
            "womens": womens,
            "zip_code": zip_code,
            "newbie": newbie,
            "channel": channel,
            "treat": treat,
            "visit": visit,
        }
    )
