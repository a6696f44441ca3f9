"""
How far can an attacker push Krum without being rejected?
=========================================================

The adversary submits ``mean(honest) + gamma * e_0``: the honest average moved
along one coordinate. Krum still selects it for small ``gamma``. The largest
such ``gamma`` (the margin) grows with the model dimension ``d``.
"""

import numpy as np

from byzsgd.analysis import gamma_scaling_study, loglog_fit
from byzsgd.attack import GaussianModel, MarginSearch, estimate_gamma_max

f = 3
n = 2 * f + 3
search = MarginSearch(trials_per_probe=300)

# honest gradients: i.i.d. Gaussian with unit spread per coordinate
for d in (16, 64, 256, 1024):
    model = GaussianModel.uniform(d, 1.0)
    gamma = estimate_gamma_max("krum", model, n, f, search=search, seed=1)
    print(f"d = {d:5d}   margin ~ {gamma:8.2f}   margin / sqrt(d) = {gamma / np.sqrt(d):.3f}")

# The ratio settles, so the margin scales like sqrt(d) under the l2 norm.

# %%
# The same study, packaged: measured margins, a closed-form prediction and a
# log-log slope. Under the l1 norm the slope is close to 1.
for p in (2, 1):
    rep = gamma_scaling_study("krum", p, f, [32, 128, 512], search=search, seed=2)
    print(f"p = {p}: slope {rep.slope:.2f}   measured {np.round(rep.measured, 1)}"
          f"   predicted {np.round(rep.predicted, 1)}")

# loglog_fit is the helper behind every slope in this package
print(loglog_fit([1, 10, 100], [2, 20, 200]))
