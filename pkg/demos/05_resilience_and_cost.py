"""
Does the aggregate still point downhill, and what does it cost?
===============================================================

Monte-Carlo check that the expected aggregate keeps a positive inner product
with the true gradient, followed by a wall-clock scaling study.
"""

import math

import numpy as np

from byzsgd.analysis import check_resilience_condition1, complexity_study
from byzsgd.attack import GaussianModel

d = 50
model = GaussianModel(np.full(d, 1 / math.sqrt(d)), np.full(d, 0.5))

for rule in ("krum", "geomed", "bulyan:krum"):
    rep = check_resilience_condition1(rule, model, 11, 2, "crafted", trials=500, seed=4, margin_trials=100)
    print(f"{rule:<12} <E F, G> = {rep.mean_inner_product:.3f}   angle {rep.angle:.3f} rad"
          f"   attack gamma {rep.gamma:.2f}")

# An attacker sending the negated gradient is simply outvoted.
rep = check_resilience_condition1("krum", model, 11, 2, "opposite", trials=500, seed=4)
print("opposite attack:", rep.summary())

# %%
# Bulyan runs its inner rule n - 2f times. Per-call time against n:
rep = complexity_study("bulyan:krum", 2000, [15, 31, 63, 127], repetitions=3, seed=5)
for n, t in zip(rep.sweep, rep.measured):
    print(f"n = {n:4d}   {t * 1e3:8.2f} ms")
print(f"log-log slope {rep.slope:.2f}")
