"""
One bad worker, five aggregation rules
======================================

Eleven workers report a gradient of a 4-parameter model. Two of them lie.
We compare what each aggregation rule hands back to the optimizer.
"""

import numpy as np

import byzsgd
from byzsgd import gar

rng = np.random.default_rng(0)
true_gradient = np.array([1.0, -2.0, 0.5, 0.0])

# nine honest estimates: the true gradient plus unit noise
honest = true_gradient + rng.standard_normal((9, 4))

# two Byzantine workers send the same huge vector
byzantine = np.tile([100.0, 100.0, -100.0, 100.0], (2, 1))
submitted = np.vstack([honest, byzantine])
f = 2

print("true gradient      ", true_gradient)
for rule in ("average", "krum", "geomed", "brute", "bulyan:krum"):
    out = gar.aggregate(rule, submitted, f)
    err = np.linalg.norm(out.aggregate - true_gradient)
    print(f"{rule:<18} {np.round(out.aggregate, 3)}  error {err:7.3f}  picked {out.selected_indices}")

# Averaging is dragged far away. Every selection rule ignores rows 9 and 10.

# %%
# Each rule needs enough workers for the f it is asked to tolerate.
for rule in byzsgd.RULE_IDS:
    print(f"{rule:<16} needs n >= {gar.min_workers(rule, f)} for f = {f}")

try:
    gar.bulyan(submitted[:10], f)
except byzsgd.QuorumError as err:
    print("refused:", err)

# %%
# Brute enumerates every (n - f)-subset, which stops being practical fast.
print("subsets for n=57, f=30:", f"{gar.subset_count(57, 27):.2e}")
