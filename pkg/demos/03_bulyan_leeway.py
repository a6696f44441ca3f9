"""
Bulyan caps the per-coordinate damage
=====================================

For each dimension we sweep the attack strength and record the worst mean
deviation of the attacked coordinate from an honest worker's value.
With Krum the worst case grows with ``d``; with Bulyan it stays flat.
"""

import numpy as np

from byzsgd.analysis import measure_bulyan_leeway

f = 2
n = 4 * f + 3
dims = [16, 64, 256, 1024]

for rule in ("krum", "bulyan:krum"):
    rep = measure_bulyan_leeway(1.0, n, f, dims, trials=150, seed=3, rule=rule)
    print(f"{rule:<12} worst deviation {np.round(rep.measured, 2)}   slope in d: {rep.slope:+.2f}")

# %%
# Writing the report gives a CSV for plotting and a JSON summary.
import tempfile
from pathlib import Path

out = Path(tempfile.mkdtemp())
csv_path, json_path = rep.write(out, "leeway")
print(csv_path.read_text())
