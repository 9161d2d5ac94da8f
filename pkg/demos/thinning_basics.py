"""Split one Poisson count vector into independent folds and put it back together.

Run with ``python3 demos/thinning_basics.py``.
"""

import numpy as np

from datathin import DistributionSpec, RngState, ThinningPlan, recombine, sample
from datathin.folds import Mode
from datathin.thinners import thin

root = RngState(2024)

# Counts with rate 6.  The rate is what we pretend not to know.
truth = DistributionSpec("Poisson", {"rate": 6.0}, unknown=("rate",))
x = sample(truth, root.split_named("data").generator(), size=5000)

# Three folds, 20/30/50 percent of the information each.
plan = ThinningPlan(3, ["1/5", "3/10", "1/2"])
fs = thin(x, truth, plan, root.split_named("thin").generator())

for k, (fold, spec) in enumerate(zip(fs.folds, fs.fold_specs), start=1):
    # the fold law still has the rate as a placeholder; bind the truth to compare
    expected = spec.bind(6.0).value("rate")
    print(f"fold {k}: mean {fold.mean():.3f}  (law {spec.family.value}, rate {expected:g})")

print("folds sum back to x exactly:", np.array_equal(recombine(fs), x))
print("corr(fold1, fold2) =", round(float(np.corrcoef(fs.folds[0], fs.folds[1])[0, 1]), 4))

# Not every family uses a sum.  Scaled Beta data on (0, scale) thinned by the
# maximum: each fold is a scaled Beta with a share of the shape.
spec = DistributionSpec("ScaledBeta", {"scale": 4.0, "shape": 2.0}, unknown=("scale",))
y = sample(spec, root.split_named("max-data").generator(), size=5)
fs = thin(y, spec, ThinningPlan(2, mode=Mode.MAX), root.split_named("max").generator())
print("max recombiner:", fs.recombiner, "->", np.allclose(recombine(fs), y))
