"""Thin Beta data whose first shape is unknown.

There is no closed-form sampler for the folds here, so each observation gets
its own Metropolis chain on the set of fold vectors whose geometric mean
equals the observation.  Fold k of K follows Beta(a/K + (k-1)/K, b/K).
"""

import numpy as np

from datathin import DistributionSpec, RngState, ThinningPlan, recombine, sample
from datathin.folds import Mode
from datathin.mcmc import McmcConfig
from datathin.thinners import thin

root = RngState(5)
spec = DistributionSpec("Beta", {"a": 4.0, "b": 6.0}, unknown=("a",))
x = sample(spec, root.split_named("data").generator(), size=4000)

cfg = McmcConfig(burn_in=400, thin_every=10)
fs = thin(x, spec, ThinningPlan(2, mode=Mode.BETA), root.split_named("thin").generator(), cfg)

print("acceptance:", fs.diagnostics.to_json())
print("geometric mean reproduces x:", float(np.max(np.abs(recombine(fs) - x))))
for k, (fold, fspec) in enumerate(zip(fs.folds, fs.fold_specs), start=1):
    law = fspec.bind(4.0)
    a, b = law.value("a"), law.value("b")
    print(f"fold {k}: Beta({a:g}, {b:g})  sample mean {fold.mean():.4f}  law mean {a / (a + b):.4f}")
