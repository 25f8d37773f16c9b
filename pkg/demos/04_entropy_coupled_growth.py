"""
Growth that depends on heterogeneity
====================================

Here the division rate of every cell depends on the differential entropy
of the whole population.  Starting from five different initial
distributions, entropy converges to a common plateau, but populations that
start more heterogeneous grow faster early on.  The effect is much
stronger for a linear response than for a saturating Hill response.
"""
import numpy as np

from emtpop.entropy import INITIAL_KINDS, EntropyGrowthModel, run_entropy_model

checkpoints = np.arange(24.0, 169.0, 24.0)
for response in ("hill", "linear"):
    model = EntropyGrowthModel(response=response)
    finals = {}
    for kind in INITIAL_KINDS:
        run = run_entropy_model(kind, model, checkpoints)
        finals[kind] = run.rho[-1]
        print(f"{response:6s} {kind:7s} entropy {run.entropy[0]:6.2f} -> {run.entropy[-1]:6.2f}  "
              f"rho {run.rho[-1]:8.1f}")
    print(f"{response}: max/min final population {max(finals.values()) / min(finals.values()):.3f}")
