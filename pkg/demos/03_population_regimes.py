"""
Population regimes on the reduced (miR-200, SNAIL) plane
========================================================

A population of 100 epithelial cells grows logistically while each cell
follows the reduced flow and SNAIL relaxes towards its set point S0.
Mutations at division spread cells between basins.  Depending on S0 the
population ends up in one phenotype or splits across all three.

The full 100-day runs take about half a minute each; this script uses 30
days so it finishes quickly.
"""
import numpy as np

from emtpop.scenarios import GrowthScenario, InitialCondition, count_modes, run_population_scenario

for s0 in (150e3, 200e3, 250e3):
    run = run_population_scenario(InitialCondition("epi"), GrowthScenario("r1"), s0=s0, horizon=720.0)
    fe, fh, fm = run.fractions[-1]
    modes = count_modes(run.fields[-1].marginal(0))
    print(f"S0 = {s0 / 1e3:.0f}K: rho {run.rho[-1]:9.1f}  fE {fe:.3f} fH {fh:.3f} fM {fm:.3f}  "
          f"modes {modes}  entropy {run.entropy[-1]:.2f}")

# Growth scenarios change who wins: with slower mesenchymal division (r2)
# the hybrid share at S0 = 225K stays higher.
for g in ("r1", "r2"):
    run = run_population_scenario(InitialCondition("epi_hyb_mes"), GrowthScenario(g), s0=225e3,
                                  horizon=720.0)
    print(f"{g} at 225K: fH after 30 days {run.fractions[-1][1]:.3f}")

# The miR-200 marginal of the last field, as a coarse text histogram.
marg = run.fields[-1].marginal(0)
for x, v in zip(np.linspace(625, 24_375, len(marg)), marg / marg.max()):
    print(f"{x:7.0f} {'#' * int(40 * v)}")
