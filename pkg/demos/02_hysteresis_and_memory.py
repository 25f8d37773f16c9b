"""
Hysteresis and epigenetic memory
================================

Raising SNAIL slowly carries cells from the epithelial state through the
hybrid state to the mesenchymal state; lowering it again brings them back
along a different path that skips the hybrid branch.  A slow epigenetic
threshold on ZEB adds a second kind of memory: after a long induction the
return to the epithelial state is delayed.
"""
from emtpop.regulatory import EpigeneticParams, with_alpha_epi
from emtpop.scenarios import hysteresis_metrics, run_epigenetic, run_hysteresis

# SNAIL goes 160K -> 240K over 5000 h and back.  Compare miR-200 at the
# two times SNAIL passes 200K.
run = run_hysteresis("homogeneous")
m = hysteresis_metrics(run)
print(f"miR-200 at S=200K: rising {m['mu_ascending']:.0f}, falling {m['mu_descending']:.0f}")
print(f"time near the hybrid branch: rising {m['hybrid_dwell_ascending']:.0f} h, "
      f"falling {m['hybrid_dwell_descending']:.0f} h")

# Epigenetic memory: recovery after short and long SNAIL induction,
# with and without coupling of the ZEB threshold.
for label, p in (("coupled", EpigeneticParams()), ("uncoupled", with_alpha_epi(EpigeneticParams(), 0.0))):
    short = run_epigenetic("short", p)
    long_ = run_epigenetic("long", p)
    print(f"{label:9s}: recovery {short.recovery_time:.0f} h after short induction, "
          f"{long_.recovery_time:.0f} h after long induction")
