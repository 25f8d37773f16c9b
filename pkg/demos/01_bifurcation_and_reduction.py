"""
From the regulatory circuit to a one-dimensional flow
=====================================================

The miR-200/ZEB circuit driven by SNAIL has one, two or three stable
states depending on the SNAIL level.  This script walks through the
equilibria of the full two-variable model, the branch polynomials that
summarise them, and the piecewise-linear reduced flow built from those
branches.
"""
import numpy as np

from emtpop.bifurcation import equilibria
from emtpop.reduction import StabilityIntervals, build_reduced, table3_polynomials

# Equilibria of the full model at a few SNAIL levels.  Stable and
# unstable states alternate along the miR-200 axis.
for s in (160e3, 190e3, 200e3, 215e3, 240e3):
    eqs = equilibria(s)
    desc = ", ".join(f"{e.mu200:8.0f}{'*' if e.stable else ' '}" for e in eqs)
    print(f"S = {s / 1e3:5.0f}K  mu200 = {desc}   (* stable)")

# The SNAIL axis splits into five intervals with 1/2/3/2/1 stable states.
iv = StabilityIntervals()
for (lo, hi), n in zip(iv.as_list(), (1, 2, 3, 2, 1)):
    print(f"[{lo / 1e3:7.2f}K, {hi / 1e3:7.2f}K]: {n} stable")

# The reduced flow f_r(x, S) vanishes on the branch polynomials and is
# piecewise linear in x with slope -k around stable roots and +k around
# unstable ones.
ra = build_reduced()
s = 200e3
print("reduced roots at 200K:", np.round(ra.roots(s)).tolist())
print("full-model roots at 200K:", [round(e.mu200) for e in equilibria(s)])

# The published polynomial coefficients are kept verbatim for reference;
# their unstable rows sit far from the computed branches.
t3 = table3_polynomials()
for role in ("u1", "u2"):
    lo, hi = iv.branch_domain(role)
    mid = 0.5 * (lo + hi)
    print(f"{role} at {mid / 1e3:.1f}K: published {float(t3[role](mid)):9.0f}  "
          f"refitted {float(ra.polys[role](mid)):9.0f}")

# A cell at x = 9000 near 200K drifts to the hybrid root.
x = 9000.0
for _ in range(300):
    x += ra(x, s) * 1.0
print(f"x after 300 h from 9000: {x:.0f} (hybrid root {ra.stable_roots(s)[1]:.0f})")
