"""Equilibria of the miR-200/ZEB model and their stability.

Roots are located on the nullcline composition: for each miR-200 level
the ZEB nullcline is solved for Z, and the miR-200 rate is evaluated
along it.  Sign changes on a 500-cell miR-200 grid bracket the roots,
which are then refined by bisection and polished with Newton steps.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .regulatory import EmtCoreParams, _core, _hill

__all__ = [
    "Equilibrium",
    "zeb_nullcline",
    "reduced_mu_rate",
    "equilibria",
    "jacobian",
    "bifurcation_table",
    "count_stable",
]

MU_MAX = 25_000.0


def _z_rate(mu, z, s, p):
    return _core(mu, z, s, p, _hill(z, p.h_z_mu200))[1]


def zeb_nullcline(mu, s, p: EmtCoreParams = EmtCoreParams(), iters: int = 80):
    """Z solving dZ/dt = 0 at the given miR-200 and SNAIL levels.

    dZ/dt is positive at Z = 0 and negative above the production bound
    ``g_z g_mz max(H) max(H) P(mu) / k_z``, so bisection on that bracket
    always converges.
    """
    mu, s = np.broadcast_arrays(np.asarray(mu, float), np.asarray(s, float))
    lo = np.zeros(mu.shape)
    # production at Z = 0 scaled by the largest possible Hill gain bounds the root
    hi = _z_rate(mu, lo, s, p) * max(1.0, p.h_z_mz.lam) / p.k_z + 1.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        pos = _z_rate(mu, mid, s, p) > 0
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
    return 0.5 * (lo + hi)


def reduced_mu_rate(mu, s, p: EmtCoreParams = EmtCoreParams()):
    """dmu200/dt evaluated on the ZEB nullcline; its roots are the equilibria."""
    z = zeb_nullcline(mu, s, p)
    return _core(np.asarray(mu, float), z, s, p, _hill(z, p.h_z_mu200))[0]


def jacobian(mu, z, s, p: EmtCoreParams = EmtCoreParams(), rel_step: float = 1e-4):
    """2x2 Jacobian of the field in (mu200, Z) by central differences."""
    def field(m, zz):
        return np.array(_core(np.asarray(m, float), np.asarray(zz, float), s, p,
                              _hill(np.asarray(zz, float), p.h_z_mu200)))

    hm = rel_step * max(abs(mu), 1.0)
    hz = rel_step * max(abs(z), 1.0)
    dmu = (field(mu + hm, z) - field(mu - hm, z)) / (2 * hm)
    dz = (field(mu, z + hz) - field(mu, z - hz)) / (2 * hz)
    return np.column_stack([dmu, dz])


@dataclass(frozen=True)
class Equilibrium:
    s: float
    mu200: float
    z: float
    eigenvalues: tuple[complex, complex]

    @property
    def stable(self) -> bool:
        return all(ev.real < 0 for ev in self.eigenvalues)


def _refine(a, b, s, p):
    """Vectorised bisection then Newton polish on the brackets ``[a, b]``."""
    a = np.asarray(a, float).copy()
    b = np.asarray(b, float).copy()
    s = np.asarray(s, float)
    fa = reduced_mu_rate(a, s, p)
    for _ in range(45):
        m = 0.5 * (a + b)
        fm = reduced_mu_rate(m, s, p)
        same = np.sign(fm) == np.sign(fa)
        a = np.where(same, m, a)
        fa = np.where(same, fm, fa)
        b = np.where(same, b, m)
    x = 0.5 * (a + b)
    for _ in range(2):
        h = 1e-6 * np.maximum(1.0, x)
        fx = reduced_mu_rate(x, s, p)
        d = (reduced_mu_rate(x + h, s, p) - reduced_mu_rate(x - h, s, p)) / (2 * h)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_new = x - fx / d
        ok = np.isfinite(x_new) & (x_new >= a) & (x_new <= b)
        x = np.where(ok, x_new, x)
    return x


def _classify(mu, s, p):
    z = zeb_nullcline(mu, s, p)
    out = []
    for m, zz, ss in zip(np.atleast_1d(mu), np.atleast_1d(z), np.atleast_1d(s)):
        ev = np.linalg.eigvals(jacobian(float(m), float(zz), float(ss), p))
        out.append(Equilibrium(float(ss), float(m), float(zz), tuple(complex(e) for e in ev)))
    return out


def bifurcation_table(s_values, p: EmtCoreParams = EmtCoreParams(), n_grid: int = 500,
                      mu_max: float = MU_MAX):
    """Equilibria for every SNAIL level, as a list of ``(s, [Equilibrium, ...])``.

    Bracketing and refinement are vectorised over all SNAIL levels at once.
    """
    s_values = np.atleast_1d(np.asarray(s_values, dtype=float))
    grid = np.linspace(0.0, mu_max, n_grid + 1)
    mu, ss = np.meshgrid(grid, s_values)
    g = reduced_mu_rate(mu, ss, p)
    rows, cols = np.nonzero(np.sign(g[:, :-1]) * np.sign(g[:, 1:]) < 0)
    roots = _refine(grid[cols], grid[cols + 1], s_values[rows], p)
    eqs = _classify(roots, s_values[rows], p)
    table = [(float(s), []) for s in s_values]
    for r, e in zip(rows, eqs):
        table[r][1].append(e)
    return table


def equilibria(s: float, p: EmtCoreParams = EmtCoreParams(), mu_max: float = MU_MAX,
               n_grid: int = 500) -> list[Equilibrium]:
    """All equilibria with miR-200 in ``[0, mu_max]`` at SNAIL level ``s``, sorted by miR-200."""
    return bifurcation_table([s], p, n_grid, mu_max)[0][1]


def count_stable(s: float, p: EmtCoreParams = EmtCoreParams()) -> int:
    return sum(e.stable for e in equilibria(s, p))
