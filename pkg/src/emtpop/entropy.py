"""Heterogeneity-dependent growth on the one-dimensional EMT axis.

SNAIL is frozen at 200K, so the only state variable is the reduced
miR-200 coordinate.  The division rate of every cell depends on the
current differential entropy of the population, which is recomputed from
the particle weights at every right-hand-side evaluation.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .integrate import IntegrationError, IntegratorConfig, integrate
from .particles import (
    DensityField,
    ParticleEnsemble,
    grid_centers,
    mutation_matrix,
    regularize,
    restart_from_field,
    _split,
)
from .reduction import X_MAX, ReducedAdvection, build_reduced

logger = logging.getLogger(__name__)

__all__ = [
    "entropy",
    "entropy_in_molecules",
    "growth_response",
    "EntropyGrowthModel",
    "EntropyRun",
    "INITIAL_KINDS",
    "initial_support",
    "initial_ensemble",
    "run_entropy_model",
]

R0 = 0.0182
INITIAL_KINDS = ("ep", "hyb", "mes", "ep_mes", "unif")


def _entropy(v, w):
    rho = v.sum()
    if not rho > 0:
        raise ValueError("entropy of an empty population is undefined")
    p = v / rho
    pos = p > 0
    return float(-np.sum(p[pos] * np.log(p[pos] / w[pos])))


def entropy(e: ParticleEnsemble) -> float:
    """Discrete differential entropy ``-sum (v/rho) ln(v / (w rho))``.

    Empty particles contribute nothing (the ``p ln p -> 0`` limit).  The
    value is in the units of the particle coordinates, so on the unit
    interval it is at most 0, reached by the uniform density.
    """
    return _entropy(e.masses, e.volumes)


def entropy_in_molecules(e: ParticleEnsemble, scale: float = X_MAX) -> float:
    """Entropy of a unit-interval ensemble re-expressed for a ``[0, scale]`` axis."""
    return entropy(e) + math.log(scale)


def growth_response(E, kind: str = "hill", theta: float = 9.0, r0: float = R0):
    """Division rate as a function of population entropy (per hour).

    ``"hill"`` is ``r0 (theta^6 + 2 E^6) / (theta^6 + E^6)``, rising from
    ``r0`` to ``2 r0`` with half-way point at ``theta``.  ``"linear"`` is
    ``r0 + 0.01 (E - 8)``.
    """
    E = np.asarray(E, dtype=float)
    if kind == "hill":
        if np.any(E < 0):
            raise ValueError("the Hill response needs non-negative entropy")
        t6, e6 = theta**6, E**6
        return r0 * (t6 + 2 * e6) / (t6 + e6)
    if kind == "linear":
        return r0 + 0.01 * (E - 8.0)
    raise ValueError(f"unknown growth response {kind!r}; use 'hill' or 'linear'")


@dataclass(frozen=True)
class EntropyGrowthModel:
    """Entropy-coupled growth with SNAIL held fixed.

    Death per cell is ``r / death_ratio`` times the population, so the
    population saturates at ``death_ratio`` cells whatever the entropy.
    """

    response: str = "hill"
    theta: float = 9.0
    r0: float = R0
    eta_x: float = 4000.0
    snail: float = 200_000.0
    death_ratio: float = 10_000.0
    advection: ReducedAdvection = field(default_factory=build_reduced)

    def __post_init__(self):
        if self.response not in ("hill", "linear"):
            raise ValueError(f"unknown growth response {self.response!r}")
        if self.eta_x <= 0 or self.death_ratio <= 0 or self.r0 <= 0:
            raise ValueError("eta_x, death_ratio and r0 must be positive")

    def rate(self, E):
        return growth_response(E, self.response, self.theta, self.r0)

    def flow(self, x_unit):
        """Velocity and divergence on the unit interval."""
        f, div = self.advection.evaluate(X_MAX * x_unit, np.full_like(x_unit, self.snail))
        return f / X_MAX, div

    def rhs(self, y, w, v):
        x = np.clip(y[:, 0], 0.0, 1.0)
        f, div = self.flow(x)
        rho = v.sum()
        vp = np.maximum(v, 0.0)
        if not vp.sum() > 0 or np.any(w <= 0):
            # only a wildly oversized trial stage gets here; NaN makes the step fail
            return f[:, None], div * w, np.full_like(v, np.nan)
        E = _entropy(vp, w) + math.log(X_MAX)
        r = float(self.rate(E))
        d = r / self.death_ratio
        K = mutation_matrix(x[:, None], (self.eta_x / X_MAX,))
        dv = (r - d * rho) * v + r * (w * (K @ v) - v * (K @ w))
        return f[:, None], div * w, dv


def initial_support(kind: str, ra: ReducedAdvection | None = None, snail: float = 200_000.0,
                    half_width: float = 2000.0) -> list[tuple[float, float]]:
    """x-intervals (molecules) of the starting populations."""
    if kind == "unif":
        return [(0.0, X_MAX)]
    ra = build_reduced() if ra is None else ra
    stable = ra.stable_roots(np.array(snail))
    stable = stable[np.isfinite(stable)]
    if len(stable) != 3:
        raise ValueError(f"SNAIL level {snail} is not tristable")
    roots = dict(zip(("mes", "hyb", "ep"), stable))
    names = {"ep": ["ep"], "hyb": ["hyb"], "mes": ["mes"], "ep_mes": ["ep", "mes"]}
    try:
        parts = names[kind]
    except KeyError:
        raise ValueError(f"unknown initial condition {kind!r}; choose from {INITIAL_KINDS}") from None
    return [(max(0.0, roots[p] - half_width), min(X_MAX, roots[p] + half_width)) for p in parts]


def _overlap_masses(n: int, intervals_unit, total: float) -> np.ndarray:
    """Mass of a uniform density on the intervals falling in each of ``n`` cells."""
    edges = np.linspace(0.0, 1.0, n + 1)
    dens = np.zeros(n)
    for a, b in intervals_unit:
        dens += np.clip(np.minimum(edges[1:], b) - np.maximum(edges[:-1], a), 0.0, None)
    if dens.sum() <= 0:
        raise ValueError("initial support misses every grid cell")
    return total * dens / dens.sum()


def initial_ensemble(kind: str, n: int = 50, total: float = 100.0,
                     ra: ReducedAdvection | None = None, snail: float = 200_000.0) -> ParticleEnsemble:
    """Grid ensemble on the unit interval holding ``total`` cells, uniform on the support.

    Each particle receives the exact mass of the uniform density over its
    cell, so supports narrower than a cell are still represented.
    """
    support = [(a / X_MAX, b / X_MAX) for a, b in initial_support(kind, ra, snail)]
    masses = _overlap_masses(n, support, total)
    return ParticleEnsemble(grid_centers(n)[:, None], np.full(n, 1.0 / n), masses)


@dataclass
class EntropyRun:
    times: np.ndarray
    entropy: np.ndarray  # molecule units
    rho: np.ndarray
    fields: list[DensityField]
    response: str
    theta: float

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write("t_hours,entropy,rho,response_kind,theta\n")
            for t, E, r in zip(self.times, self.entropy, self.rho):
                fh.write(f"{float(t)!r},{float(E)!r},{float(r)!r},{self.response},{float(self.theta)!r}\n")


def run_entropy_model(initial: str | ParticleEnsemble, model: EntropyGrowthModel = None,
                      checkpoints: Sequence[float] = tuple(range(24, 481, 24)),
                      n: int = 50, gamma: float = 0.8,
                      cfg: IntegratorConfig = IntegratorConfig(rtol=1e-6, atol=1e-8)) -> EntropyRun:
    """Particle simulation with entropy recomputed inside every right-hand side.

    Returns entropy (molecule units) and population size at time 0 and at
    every checkpoint, together with the regularised fields.
    """
    model = EntropyGrowthModel() if model is None else model
    e = initial if isinstance(initial, ParticleEnsemble) else initial_ensemble(
        initial, n, ra=model.advection, snail=model.snail)
    if not e.rho > 0:
        raise ValueError("initial population is empty")
    checkpoints = [float(c) for c in checkpoints]
    if any(b <= a for a, b in zip([e.t] + checkpoints, checkpoints)):
        raise ValueError("checkpoints must be strictly increasing and follow the start time")
    n_p = len(e.masses)

    def rhs(_, s):
        y, w, v = _split(s, n_p, 1)
        dy, dw, dv = model.rhs(y, w, v)
        return np.concatenate([dy.ravel(), dw, dv])

    times, ents, rhos, fields = [e.t], [entropy_in_molecules(e)], [e.rho], []
    for tc in checkpoints:
        try:
            traj = integrate(rhs, e.pack(), (e.t, tc), cfg)
        except IntegrationError:
            logger.error("entropy-model window ending at %g h failed", tc)
            raise
        moved = ParticleEnsemble.unpack(traj.y[-1], n_p, 1, tc)
        fld = regularize(moved, gamma, n_grid=n)
        fields.append(fld)
        e = restart_from_field(fld)
        times.append(tc)
        ents.append(entropy_in_molecules(e))
        rhos.append(e.rho)
    return EntropyRun(np.array(times), np.array(ents), np.array(rhos), fields,
                      model.response, model.theta)
