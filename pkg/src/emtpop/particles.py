"""Weighted-particle solver for advection-selection-mutation equations.

Each particle carries a position ``y`` in the unit box, a volume weight
``w`` (local Jacobian of the flow) and a mass ``v`` (number of cells).
Positions follow the advection field, volumes follow its divergence, and
masses follow logistic growth plus a division-linked mutation exchange.
Every few hours the particle cloud is smoothed with a Gaussian kernel onto
the regular grid and the particles are re-seeded there.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.special import ndtr

from .integrate import IntegrationError, IntegratorConfig, integrate

logger = logging.getLogger(__name__)

__all__ = [
    "Rescaling",
    "MutationKernel",
    "PopulationModel",
    "ParticleEnsemble",
    "DensityField",
    "bandwidth",
    "grid_centers",
    "rescale",
    "mutation_matrix",
    "particle_rhs",
    "simulate_window",
    "regularize",
    "restart_from_field",
    "run_schedule",
    "ensemble_from_density",
    "write_field_csv",
    "save_ensemble",
    "load_ensemble",
]


@dataclass(frozen=True)
class Rescaling:
    """Affine map of ``[B, B+A] x [D, D+C]`` (molecules) onto the unit square."""

    A: float = 25_000.0
    B: float = 0.0
    C: float = 100_000.0
    D: float = 150_000.0

    def __post_init__(self):
        if self.A <= 0 or self.C <= 0:
            raise ValueError("scale factors must be positive")

    @property
    def domain(self):
        return ((self.B, self.B + self.A), (self.D, self.D + self.C))

    @property
    def jacobian(self) -> float:
        return self.A * self.C

    def to_unit(self, x, s):
        return (np.asarray(x, float) - self.B) / self.A, (np.asarray(s, float) - self.D) / self.C

    def from_unit(self, ux, us):
        return self.A * np.asarray(ux, float) + self.B, self.C * np.asarray(us, float) + self.D


@dataclass(frozen=True)
class MutationKernel:
    """Gaussian jump law applied at division; standard deviations per axis."""

    eta_x: float
    eta_s: float | None = None

    def __post_init__(self):
        if self.eta_x <= 0 or (self.eta_s is not None and self.eta_s <= 0):
            raise ValueError("mutation standard deviations must be positive")

    @property
    def stds(self) -> tuple[float, ...]:
        return (self.eta_x,) if self.eta_s is None else (self.eta_x, self.eta_s)


Field = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class PopulationModel:
    """Advection, growth, death and mutation on an axis-aligned box.

    Callables receive positions of shape ``(n, dim)``.  ``flow`` returns the
    velocity ``(n, dim)`` and its divergence ``(n,)``; ``growth`` returns
    ``(n,)``.  ``death`` is
    the per-cell competition rate (multiplied by the total population).
    ``mutation`` holds per-axis standard deviations in the box's units, or
    ``None`` to switch mutations off.
    """

    flow: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]
    growth: Field
    death: float
    mutation: tuple[float, ...] | None
    domain: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if self.death < 0:
            raise ValueError("death rate must be non-negative")
        for lo, hi in self.domain:
            if not hi > lo:
                raise ValueError("empty domain axis")
        if self.mutation is not None:
            if len(self.mutation) != self.dim or min(self.mutation) <= 0:
                raise ValueError("mutation needs one positive std per axis")

    @property
    def dim(self) -> int:
        return len(self.domain)


def rescale(model: PopulationModel, r: Rescaling = Rescaling()) -> PopulationModel:
    """Same model written on the unit square.

    Velocities are divided by the axis scale, divergence is unchanged by the
    affine map, growth and death are evaluated at the mapped point, and the
    mutation widths shrink by the axis scales, which is the kernel density
    scaled by ``A*C``.
    """
    if model.dim != 2:
        raise ValueError("rescaling applies to the two-dimensional (x, S) model")
    if not np.allclose(np.array(model.domain), np.array(r.domain)):
        raise ValueError(f"model domain {model.domain} does not match {r.domain}")
    scale = np.array([r.A, r.C])
    shift = np.array([r.B, r.D])

    def to_raw(y):
        return y * scale + shift

    def flow(y):
        f, div = model.flow(to_raw(y))
        return f / scale, div

    return PopulationModel(
        flow=flow,
        growth=lambda y: model.growth(to_raw(y)),
        death=model.death,
        mutation=None if model.mutation is None else tuple(np.array(model.mutation) / scale),
        domain=((0.0, 1.0), (0.0, 1.0)),
    )


def bandwidth(n_particles: int, gamma: float = 0.8) -> float:
    """Regularisation width ``(1 / n_particles) ** gamma``."""
    if not 0.5 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0.5, 1), got {gamma}")
    return (1.0 / n_particles) ** gamma


def grid_centers(n: int, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    return lo + (np.arange(n) + 0.5) * (hi - lo) / n


@dataclass
class ParticleEnsemble:
    positions: np.ndarray  # (n, dim)
    volumes: np.ndarray  # (n,)
    masses: np.ndarray  # (n,)
    t: float = 0.0

    def __post_init__(self):
        self.positions = np.atleast_2d(np.asarray(self.positions, float))
        self.volumes = np.asarray(self.volumes, float)
        self.masses = np.asarray(self.masses, float)
        n = self.positions.shape[0]
        if self.volumes.shape != (n,) or self.masses.shape != (n,):
            raise ValueError("positions, volumes and masses disagree on particle count")
        if np.any(self.volumes <= 0):
            raise ValueError("volume weights must be positive")
        if np.any(self.masses < 0):
            raise ValueError("mass weights must be non-negative")

    @property
    def rho(self) -> float:
        return float(self.masses.sum())

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    def pack(self) -> np.ndarray:
        return np.concatenate([self.positions.ravel(), self.volumes, self.masses])

    @classmethod
    def unpack(cls, state: np.ndarray, n: int, dim: int, t: float) -> "ParticleEnsemble":
        y, w, v = _split(state, n, dim)
        # integrator round-off can leave tiny negative masses next to empty particles
        return cls(y.copy(), w.copy(), np.maximum(v, 0.0), t)


def _split(state, n, dim):
    y = state[: n * dim].reshape(n, dim)
    w = state[n * dim : n * dim + n]
    v = state[n * dim + n :]
    return y, w, v


def mutation_matrix(positions: np.ndarray, stds: Sequence[float], cutoff: float | None = None):
    """Gaussian jump densities ``K[i, j] = P(y_i - y_j)``; symmetric.

    With ``cutoff`` (in standard deviations) entries farther apart than that
    along any axis are set to zero.
    """
    stds = np.asarray(stds, dtype=float)
    z = positions / stds
    if cutoff is None:
        # |z_i - z_j|^2 expanded so the pairwise work is one matrix product
        sq = np.einsum("ij,ij->i", z, z)
        K = z @ z.T
        K *= 2.0
        K -= sq[:, None]
        K -= sq[None, :]
        np.minimum(K, 0.0, out=K)
        K *= 0.5
    else:
        K = np.zeros((len(z), len(z)))
        far = np.zeros(K.shape, dtype=bool)
        for a in range(z.shape[1]):
            d = z[:, a, None] - z[None, :, a]
            K -= 0.5 * d * d
            far |= np.abs(d) > cutoff
    np.exp(K, out=K)
    K /= np.prod(np.sqrt(2 * np.pi) * stds)
    if cutoff is not None:
        K[far] = 0.0
    return K


def particle_rhs(e: ParticleEnsemble, m: PopulationModel, cutoff: float | None = None):
    """Time derivatives ``(dy, dw, dv)`` of the particle system.

    The mutation gain into particle ``i`` is ``w_i sum_j M(y_i, y_j) v_j`` and
    the loss is ``v_i sum_j w_j M(y_j, y_i)``; both sums are quadratures
    over the same weights, so mutations move mass without creating any.
    """
    return _rhs(e.positions, e.volumes, e.masses, m, cutoff)


def _rhs(y, w, v, m: PopulationModel, cutoff=None):
    yc = np.clip(y, [lo for lo, _ in m.domain], [hi for _, hi in m.domain])
    f, div = m.flow(yc)
    r = m.growth(yc)
    for name, arr in (("velocity", f), ("divergence", div), ("growth", r)):
        bad = ~np.isfinite(arr)
        if np.any(bad):
            idx = int(np.argwhere(bad)[0][0])
            raise FloatingPointError(f"non-finite {name} at particle {idx}, position {y[idx]}")
    rho = v.sum()
    dv = (r - m.death * rho) * v
    if m.mutation is not None:
        K = mutation_matrix(yc, m.mutation, cutoff)
        dv = dv + w * (K @ (r * v)) - r * v * (K @ w)
    return f, div * w, dv


def simulate_window(e: ParticleEnsemble, m: PopulationModel, t_end: float,
                    cfg: IntegratorConfig = IntegratorConfig(), cutoff: float | None = None,
                    t_eval: Sequence[float] | None = None):
    """Advance the ensemble to ``t_end``.

    Returns the final ensemble, or ``(final, [(t, ensemble), ...])`` when
    intermediate output times are requested.
    """
    if t_end < e.t:
        raise ValueError("t_end precedes the ensemble time")
    if t_end == e.t:
        return e if t_eval is None else (e, [(e.t, e)])
    n, dim = e.positions.shape
    scale = max(e.rho, 1.0)

    def rhs(_, s):
        y, w, v = _split(s, n, dim)
        dy, dw, dv = _rhs(y, w, v, m, cutoff)
        return np.concatenate([dy.ravel(), dw, dv])

    def check(t, s):
        v = s[n * dim + n :]
        if v.min() < -1e-8 * scale:
            raise IntegrationError("particle mass went negative", t, s)

    times = None if t_eval is None else [e.t, *[t for t in t_eval if e.t < t < t_end], t_end]
    traj = integrate(rhs, e.pack(), (e.t, t_end), cfg, t_eval=times, on_step=check)
    final = ParticleEnsemble.unpack(traj.y[-1], n, dim, t_end)
    if t_eval is None:
        return final
    return final, [(t, ParticleEnsemble.unpack(s, n, dim, t)) for t, s in zip(traj.t, traj.y)]


@dataclass
class DensityField:
    """Density samples on the regular ``N^dim`` grid of the unit box.

    ``values[i, j]`` is the density at ``(centers[0][i], centers[1][j])``;
    ``leaked`` is the particle mass the kernels placed outside the box.
    """

    centers: tuple[np.ndarray, ...]
    values: np.ndarray
    epsilon: float
    t: float = 0.0
    leaked: float = 0.0

    @property
    def cell_volume(self) -> float:
        return float(np.prod([1.0 / len(c) for c in self.centers]))

    @property
    def rho(self) -> float:
        return float(self.values.sum() * self.cell_volume)

    @property
    def dim(self) -> int:
        return len(self.centers)

    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.centers, indexing="ij")
        return np.stack([g.ravel() for g in mesh], axis=-1)

    def marginal(self, axis: int = 0) -> np.ndarray:
        """Density of one coordinate, integrating out the others."""
        other = tuple(a for a in range(self.dim) if a != axis)
        width = np.prod([1.0 / len(self.centers[a]) for a in other]) if other else 1.0
        return self.values.sum(axis=other) * width if other else self.values.copy()


def _cell_weights(centers: np.ndarray, pos: np.ndarray, eps: float, mode: str):
    """Per-axis deposit weights ``W[k, i]`` of particle ``i`` into cell ``k``, per unit length."""
    h = 1.0 / len(centers)
    if mode == "cell":
        edges = np.append(centers - 0.5 * h, centers[-1] + 0.5 * h)
        cdf = ndtr((edges[:, None] - pos[None, :]) / eps)
        return np.diff(cdf, axis=0) / h
    if mode == "point":
        d = (centers[:, None] - pos[None, :]) / eps
        return np.exp(-0.5 * d * d) / (np.sqrt(2 * np.pi) * eps)
    raise ValueError(f"unknown deposit mode {mode!r}")


def regularize(e: ParticleEnsemble, gamma: float = 0.8, n_grid: int | None = None,
               epsilon: float | None = None, deposit: str = "cell") -> DensityField:
    """Gaussian-smoothed density of the ensemble on the regular grid.

    Parameters
    ----------
    gamma
        Bandwidth exponent; the width is ``(1 / n_particles) ** gamma``.
    n_grid
        Grid cells per axis; defaults to ``n_particles ** (1 / dim)``.
    epsilon
        Explicit bandwidth overriding ``gamma``.
    deposit
        ``"cell"`` stores the average of the smoothed density over each grid
        cell, which keeps the mass exact apart from kernel tails falling
        outside the box.  ``"point"`` samples the smoothed density at the
        cell centres, which only approximates the mass when the bandwidth
        exceeds the grid spacing.
    """
    n, dim = e.positions.shape
    if n_grid is None:
        n_grid = int(round(n ** (1.0 / dim)))
    eps = bandwidth(n, gamma) if epsilon is None else float(epsilon)
    centers = tuple(grid_centers(n_grid) for _ in range(dim))
    W = [_cell_weights(centers[a], e.positions[:, a], eps, deposit) for a in range(dim)]
    if dim == 1:
        values = W[0] @ e.masses
    elif dim == 2:
        values = (W[0] * e.masses) @ W[1].T
    else:
        raise ValueError("only 1-D and 2-D ensembles are supported")
    fld = DensityField(centers, values, eps, e.t)
    fld.leaked = e.rho - fld.rho
    if e.rho > 0 and abs(fld.leaked) > 0.02 * e.rho:
        logger.info("regularisation at t=%g changed mass by %.2f%%", e.t, -100 * fld.leaked / e.rho)
    return fld


def restart_from_field(d: DensityField) -> ParticleEnsemble:
    """Fresh particles at the grid points carrying the field's cell masses."""
    values = d.values
    if np.any(values < 0):
        clamped = float(-values[values < 0].sum() * d.cell_volume)
        logger.warning("clamping negative density at restart (mass %.3g)", clamped)
        values = np.maximum(values, 0.0)
    pts = d.points()
    vol = d.cell_volume
    return ParticleEnsemble(pts, np.full(len(pts), vol), values.ravel() * vol, d.t)


def ensemble_from_density(density: Callable[[np.ndarray], np.ndarray], n_grid: int,
                          dim: int = 2, t: float = 0.0) -> ParticleEnsemble:
    """Grid ensemble with ``v_i = u0(y_i) / n_grid**dim``."""
    centers = tuple(grid_centers(n_grid) for _ in range(dim))
    fld = DensityField(centers, np.zeros((n_grid,) * dim), 0.0, t)
    pts = fld.points()
    vol = fld.cell_volume
    u = np.asarray(density(pts), float)
    if np.any(u < 0):
        raise ValueError("initial density must be non-negative")
    return ParticleEnsemble(pts, np.full(len(pts), vol), u * vol, t)


def run_schedule(m: PopulationModel, initial: ParticleEnsemble, checkpoints: Sequence[float],
                 gamma: float = 0.8, cfg: IntegratorConfig = IntegratorConfig(),
                 deposit: str = "cell", epsilon: float | None = None,
                 cutoff: float | None = None,
                 on_checkpoint: Callable[[DensityField], None] | None = None) -> list[DensityField]:
    """Alternate particle transport and regularisation at every checkpoint.

    Returns the regularised field at each checkpoint.  Particles are re-seeded
    on the grid after each one, which keeps the flow from piling them up.
    """
    checkpoints = [float(c) for c in checkpoints]
    if any(b <= a for a, b in zip(checkpoints, checkpoints[1:])):
        raise ValueError("checkpoints must be strictly increasing")
    if checkpoints and checkpoints[0] <= initial.t:
        raise ValueError("first checkpoint must follow the initial time")
    e = initial
    fields = []
    for tc in checkpoints:
        e = simulate_window(e, m, tc, cfg, cutoff)
        fld = regularize(e, gamma, epsilon=epsilon, deposit=deposit)
        fields.append(fld)
        if on_checkpoint is not None:
            on_checkpoint(fld)
        logger.debug("t=%g rho=%.6g leaked=%.3g", tc, fld.rho, fld.leaked)
        e = restart_from_field(fld)
    return fields


# --- serialisation ---------------------------------------------------------


def write_field_csv(fields: Sequence[DensityField], path, r: Rescaling = Rescaling(),
                    gamma: float = 0.8) -> Path:
    """Fields as ``t_hours,x_molecules,S_molecules,density`` rows in molecule units.

    Density is cells per molecule^2 (per molecule in one dimension).
    """
    path = Path(path)
    with path.open("w", newline="") as fh:
        if fields:
            f0 = fields[0]
            fh.write(f"# N={len(f0.centers[0])} gamma={float(gamma)!r} epsilon={float(fields[-1].epsilon)!r} "
                     f"rho_final={float(fields[-1].rho)!r}\n")
        fh.write("t_hours,x_molecules,S_molecules,density\n")
        for fld in fields:
            if fld.dim == 2:
                X, S = r.from_unit(*np.meshgrid(*fld.centers, indexing="ij"))
                dens = fld.values / r.jacobian
                for x, s, u in zip(X.ravel(), S.ravel(), dens.ravel()):
                    fh.write(f"{float(fld.t)!r},{float(x)!r},{float(s)!r},{float(u)!r}\n")
            else:
                X = r.A * fld.centers[0] + r.B
                for x, u in zip(X, fld.values / r.A):
                    fh.write(f"{float(fld.t)!r},{float(x)!r},,{float(u)!r}\n")
    return path


def save_ensemble(e: ParticleEnsemble, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps({
        "t": e.t,
        "positions": e.positions.tolist(),
        "volumes": e.volumes.tolist(),
        "masses": e.masses.tolist(),
    }))
    return path


def load_ensemble(path) -> ParticleEnsemble:
    d = json.loads(Path(path).read_text())
    return ParticleEnsemble(np.array(d["positions"]), np.array(d["volumes"]),
                            np.array(d["masses"]), d["t"])
