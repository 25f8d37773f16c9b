"""Regulatory ODE right-hand sides for the miR-200 / ZEB / SNAIL motif.

All molecule counts are raw molecules (not thousands) and time is in hours.
Every function accepts scalars or numpy arrays and broadcasts, so the same
code serves single trajectories, whole particle ensembles and bifurcation
scans.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "HillParams",
    "TranslationTables",
    "EmtCoreParams",
    "EpigeneticParams",
    "SnailDynamics",
    "shifted_hill",
    "translation_functions",
    "emt_core_rhs",
    "epigenetic_rhs",
    "snail_rhs",
    "snail_exact",
    "SnailSchedule",
    "snail_schedule",
    "SCHEDULES",
]


@dataclass(frozen=True)
class HillParams:
    """Shifted Hill function parameters: fold change, threshold, coefficient."""

    lam: float
    x0: float
    n: int

    def __post_init__(self):
        if self.x0 <= 0:
            raise ValueError(f"Hill threshold must be positive, got {self.x0}")
        if self.n < 1:
            raise ValueError(f"Hill coefficient must be >= 1, got {self.n}")
        if self.lam < 0:
            raise ValueError(f"Hill fold change must be >= 0, got {self.lam}")


@dataclass(frozen=True)
class TranslationTables:
    """Coefficients of L, Y_mu and Y_m (binomial sums over bound miR-200)."""

    l: tuple[float, ...] = (1.0, 0.6, 0.3, 0.1, 0.05, 0.05, 0.05)
    gamma_m: tuple[float, ...] = (0.04, 0.2, 1.0, 1.0, 1.0, 1.0)
    gamma_mu: tuple[float, ...] = (0.005, 0.05, 0.5, 0.5, 0.5, 0.5)
    mu0: float = 10_000.0
    n: int = 6

    def __post_init__(self):
        if len(self.l) != self.n + 1:
            raise ValueError("l needs n + 1 coefficients")
        if len(self.gamma_m) != self.n or len(self.gamma_mu) != self.n:
            raise ValueError("gamma_m and gamma_mu need n coefficients")
        if min(self.l + self.gamma_m + self.gamma_mu) < 0:
            raise ValueError("translation coefficients must be non-negative")


@dataclass(frozen=True)
class EmtCoreParams:
    """Rates and Hill terms of the two-variable miR-200/ZEB model."""

    g_mu200: float = 2100.0
    g_mz: float = 11.0
    g_z: float = 100.0
    k_mu200: float = 0.05
    k_z: float = 0.1
    k_mz: float = 0.5
    h_z_mu200: HillParams = HillParams(lam=0.1, x0=220_000.0, n=3)
    h_s_mu200: HillParams = HillParams(lam=0.1, x0=180_000.0, n=2)
    h_z_mz: HillParams = HillParams(lam=7.5, x0=25_000.0, n=2)
    h_s_mz: HillParams = HillParams(lam=10.0, x0=180_000.0, n=2)
    tables: TranslationTables = field(default_factory=TranslationTables)

    def __post_init__(self):
        rates = (self.g_mu200, self.g_mz, self.g_z, self.k_mu200, self.k_z, self.k_mz)
        if min(rates) <= 0:
            raise ValueError("production and degradation rates must be positive")


@dataclass(frozen=True)
class EpigeneticParams:
    """Slow epigenetic feedback on the ZEB threshold inhibiting miR-200.

    ``alpha_epi`` is the dimensionless coupling (not the SNAIL relaxation
    time, which lives in :class:`SnailDynamics`).
    """

    core: EmtCoreParams = field(default_factory=EmtCoreParams)
    alpha_epi: float = 0.15
    beta_up: float = 240.0
    beta_down: float = 720.0
    z0_baseline: float = 220_000.0

    def __post_init__(self):
        if self.beta_up <= 0 or self.beta_down <= 0:
            raise ValueError("beta_up and beta_down must be positive")
        if not 0 <= self.alpha_epi < 1:
            raise ValueError(f"alpha_epi must lie in [0, 1), got {self.alpha_epi}")


@dataclass(frozen=True)
class SnailDynamics:
    """Linear relaxation of SNAIL toward its population mean ``s0``."""

    s0: float = 200_000.0
    alpha_relax: float = 120.0

    def __post_init__(self):
        if not 150_000.0 <= self.s0 <= 250_000.0:
            raise ValueError(f"s0 must lie in [150K, 250K], got {self.s0}")
        if self.alpha_relax <= 0:
            raise ValueError("alpha_relax must be positive")

    @property
    def delta(self) -> float:
        return self.s0 * math.log(2.0) / self.alpha_relax


def _require_nonneg(name, x):
    if np.any(np.asarray(x) < 0):
        raise ValueError(f"{name} must be non-negative")


def _hill(x, p: HillParams):
    r = (x / p.x0) ** p.n
    return (1.0 + p.lam * r) / (1.0 + r)


def shifted_hill(x, p: HillParams):
    """(1 + lam (x/x0)^n) / (1 + (x/x0)^n)."""
    _require_nonneg("x", x)
    return _hill(np.asarray(x, dtype=float), p)


def _binomial_moments(mu, t: TranslationTables):
    """Stack of C(n, i) M_n^i(mu) for i = 0..n along the first axis."""
    q = np.asarray(mu, dtype=float) / t.mu0
    denom = (1.0 + q) ** t.n
    return np.stack([math.comb(t.n, i) * q**i / denom for i in range(t.n + 1)])


def translation_functions(mu, t: TranslationTables, k_mz: float | None = None):
    """Return ``(L, Y_mu, Y_m)`` at miR-200 level ``mu``.

    When ``k_mz`` is given, the ratios ``P = L / (Y_m + k_mz)`` and
    ``Q = Y_mu / (Y_m + k_mz)`` are appended to the tuple.
    """
    _require_nonneg("mu", mu)
    L, y_mu, y_m = _lyy(np.asarray(mu, dtype=float), t)
    if k_mz is None:
        return L, y_mu, y_m
    return L, y_mu, y_m, L / (y_m + k_mz), y_mu / (y_m + k_mz)


def _lyy(mu, t: TranslationTables):
    m = _binomial_moments(mu, t)
    shape = (-1,) + (1,) * (m.ndim - 1)
    idx = np.arange(1, t.n + 1)
    L = np.sum(np.asarray(t.l).reshape(shape) * m, axis=0)
    y_mu = np.sum((idx * np.asarray(t.gamma_mu)).reshape(shape) * m[1:], axis=0)
    y_m = np.sum(np.asarray(t.gamma_m).reshape(shape) * m[1:], axis=0)
    return L, y_mu, y_m


def _core(mu200, z, s, p: EmtCoreParams, h_z_mu200):
    """Unchecked field; callers guarantee non-negative inputs."""
    L, y_mu, y_m = _lyy(mu200, p.tables)
    P = L / (y_m + p.k_mz)
    Q = y_mu / (y_m + p.k_mz)
    mz_drive = p.g_mz * _hill(z, p.h_z_mz) * _hill(s, p.h_s_mz)
    dmu = (
        p.g_mu200 * h_z_mu200 * _hill(s, p.h_s_mu200)
        - mz_drive * Q
        - p.k_mu200 * mu200
    )
    dz = p.g_z * mz_drive * P - p.k_z * z
    return dmu, dz


def emt_core_rhs(mu200, z, s, p: EmtCoreParams = EmtCoreParams()):
    """Time derivatives ``(dmu200/dt, dZ/dt)`` of the miR-200/ZEB model."""
    for name, v in (("mu200", mu200), ("Z", z), ("S", s)):
        _require_nonneg(name, v)
    mu200 = np.asarray(mu200, dtype=float)
    z = np.asarray(z, dtype=float)
    return _core(mu200, z, s, p, _hill(z, p.h_z_mu200))


def epigenetic_rhs(mu200, z, z0, s, p: EpigeneticParams = EpigeneticParams(),
                   snail_increasing=True):
    """Three-component field ``(dmu200, dZ, dZ0)`` with a dynamic ZEB threshold.

    The miR-200 inhibition by ZEB uses the shifted Hill function of
    :attr:`EmtCoreParams.h_z_mu200` with its threshold replaced by ``z0``.
    The threshold relaxes on the time scale ``beta_up`` while SNAIL is
    non-decreasing and ``beta_down`` otherwise.
    """
    for name, v in (("mu200", mu200), ("Z", z), ("Z0", z0), ("S", s)):
        _require_nonneg(name, v)
    mu200 = np.asarray(mu200, dtype=float)
    z = np.asarray(z, dtype=float)
    z0 = np.asarray(z0, dtype=float)
    h = p.core.h_z_mu200
    ratio = (z / z0) ** h.n
    dmu, dz = _core(mu200, z, s, p.core, (1.0 + h.lam * ratio) / (1.0 + ratio))
    beta = np.where(snail_increasing, p.beta_up, p.beta_down)
    dz0 = (p.z0_baseline - z0 - p.alpha_epi * z) / beta
    return dmu, dz, dz0


def snail_rhs(s, d: SnailDynamics):
    """delta (1 - S / s0); S halves its distance to s0 every alpha_relax hours."""
    _require_nonneg("S", s)
    return d.delta * (1.0 - np.asarray(s, dtype=float) / d.s0)


def snail_exact(t, s_init, d: SnailDynamics):
    """Closed-form solution of :func:`snail_rhs` from ``S(0) = s_init``."""
    return d.s0 - (d.s0 - s_init) * 2.0 ** (-np.asarray(t, dtype=float) / d.alpha_relax)


@dataclass(frozen=True)
class SnailSchedule:
    """Piecewise-linear SNAIL input through a list of ``(t, S)`` breakpoints."""

    name: str
    times: tuple[float, ...]
    values: tuple[float, ...]

    @property
    def t_end(self) -> float:
        return self.times[-1]

    def _check(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < self.times[0]) or np.any(t > self.times[-1]):
            raise ValueError(
                f"t outside schedule '{self.name}' domain "
                f"[{self.times[0]}, {self.times[-1]}]"
            )
        return t

    def __call__(self, t):
        return np.interp(self._check(t), self.times, self.values)

    def slope(self, t):
        """Right-continuous derivative of the schedule (molecules/hr)."""
        t = self._check(t)
        slopes = np.diff(self.values) / np.diff(self.times)
        seg = np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, len(slopes) - 1)
        return slopes[seg]

    def increasing(self, t):
        """True where SNAIL is non-decreasing; a flat segment counts as increasing."""
        return self.slope(t) >= 0

    def breakpoints(self) -> tuple[float, ...]:
        return self.times[1:-1]


SCHEDULES = {
    "hysteresis": SnailSchedule(
        "hysteresis", (0.0, 5000.0, 10000.0), (160e3, 240e3, 160e3)
    ),
    "short_induction": SnailSchedule(
        "short_induction", (0.0, 1200.0, 2400.0), (100e3, 240e3, 100e3)
    ),
    "long_induction": SnailSchedule(
        "long_induction", (0.0, 1200.0, 2400.0, 3600.0), (100e3, 240e3, 240e3, 100e3)
    ),
}


def snail_schedule(kind: str, t):
    """SNAIL level of the named schedule at time ``t`` (hours)."""
    try:
        sched = SCHEDULES[kind]
    except KeyError:
        raise ValueError(f"unknown schedule {kind!r}; choose from {sorted(SCHEDULES)}") from None
    return sched(t)


def hysteresis_step_advection(t, rate: float = 40.0):
    """Step SNAIL velocity for the heterogeneous hysteresis run: +rate before 5000 h, -rate after."""
    return np.where(np.asarray(t) < 5000.0, rate, -rate)


def with_alpha_epi(p: EpigeneticParams, alpha_epi: float) -> EpigeneticParams:
    return replace(p, alpha_epi=alpha_epi)
