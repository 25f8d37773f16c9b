"""Named experiments: hysteresis, delayed MET, and population growth runs.

Population runs live on the reduced ``(x, S)`` plane: ``x`` follows the
reduced miR-200 field, SNAIL relaxes toward its population mean, cells
divide at a phenotype-dependent rate and mutate at division.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.signal import find_peaks

from .bifurcation import equilibria
from .integrate import IntegratorConfig, integrate
from .particles import (
    DensityField,
    ParticleEnsemble,
    PopulationModel,
    Rescaling,
    grid_centers,
    rescale,
    run_schedule,
)
from .reduction import S_MAX, S_MIN, X_MAX, ReducedAdvection, build_reduced
from .regulatory import (
    SCHEDULES,
    EmtCoreParams,
    EpigeneticParams,
    SnailDynamics,
    _core,
    _hill,
    epigenetic_rhs,
    hysteresis_step_advection,
)

logger = logging.getLogger(__name__)

__all__ = [
    "GrowthScenario",
    "InitialCondition",
    "PhenotypeClassifier",
    "PopulationRun",
    "phenotype_fractions",
    "field_entropy",
    "heterogeneity_series",
    "count_modes",
    "initial_population",
    "population_model",
    "run_population_scenario",
    "HysteresisRun",
    "run_hysteresis",
    "hysteresis_metrics",
    "EpigeneticRun",
    "run_epigenetic",
    "epithelial_level",
]

R_EPI = 0.0182
DEATH = 1.82e-7
CLASSES = ("E", "H", "M")


@dataclass(frozen=True)
class GrowthScenario:
    """Piecewise-constant division rate by phenotype.

    ``r1``: every phenotype divides at ``r_epi``.  ``r2``: mesenchymal cells
    divide at half that rate.  ``r3``: hybrid and mesenchymal cells both do.
    """

    kind: str = "r1"
    r_epi: float = R_EPI

    def __post_init__(self):
        if self.kind not in ("r1", "r2", "r3"):
            raise ValueError(f"unknown growth scenario {self.kind!r}")
        if self.r_epi <= 0:
            raise ValueError("r_epi must be positive")

    def rates(self) -> dict[str, float]:
        half = 0.5 * self.r_epi
        return {
            "r1": {"E": self.r_epi, "H": self.r_epi, "M": self.r_epi},
            "r2": {"E": self.r_epi, "H": self.r_epi, "M": half},
            "r3": {"E": self.r_epi, "H": half, "M": half},
        }[self.kind]


@dataclass(frozen=True)
class PhenotypeClassifier:
    """Splits the miR-200 axis at the unstable branches.

    Below the lower separator cells are mesenchymal, above the upper one
    epithelial, in between hybrid.  Outside the SNAIL range where an
    unstable branch exists its value at the nearest end of that range is
    used.
    """

    advection: ReducedAdvection = field(default_factory=build_reduced)

    def _branch(self, role, s):
        lo, hi = self.advection.intervals.branch_domain(role)
        return self.advection.polys[role](np.clip(np.asarray(s, float), lo, hi))

    def separators(self, s):
        return self._branch("u1", s), self._branch("u2", s)

    def classify(self, x, s):
        """Array of class indices: 0 = E, 1 = H, 2 = M."""
        low, high = self.separators(s)
        x = np.asarray(x, float)
        return np.where(x > high, 0, np.where(x > low, 1, 2))


@dataclass(frozen=True)
class InitialCondition:
    """Uniform starting density carrying ``total_cells`` cells.

    Pure phenotypes occupy ``root +- half_width`` in miR-200 times
    ``S0 +- s_half_width`` in SNAIL, where ``root`` is the stable branch at
    ``S0`` (or at the nearest SNAIL level where that branch exists).
    """

    kind: str = "epi"
    total_cells: float = 100.0
    half_width: float = 2000.0
    s_half_width: float = 5000.0

    KINDS = ("epi", "hyb", "mes", "epi_mes", "epi_hyb_mes", "uni")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown initial condition {self.kind!r}; choose from {self.KINDS}")
        if self.total_cells <= 0:
            raise ValueError("total_cells must be positive")

    def parts(self) -> tuple[str, ...]:
        return {"epi": ("ep",), "hyb": ("hyb",), "mes": ("mes",), "epi_mes": ("ep", "mes"),
                "epi_hyb_mes": ("ep", "hyb", "mes"), "uni": ()}[self.kind]

    def rectangles(self, s0: float, ra: ReducedAdvection):
        """Support as a list of ``((x_lo, x_hi), (s_lo, s_hi))`` in molecules."""
        if self.kind == "uni":
            return [((0.0, X_MAX), (S_MIN, S_MAX))]
        s_iv = (max(S_MIN, s0 - self.s_half_width), min(S_MAX, s0 + self.s_half_width))
        rects = []
        for role in self.parts():
            lo, hi = ra.intervals.branch_domain(role)
            root = float(ra.polys[role](min(max(s0, lo), hi)))
            rects.append(((max(0.0, root - self.half_width), min(X_MAX, root + self.half_width)), s_iv))
        return rects


def _merge(intervals):
    out = []
    for a, b in sorted(intervals):
        if out and a <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], b))
        else:
            out.append((a, b))
    return out


def _cell_overlap(n, a, b):
    edges = np.linspace(0.0, 1.0, n + 1)
    return np.clip(np.minimum(edges[1:], b) - np.maximum(edges[:-1], a), 0.0, None)


def initial_population(ic: InitialCondition, s0: float, ra: ReducedAdvection, n: int = 20,
                       r: Rescaling = Rescaling()) -> ParticleEnsemble:
    """Grid ensemble on the unit square; each particle holds its cell's share of the support.

    Every support rectangle here shares one SNAIL interval, so the union is
    the product of that interval with the merged miR-200 intervals.
    """
    rects = ic.rectangles(s0, ra)
    (s_lo, s_hi) = rects[0][1]
    xs = _merge([(x0, x1) for (x0, x1), _ in rects])
    wx = sum(_cell_overlap(n, (a - r.B) / r.A, (b - r.B) / r.A) for a, b in xs)
    ws = _cell_overlap(n, (s_lo - r.D) / r.C, (s_hi - r.D) / r.C)
    mass = np.outer(wx, ws)
    if mass.sum() <= 0:
        raise ValueError("initial support misses every grid cell")
    mass *= ic.total_cells / mass.sum()
    c = grid_centers(n)
    X, S = np.meshgrid(c, c, indexing="ij")
    pts = np.stack([X.ravel(), S.ravel()], axis=-1)
    return ParticleEnsemble(pts, np.full(n * n, 1.0 / n**2), mass.ravel())


def population_model(gs: GrowthScenario, s0: float, alpha_relax: float, eta_x: float,
                     eta_s: float, ra: ReducedAdvection, death: float = DEATH,
                     classifier: PhenotypeClassifier | None = None) -> PopulationModel:
    """Model on the molecule domain ``[0, 25K] x [150K, 250K]``."""
    snail = SnailDynamics(s0=s0, alpha_relax=alpha_relax)
    classifier = PhenotypeClassifier(ra) if classifier is None else classifier
    table = np.array([gs.rates()[c] for c in CLASSES])

    def flow(p):
        fx, dx = ra.evaluate(p[:, 0], p[:, 1])
        fs = snail.delta * (1.0 - p[:, 1] / snail.s0)
        return np.stack([fx, fs], axis=-1), dx - snail.delta / snail.s0

    def growth(p):
        return table[classifier.classify(p[:, 0], p[:, 1])]

    return PopulationModel(flow, growth, death, (eta_x, eta_s), Rescaling().domain)


def phenotype_fractions(d: DensityField, c: PhenotypeClassifier,
                        r: Rescaling = Rescaling()) -> tuple[float, float, float]:
    """(fE, fH, fM) of a field on the unit square.

    The density is taken constant inside each grid cell, so a cell cut by
    a separator is split in proportion to the cut.
    """
    if d.dim != 2:
        raise ValueError("phenotype fractions need an (x, S) field")
    mass = d.values * d.cell_volume
    total = mass.sum()
    if not total > 0:
        raise ValueError("phenotype fractions of an empty field are undefined")
    nx = len(d.centers[0])
    edges = np.linspace(0.0, 1.0, nx + 1)
    _, s_raw = r.from_unit(0.0, d.centers[1])
    low, high = c.separators(s_raw)
    low_u, high_u = (low - r.B) / r.A, (high - r.B) / r.A
    # share of each x-cell lying below a separator, per SNAIL row
    below = lambda sep: np.clip((sep[None, :] - edges[:-1, None]) * nx, 0.0, 1.0)
    b_low, b_high = below(low_u), below(high_u)
    f_m = float(np.sum(mass * b_low))
    f_h = float(np.sum(mass * (b_high - b_low)))
    f_e = float(np.sum(mass * (1.0 - b_high)))
    return f_e / total, f_h / total, f_m / total


def field_entropy(d: DensityField, joint: bool = False, r: Rescaling = Rescaling()) -> float:
    """Differential entropy of a field in molecule units.

    By default the miR-200 marginal is used; ``joint=True`` uses the full
    ``(x, S)`` density.
    """
    if joint or d.dim == 1:
        p = d.values * d.cell_volume
        log_scale = math.log(r.A * (r.C if d.dim == 2 else 1.0))
        cell = d.cell_volume
    else:
        marg = d.marginal(0)
        cell = 1.0 / len(d.centers[0])
        p = marg * cell
        log_scale = math.log(r.A)
    total = p.sum()
    if not total > 0:
        raise ValueError("entropy of an empty field is undefined")
    p = p / total
    pos = p > 0
    return float(-np.sum(p[pos] * np.log(p[pos] / cell)) + log_scale)


def heterogeneity_series(fields: Sequence[DensityField], joint: bool = False) -> np.ndarray:
    return np.array([field_entropy(f, joint) for f in fields])


def count_modes(profile, prominence: float = 0.01) -> int:
    """Number of peaks of a 1-D density profile.

    A peak counts when it stands out by ``prominence`` times the profile
    maximum; a peak in the first or last cell counts too.
    """
    p = np.asarray(profile, float)
    if p.max() <= 0:
        return 0
    padded = np.concatenate([[0.0], p / p.max(), [0.0]])
    peaks, _ = find_peaks(padded, prominence=prominence)
    return len(peaks)


@dataclass
class PopulationRun:
    times: np.ndarray
    rho: np.ndarray
    fractions: np.ndarray  # (n_times, 3) columns E, H, M
    entropy: np.ndarray
    fields: list[DensityField]

    def series_rows(self):
        for t, rho, (fe, fh, fm), E in zip(self.times, self.rho, self.fractions, self.entropy):
            yield t, rho, fe, fh, fm, E

    def summary(self) -> dict:
        fe, fh, fm = self.fractions[-1]
        return {"final_rho": float(self.rho[-1]), "final_fE": float(fe), "final_fH": float(fh),
                "final_fM": float(fm), "final_entropy": float(self.entropy[-1]),
                "final_modes": count_modes(self.fields[-1].marginal(0))}


def _field_from_ensemble(e: ParticleEnsemble, n: int) -> DensityField:
    c = grid_centers(n)
    return DensityField((c, c), e.masses.reshape(n, n) * n * n, 0.0, e.t)


def run_population_scenario(ic: InitialCondition, gs: GrowthScenario, s0: float = 200_000.0,
                            alpha_relax: float = 120.0, eta_x: float = 1000.0,
                            eta_s: float = 5000.0, horizon: float = 2400.0,
                            cadence: float = 24.0, n: int = 20, gamma: float = 0.8,
                            cfg: IntegratorConfig = IntegratorConfig(rtol=1e-4, atol=1e-6),
                            ra: ReducedAdvection | None = None, deposit: str = "cell",
                            joint_entropy: bool = False, death: float = DEATH) -> PopulationRun:
    """Grow a population on the reduced ``(x, S)`` plane and post-process it.

    Returns population size, phenotype fractions and entropy at time 0 and
    at every regularisation checkpoint.
    """
    if not S_MIN <= s0 <= S_MAX:
        raise ValueError(f"s0 must lie in [150K, 250K], got {s0}")
    if horizon <= 0 or cadence <= 0:
        raise ValueError("horizon and cadence must be positive")
    ra = build_reduced() if ra is None else ra
    classifier = PhenotypeClassifier(ra)
    model = rescale(population_model(gs, s0, alpha_relax, eta_x, eta_s, ra, death, classifier))
    e0 = initial_population(ic, s0, ra, n)
    checkpoints = np.arange(cadence, horizon + 0.5 * cadence, cadence)
    checkpoints[-1] = horizon
    fields = [_field_from_ensemble(e0, n)]
    fields += run_schedule(model, e0, checkpoints, gamma, cfg, deposit=deposit)
    fractions = np.array([phenotype_fractions(f, classifier) for f in fields])
    return PopulationRun(
        times=np.array([0.0, *checkpoints]),
        rho=np.array([f.rho for f in fields]),
        fractions=fractions,
        entropy=heterogeneity_series(fields, joint_entropy),
        fields=fields,
    )


# --- regulatory-level experiments ---------------------------------------------


def _equilibrium(s, p, branch, mu_max=60_000.0):
    eqs = [e for e in equilibria(s, p, mu_max=mu_max) if e.stable]
    if not eqs:
        raise RuntimeError(f"no stable equilibrium at S={s}")
    return eqs[-1] if branch == "ep" else eqs[0]


def epithelial_level(s: float = 100_000.0, p: EmtCoreParams = EmtCoreParams()) -> float:
    """miR-200 of the highest stable equilibrium at SNAIL ``s``."""
    return _equilibrium(s, p, "ep").mu200


@dataclass
class HysteresisRun:
    mode: str
    times: np.ndarray
    snail: np.ndarray  # population mean
    mu200: np.ndarray  # population mean
    zeb: np.ndarray
    histograms: np.ndarray | None = None
    bins: np.ndarray | None = None

    def mu_at(self, t):
        return float(np.interp(t, self.times, self.mu200))


def run_hysteresis(mode: str = "homogeneous", p: EmtCoreParams = EmtCoreParams(),
                   output_step: float = 10.0, n_cells: int = 25, spread: float = 0.01,
                   cfg: IntegratorConfig = IntegratorConfig(rtol=1e-8, atol=1e-6),
                   s_sigma: float = 20_000.0, n_s: int = 81, n_bins: int = 100) -> HysteresisRun:
    """SNAIL rises from 160K to 240K over 5000 h and falls back.

    ``homogeneous``: every cell sees the scheduled SNAIL; a small cloud of
    cells around the S=160K epithelial state is advected by the
    miR-200/ZEB field.  ``heterogeneous``: SNAIL is a third coordinate,
    Gaussian across cells (mean 160K, ``s_sigma``) and pushed at +-40
    molecules/h; all cells start at the S=160K epithelial state.  The
    heterogeneous run also returns miR-200 histograms at every output time.
    """
    sched = SCHEDULES["hysteresis"]
    t_end = sched.t_end
    times = np.arange(0.0, t_end + 0.5 * output_step, output_step)
    eq = _equilibrium(160_000.0, p, "ep")
    if mode == "homogeneous":
        side = int(round(math.sqrt(n_cells)))
        offs = np.linspace(-spread, spread, side)
        M, Z = np.meshgrid(eq.mu200 * (1 + offs), eq.z * (1 + offs), indexing="ij")
        y0 = np.stack([M.ravel(), Z.ravel()])

        def rhs(t, y):
            mu, z = np.maximum(y, 0.0)
            return np.array(_core(mu, z, sched(min(t, t_end)), p, _hill(z, p.h_z_mu200)))

        traj = integrate(rhs, y0, (0.0, t_end), cfg, t_eval=times, tstops=sched.breakpoints())
        return HysteresisRun(mode, times, sched(times), traj.y[:, 0].mean(axis=1),
                             traj.y[:, 1].mean(axis=1))
    if mode == "heterogeneous":
        s0 = 160_000.0 + s_sigma * np.linspace(-3, 3, n_s)
        weights = np.exp(-0.5 * ((s0 - 160_000.0) / s_sigma) ** 2)
        weights /= weights.sum()
        y0 = np.stack([np.full(n_s, eq.mu200), np.full(n_s, eq.z), s0])

        def rhs(t, y):
            mu, z = np.maximum(y[:2], 0.0)
            s = np.maximum(y[2], 0.0)
            dmu, dz = _core(mu, z, s, p, _hill(z, p.h_z_mu200))
            return np.array([dmu, dz, np.full(n_s, float(hysteresis_step_advection(t)))])

        traj = integrate(rhs, y0, (0.0, t_end), cfg, t_eval=times, tstops=(5000.0,))
        mu, z, s = traj.y[:, 0], traj.y[:, 1], traj.y[:, 2]
        bins = np.linspace(0.0, 25_000.0, n_bins + 1)
        hist = np.array([np.histogram(np.clip(m, 0, 25_000.0), bins, weights=weights)[0] for m in mu])
        return HysteresisRun(mode, times, s @ weights, mu @ weights, z @ weights, hist, bins)
    raise ValueError(f"unknown hysteresis mode {mode!r}")


def hysteresis_metrics(run: HysteresisRun, ra: ReducedAdvection | None = None,
                       s_probe: float = 200_000.0, band: float = 2000.0) -> dict:
    """Ascending/descending miR-200 gap at ``s_probe`` and hybrid-branch dwell times."""
    ra = build_reduced() if ra is None else ra
    t_up = float(np.interp(s_probe, [160e3, 240e3], [0.0, 5000.0]))
    t_down = 10_000.0 - t_up
    lo, hi = ra.intervals.branch_domain("hyb")
    s = run.snail
    on = (s >= lo) & (s <= hi)
    near = on & (np.abs(run.mu200 - ra.polys["hyb"](np.clip(s, lo, hi))) < band)
    dt = np.gradient(run.times)
    up = run.times <= 5000.0
    dwell_up = float(np.sum(dt[near & up]))
    dwell_down = float(np.sum(dt[near & ~up]))
    return {"mu_ascending": run.mu_at(t_up), "mu_descending": run.mu_at(t_down),
            "gap": abs(run.mu_at(t_up) - run.mu_at(t_down)),
            "hybrid_dwell_ascending": dwell_up, "hybrid_dwell_descending": dwell_down}


@dataclass
class EpigeneticRun:
    induction: str
    times: np.ndarray
    mu200: np.ndarray
    zeb: np.ndarray
    threshold_z0: np.ndarray
    withdrawal_start: float
    threshold: float
    recovery_time: float | None  # hours after withdrawal starts; None if never


def run_epigenetic(induction: str = "short", p: EpigeneticParams = EpigeneticParams(),
                   tail: float = 6000.0, output_step: float = 5.0, settle: float = 10_000.0,
                   recovery_fraction: float = 0.9,
                   cfg: IntegratorConfig = IntegratorConfig(rtol=1e-8, atol=1e-6)) -> EpigeneticRun:
    """miR-200 response to a SNAIL pulse with slow epigenetic memory.

    The cell starts at the steady state of the three-variable system at
    S=100K.  After the schedule ends SNAIL stays at 100K for ``tail``
    hours.  Recovery is the first time after SNAIL starts to fall at which
    miR-200 regains ``recovery_fraction`` of the S=100K epithelial level of
    the core model.
    """
    key = {"short": "short_induction", "long": "long_induction"}.get(induction)
    if key is None:
        raise ValueError(f"unknown induction {induction!r}; use 'short' or 'long'")
    sched = SCHEDULES[key]
    t_sched = sched.t_end
    s_base = sched.values[-1]
    eq = _equilibrium(s_base, p.core, "ep")

    def field3(t, y, s, increasing):
        mu, z, z0 = np.maximum(y, 0.0)
        return np.array(epigenetic_rhs(mu, z, max(z0, 1e-9), s, p, increasing), dtype=float)

    y0 = np.array([eq.mu200, eq.z, p.z0_baseline - p.alpha_epi * eq.z])
    y0 = integrate(lambda t, y: field3(t, y, s_base, True), y0, (0.0, settle), cfg).final

    def rhs(t, y):
        if t >= t_sched:
            return field3(t, y, s_base, True)
        return field3(t, y, float(sched(t)), bool(sched.increasing(t)))

    t_end = t_sched + tail
    times = np.arange(0.0, t_end + 0.5 * output_step, output_step)
    traj = integrate(rhs, y0, (0.0, t_end), cfg, t_eval=times, tstops=sched.breakpoints())
    withdrawal = next(t for t, slope in zip(sched.times[:-1], np.diff(sched.values)) if slope < 0)
    threshold = recovery_fraction * eq.mu200
    mu = traj.y[:, 0]
    hit = np.nonzero((times >= withdrawal) & (mu >= threshold))[0]
    if len(hit):
        i = hit[0]
        # linear interpolation between output samples
        t_hit = times[i] if i == 0 else float(np.interp(threshold, mu[i - 1 : i + 1], times[i - 1 : i + 1]))
        recovery = t_hit - withdrawal
    else:
        recovery = None
        logger.warning("%s induction: miR-200 did not recover within the horizon", induction)
    return EpigeneticRun(induction, times, mu, traj.y[:, 1], traj.y[:, 2], float(withdrawal),
                         float(threshold), recovery)
