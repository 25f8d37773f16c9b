"""One-dimensional reduction of the miR-200/ZEB advection field.

For each SNAIL level the equilibria of the two-variable model are
replaced by degree-5 polynomials in S (one per branch), and the reduced
field is the continuous piecewise-linear function with slope -k around
stable roots and +k around unstable ones, switching at the midpoints
between neighbouring roots.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .bifurcation import bifurcation_table
from .integrate import IntegrationError, IntegratorConfig, integrate
from .regulatory import EmtCoreParams, _core, _hill

logger = logging.getLogger(__name__)

__all__ = [
    "BRANCHES",
    "BranchPolynomial",
    "StabilityIntervals",
    "ReducedAdvection",
    "TABLE3",
    "table3_polynomials",
    "fit_branch_polynomials",
    "default_polynomials",
    "build_reduced",
    "reduced_divergence",
    "discrepancy",
    "calibrate_k",
    "CalibrationGrid",
    "full_model_mu",
    "reduced_model_x",
    "export_lookup_csv",
]

BRANCHES = ("mes", "u1", "hyb", "u2", "ep")
X_MAX = 25_000.0
S_MIN, S_MAX = 150_000.0, 250_000.0
# SNAIL values a hair outside the box come from round-off in the integrator
_S_SLACK = 1e-6 * S_MAX


@dataclass(frozen=True)
class BranchPolynomial:
    """Degree-5 polynomial in ``(S - center) / scale``; coefficients highest power first."""

    role: str
    coeffs: tuple[float, ...]
    center: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if self.role not in BRANCHES:
            raise ValueError(f"unknown branch role {self.role!r}")
        if len(self.coeffs) != 6:
            raise ValueError("branch polynomials have 6 coefficients (a5..a0)")

    def __call__(self, s):
        return np.polyval(self.coeffs, (np.asarray(s, dtype=float) - self.center) / self.scale)


@dataclass(frozen=True)
class StabilityIntervals:
    """SNAIL ranges with 1, 2, 3, 2 and 1 stable equilibria."""

    i_ep: tuple[float, float] = (150000.0, 185270.541082)
    i_ep_mes: tuple[float, float] = (185270.541082, 193286.5731462)
    i_ep_hyb_mes: tuple[float, float] = (193286.573146, 208817.635271)
    i_hyb_mes: tuple[float, float] = (208817.635271, 224649.298597)
    i_mes: tuple[float, float] = (224649.298597, 250000.0)

    def __post_init__(self):
        ivs = self.as_list()
        for (a, b), (c, _) in zip(ivs, ivs[1:]):
            if not a < b or abs(b - c) > 1e-3:
                raise ValueError("stability intervals must be ordered and contiguous")
        if ivs[0][0] != S_MIN or ivs[-1][1] != S_MAX:
            raise ValueError("stability intervals must cover [150K, 250K]")

    def as_list(self):
        return [self.i_ep, self.i_ep_mes, self.i_ep_hyb_mes, self.i_hyb_mes, self.i_mes]

    def case(self, s):
        """Index 0..4 of the interval holding each S; shared endpoints go to the lower interval."""
        uppers = np.array([iv[1] for iv in self.as_list()[:-1]])
        return np.searchsorted(uppers, np.asarray(s, dtype=float), side="left")

    def branch_domain(self, role: str) -> tuple[float, float]:
        """SNAIL range on which the given equilibrium branch exists."""
        ivs = self.as_list()
        spans = {
            "ep": (ivs[0][0], ivs[2][1]),
            "mes": (ivs[1][0], ivs[4][1]),
            "hyb": (ivs[2][0], ivs[3][1]),
            "u1": (ivs[1][0], ivs[3][1]),
            "u2": (ivs[2][0], ivs[2][1]),
        }
        return spans[role]

    def stable_count(self, s):
        return np.array([1, 2, 3, 2, 1])[self.case(s)]


# Branch roles present in each interval, ordered by increasing miR-200.
CASE_ROLES = (
    ("ep",),
    ("mes", "u1", "ep"),
    ("mes", "u1", "hyb", "u2", "ep"),
    ("mes", "u1", "hyb"),
    ("mes",),
)

TABLE3 = {
    "mes": (-6.109064e-21, 6.846339e-15, -3.065919e-09, 6.859093e-04, -7.668477e01, 3.430402e06),
    "u1": (2.504295e-19, -2.551948e-13, 1.039834e-07, -2.117715e-02, 2.155712e03, -8.774602e07),
    "hyb": (-9.979604e-19, 1.044470e-12, -4.372031e-07, 9.149320e-02, -9.572462e03, 4.005964e08),
    "u2": (1.981710e-17, -1.996178e-11, 8.042697e-06, -1.620159e00, 1.631806e05, -6.573913e09),
    "ep": (-1.980683e-20, 1.727787e-14, -6.016556e-09, 1.045582e-03, -9.081813e01, 3.1850617e06),
}


def table3_polynomials() -> dict[str, BranchPolynomial]:
    """The published coefficients, in raw molecules."""
    return {role: BranchPolynomial(role, TABLE3[role]) for role in BRANCHES}


def _assign_roles(s, roots):
    n = len(roots)
    if n == 5:
        return dict(zip(("mes", "u1", "hyb", "u2", "ep"), roots))
    if n == 3:
        return dict(zip(("mes", "u1", "ep") if s < 200_000.0 else ("mes", "u1", "hyb"), roots))
    if n == 1:
        return {"ep" if s < 200_000.0 else "mes": roots[0]}
    return {}


def fit_branch_polynomials(
    params: EmtCoreParams = EmtCoreParams(),
    intervals: StabilityIntervals = StabilityIntervals(),
    n_samples: int = 200,
) -> dict[str, BranchPolynomial]:
    """Least-squares degree-5 fits to root-finder samples of each branch.

    Each branch is sampled on its existence range and fitted in a centred,
    scaled SNAIL variable, which keeps the fit well conditioned.
    """
    polys = {}
    for role in BRANCHES:
        lo, hi = intervals.branch_domain(role)
        s_grid = np.linspace(lo, hi, n_samples)
        ss, xs = [], []
        for s, eqs in bifurcation_table(s_grid, params):
            roles = _assign_roles(s, [e.mu200 for e in eqs])
            if role in roles:
                ss.append(s)
                xs.append(roles[role])
        if len(ss) < 10:
            raise RuntimeError(f"branch {role} found at only {len(ss)} SNAIL samples")
        center, scale = 0.5 * (lo + hi), 0.5 * (hi - lo)
        coeffs = np.polyfit((np.array(ss) - center) / scale, xs, 5)
        polys[role] = BranchPolynomial(role, tuple(float(c) for c in coeffs), center, scale)
    return polys


# Output of ``fit_branch_polynomials()`` for the default parameters, stored so
# that importing the package does not rerun the root finder.
REFITTED = {
    "mes": ((-280.1717855433109, 237.91912598418915, 85.52897387025915, 62.83336207277293, -385.9524322168478, 1454.7062812049062), 217635.270541, 32364.729458999995),
    "u1": ((728.5830481914086, 251.98986123344685, -236.01997025235187, 24.670304759412886, 1474.7458032954155, 4394.74782517192), 204959.91983949998, 19689.378757499988),
    "hyb": ((-1016.8447208439347, 96.97255699428295, 289.832693492801, 189.90891928839957, -2518.4792069694163, 10152.96644140057), 208967.9358715, 15681.362725499988),
    "u2": ((560.6585862539717, -126.13846450566582, -140.14680495796713, -118.15297998914042, 800.3308852850844, 15884.829882536893), 201052.1042085, 7765.531062499998),
    "ep": ((-431.8922668503146, -346.35028302774276, 178.26469493377687, 248.1642206765379, -3589.5149905634416, 21164.624820260273), 179408.8176355, 29408.817635500003),
}


def default_polynomials() -> dict[str, BranchPolynomial]:
    """Branch polynomials refitted to the default parameter set."""
    return {role: BranchPolynomial(role, c, center, scale)
            for role, (c, center, scale) in REFITTED.items()}


@dataclass(frozen=True)
class ReducedAdvection:
    """Piecewise-linear reduced field ``f_r(x, S) = k * f~(x, S)``."""

    polys: dict[str, BranchPolynomial] = field(default_factory=default_polynomials)
    intervals: StabilityIntervals = StabilityIntervals()
    k: float = 0.02

    def __post_init__(self):
        if self.k <= 0:
            raise ValueError("k must be positive")
        missing = set(BRANCHES) - set(self.polys)
        if missing:
            raise ValueError(f"missing branch polynomials: {sorted(missing)}")

    def _check_s(self, s):
        s = np.asarray(s, dtype=float)
        if np.any(s < S_MIN - _S_SLACK) or np.any(s > S_MAX + _S_SLACK):
            raise ValueError("S outside [150K, 250K]")
        return np.clip(s, S_MIN, S_MAX)

    def roots(self, s):
        """Zeros of ``f_r(., S)`` as an array padded with NaN, shape ``s.shape + (5,)``.

        Roots alternate stable, unstable, stable, ... in increasing order.
        """
        s = self._check_s(s)
        case = self.intervals.case(s)
        vals = {role: self.polys[role](s) for role in BRANCHES}
        out = np.full(s.shape + (5,), np.nan)
        for c, roles in enumerate(CASE_ROLES):
            sel = case == c
            if not np.any(sel):
                continue
            stacked = np.stack([vals[r][sel] for r in roles], axis=-1)
            # keep the ordering monotone where fitted branches touch at a fold
            out[sel, : len(roles)] = np.maximum.accumulate(stacked, axis=-1)
        return out

    def _segments(self, x, s):
        x = np.asarray(x, dtype=float)
        r = self.roots(s)
        x, r = np.broadcast_arrays(x[..., None], r)
        mids = 0.5 * (r[..., :-1] + r[..., 1:])
        # left-segment convention at a breakpoint: x <= mid stays left
        with np.errstate(invalid="ignore"):
            seg = np.sum(x[..., :-1] > mids, axis=-1)
        root = np.take_along_axis(r, seg[..., None], axis=-1)[..., 0]
        sign = np.where(seg % 2 == 0, -1.0, 1.0)
        return x[..., 0], root, sign

    def tilde(self, x, s):
        x, root, sign = self._segments(x, s)
        return sign * (x - root)

    def __call__(self, x, s):
        return self.k * self.tilde(x, s)

    def divergence(self, x, s):
        """d f_r / dx: -k on stable segments, +k on unstable ones."""
        _, _, sign = self._segments(x, s)
        return self.k * sign

    def evaluate(self, x, s):
        """``(f_r, d f_r / dx)`` in one pass."""
        x, root, sign = self._segments(x, s)
        return self.k * sign * (x - root), self.k * sign

    def with_k(self, k: float) -> "ReducedAdvection":
        return ReducedAdvection(self.polys, self.intervals, k)

    def stable_roots(self, s):
        r = self.roots(s)
        return r[..., ::2]

    def unstable_roots(self, s):
        r = self.roots(s)
        return r[..., 1::2]


def build_reduced(polys=None, intervals: StabilityIntervals = StabilityIntervals(),
                  k: float = 0.02) -> ReducedAdvection:
    return ReducedAdvection(default_polynomials() if polys is None else polys, intervals, k)


def reduced_divergence(x, s, ra: ReducedAdvection):
    return ra.divergence(x, s)


# --- calibration -----------------------------------------------------------


@dataclass(frozen=True)
class CalibrationGrid:
    """Riemann-sum grid: left endpoints of N equal cells on each axis."""

    n_t: int = 100
    n_s: int = 20
    n_x: int = 20
    n_z: int = 20
    z_max: float = 800_000.0

    def axes(self, horizon: float):
        t = np.arange(self.n_t) * horizon / self.n_t
        s = S_MIN + np.arange(self.n_s) * (S_MAX - S_MIN) / self.n_s
        x0 = np.arange(self.n_x) * X_MAX / self.n_x
        z0 = np.arange(self.n_z) * self.z_max / self.n_z
        return t, s, x0, z0


def full_model_mu(horizon: float, grid: CalibrationGrid = CalibrationGrid(),
                  params: EmtCoreParams = EmtCoreParams(),
                  cfg: IntegratorConfig = IntegratorConfig(rtol=1e-6, atol=1e-3)):
    """miR-200 trajectories of the two-variable model, shape ``(n_t, n_s, n_x, n_z)``."""
    t, s, x0, z0 = grid.axes(horizon)
    S, X0, Z0 = np.meshgrid(s, x0, z0, indexing="ij")

    def rhs(_, y):
        mu = np.maximum(y[0], 0.0)
        z = np.maximum(y[1], 0.0)
        return np.array(_core(mu, z, S, params, _hill(z, params.h_z_mu200)))

    t_eval = np.append(t, horizon) if t[-1] < horizon else t
    try:
        traj = integrate(rhs, np.stack([X0, Z0]), (0.0, horizon), cfg, t_eval=t_eval)
    except IntegrationError as exc:
        raise IntegrationError(f"full-model calibration run failed: {exc}", exc.t, exc.y) from exc
    return traj.y[: len(t), 0]


def reduced_model_x(k: float, horizon: float, grid: CalibrationGrid = CalibrationGrid(),
                    polys=None, intervals: StabilityIntervals = StabilityIntervals(),
                    cfg: IntegratorConfig = IntegratorConfig(rtol=1e-8, atol=1e-6)):
    """Reduced trajectories ``x(t, S, x0)``, shape ``(n_t, n_s, n_x)``."""
    ra = build_reduced(polys, intervals, k)
    t, s, x0, _ = grid.axes(horizon)
    S, X0 = np.meshgrid(s, x0, indexing="ij")
    t_eval = np.append(t, horizon) if t[-1] < horizon else t
    traj = integrate(lambda _, x: ra(x, S), X0, (0.0, horizon), cfg, t_eval=t_eval)
    return traj.y[: len(t)]


def discrepancy(x_traj, mu_traj) -> float:
    """Mean |x - mu| over the (t, S, x0, Z0) grid."""
    return float(np.mean(np.abs(x_traj[..., None] - mu_traj)))


def calibrate_k(candidates: Sequence[float], horizon: float = 100.0,
                grid: CalibrationGrid = CalibrationGrid(), polys=None,
                intervals: StabilityIntervals = StabilityIntervals(),
                params: EmtCoreParams = EmtCoreParams(), report: dict | None = None) -> float:
    """Candidate slope minimising the reduced-versus-full discrepancy sum.

    The full-model trajectories do not depend on ``k`` and are computed once.
    When ``report`` is a dict it is filled with ``{k: discrepancy}``.
    """
    candidates = [float(c) for c in candidates]
    if not candidates:
        raise ValueError("no candidate values of k")
    if any(c <= 0 for c in candidates):
        raise ValueError("candidate k values must be positive")
    mu = full_model_mu(horizon, grid, params)
    scores = {}
    for k in candidates:
        scores[k] = discrepancy(reduced_model_x(k, horizon, grid, polys, intervals), mu)
        logger.info("k = %g: discrepancy %.6g", k, scores[k])
    if report is not None:
        report.update(scores)
    return min(candidates, key=lambda c: (scores[c], c))


def calibration_report_json(scores: dict[float, float], horizon: float, selected: float) -> str:
    return json.dumps(
        {"horizon_hours": horizon, "selected_k": selected,
         "discrepancy": {repr(k): v for k, v in scores.items()}},
        indent=2,
    )


def export_lookup_csv(ra: ReducedAdvection, path, s_values=None, x_values=None) -> Path:
    """Write the reduced field as ``S,x,f_r`` rows."""
    s_values = np.linspace(S_MIN, S_MAX, 101) if s_values is None else np.asarray(s_values)
    x_values = np.linspace(0.0, X_MAX, 251) if x_values is None else np.asarray(x_values)
    S, X = np.meshgrid(s_values, x_values, indexing="ij")
    F = ra(X, S)
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write("S,x,f_r\n")
        for s, x, f in zip(S.ravel(), X.ravel(), F.ravel()):
            fh.write(f"{float(s)!r},{float(x)!r},{float(f)!r}\n")
    return path
