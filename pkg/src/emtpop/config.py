"""Experiment descriptions: validation, presets and JSON round-trip.

A config names one of four experiment families (``model``) and carries
every numeric setting.  Fields a family does not use are ignored by it
but still validated, so a typo in a sweep file never goes unnoticed.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, fields
from typing import Any

from .entropy import INITIAL_KINDS as ENTROPY_INITIAL_KINDS
from .regulatory import EmtCoreParams, EpigeneticParams, HillParams, TranslationTables
from .scenarios import InitialCondition

__all__ = ["ConfigError", "ScenarioConfig", "PRESETS", "parse_config", "serialize_config", "preset",
           "params_to_json", "params_from_json"]

MODELS = ("hysteresis", "epigenetic", "population", "entropy")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key and bound."""


@dataclass(frozen=True)
class ScenarioConfig:
    """Full description of one run.

    ``n_grid``, ``eta_x``, ``rtol`` and ``atol`` default to ``None``,
    meaning the family's own default: 20 cells per axis and
    ``eta_x = 1000`` for population runs, 50 cells and ``eta_x = 4000`` for
    the entropy model.
    """

    name: str = "custom"
    model: str = "population"
    # population and entropy runs
    n_grid: int | None = None
    gamma: float = 0.8
    eta_x: float | None = None
    eta_s: float = 5000.0
    alpha_relax: float = 120.0
    s0: float = 200_000.0
    horizon: float = 2400.0
    cadence: float = 24.0
    growth: str = "r1"
    r_epi: float = 0.0182
    death: float = 1.82e-7
    initial: str = "epi"
    joint_entropy: bool = False
    deposit: str = "cell"
    # entropy-coupled growth
    response: str = "hill"
    theta: float = 9.0
    capacity: float = 10_000.0  # entropy model: saturating population, r / d
    # regulatory experiments
    mode: str = "homogeneous"
    induction: str = "short"
    alpha_epi: float = 0.15
    recovery_fraction: float = 0.9
    # numerics and output
    rtol: float | None = None
    atol: float | None = None
    output_dir: str | None = None
    seed: int | None = None  # reserved; every method here is deterministic

    def __post_init__(self):
        _validate(self)

    @property
    def resolved_n_grid(self) -> int:
        if self.n_grid is not None:
            return self.n_grid
        return 50 if self.model == "entropy" else 20

    @property
    def resolved_eta_x(self) -> float:
        if self.eta_x is not None:
            return self.eta_x
        return 4000.0 if self.model == "entropy" else 1000.0

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)


def _check(cond, key, msg):
    if not cond:
        raise ConfigError(f"{key}: {msg}")


def _validate(c: ScenarioConfig):
    types = {f.name: f.type for f in fields(c)}
    for f in fields(c):
        v = getattr(c, f.name)
        if v is None:
            _check("None" in types[f.name], f.name, "may not be null")
            continue
        if "bool" in types[f.name]:
            _check(isinstance(v, bool), f.name, f"expected true/false, got {v!r}")
        elif "int" in types[f.name] and "float" not in types[f.name]:
            _check(isinstance(v, int) and not isinstance(v, bool), f.name, f"expected an integer, got {v!r}")
        elif "float" in types[f.name]:
            _check(isinstance(v, (int, float)) and not isinstance(v, bool), f.name,
                   f"expected a number, got {v!r}")
        elif "str" in types[f.name]:
            _check(isinstance(v, str), f.name, f"expected a string, got {v!r}")
    _check(c.name and "/" not in c.name, "name", "must be a non-empty string without '/'")
    _check(c.model in MODELS, "model", f"must be one of {MODELS}")
    _check(0.5 < c.gamma < 1.0, "gamma", f"gamma must lie in (0.5, 1), got {c.gamma}")
    _check(150_000.0 <= c.s0 <= 250_000.0, "s0", f"S0 must lie in [150K, 250K], got {c.s0}")
    _check(c.n_grid is None or c.n_grid >= 2, "n_grid", "needs at least 2 cells per axis")
    for key in ("eta_s", "alpha_relax", "horizon", "cadence", "r_epi", "theta",
                "recovery_fraction", "capacity"):
        _check(getattr(c, key) > 0, key, "must be positive")
    _check(c.eta_x is None or c.eta_x > 0, "eta_x", "must be positive")
    _check(c.death >= 0, "death", "must be non-negative")
    _check(c.alpha_epi >= 0, "alpha_epi", "must be non-negative")
    _check(c.cadence <= c.horizon, "cadence", "must not exceed the horizon")
    _check(c.growth in ("r1", "r2", "r3"), "growth", "must be r1, r2 or r3")
    _check(c.response in ("hill", "linear"), "response", "must be 'hill' or 'linear'")
    _check(c.mode in ("homogeneous", "heterogeneous"), "mode", "must be homogeneous or heterogeneous")
    _check(c.induction in ("short", "long"), "induction", "must be short or long")
    _check(c.deposit in ("cell", "point"), "deposit", "must be 'cell' or 'point'")
    kinds = ENTROPY_INITIAL_KINDS if c.model == "entropy" else InitialCondition.KINDS
    _check(c.initial in kinds, "initial", f"for the {c.model} model must be one of {kinds}")
    for key in ("rtol", "atol"):
        v = getattr(c, key)
        _check(v is None or v > 0, key, "must be positive")


def _preset_table() -> dict[str, dict[str, Any]]:
    t: dict[str, dict[str, Any]] = {
        "hysteresis-homogeneous": {"model": "hysteresis", "mode": "homogeneous"},
        "hysteresis-heterogeneous": {"model": "hysteresis", "mode": "heterogeneous"},
        "epigenetic-short": {"model": "epigenetic", "induction": "short"},
        "epigenetic-long": {"model": "epigenetic", "induction": "long"},
        "fig3Aii": {"model": "population", "s0": 200_000.0, "initial": "epi"},
        "fig3-alpha240": {"model": "population", "s0": 225_000.0, "initial": "epi", "alpha_relax": 240.0},
    }
    for s0 in (150, 175, 190, 225, 250):
        t[f"fig3A-s{s0}"] = {"model": "population", "s0": s0 * 1000.0, "initial": "epi"}
    for g in ("r1", "r2", "r3"):
        for s0 in (190, 200, 225):
            t[f"fig4-{g}-s{s0}"] = {"model": "population", "growth": g, "s0": s0 * 1000.0,
                                    "initial": "epi_hyb_mes"}
    for resp in ("hill", "linear"):
        for kind in ENTROPY_INITIAL_KINDS:
            t[f"fig5-{resp}-{kind}"] = {"model": "entropy", "response": resp, "initial": kind,
                                        "horizon": 168.0}
    return t


PRESETS = _preset_table()


def preset(preset_name: str, **overrides) -> ScenarioConfig:
    """Preset settings, then ``overrides``; the run is named after the preset unless overridden."""
    try:
        base = PRESETS[preset_name]
    except KeyError:
        raise ConfigError(f"preset: unknown preset {preset_name!r}") from None
    return _build({"name": preset_name, **base, **overrides})


def _build(doc: dict) -> ScenarioConfig:
    known = {f.name for f in fields(ScenarioConfig)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ConfigError(f"unknown keys: {', '.join(unknown)}")
    return ScenarioConfig(**doc)


def parse_config(text: str, preset_name: str | None = None) -> ScenarioConfig:
    """Validated config from a JSON object.

    The document may name a ``"preset"``, whose settings are filled in
    before the document's own keys; ``preset_name`` does the same from the
    caller.  An empty document yields the preset (or plain defaults).
    """
    doc = json.loads(text) if text.strip() else {}
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    name = doc.pop("preset", preset_name)
    if name is None:
        return _build(doc)
    return preset(name, **doc)


def serialize_config(c: ScenarioConfig) -> str:
    return json.dumps(dataclasses.asdict(c), indent=2, sort_keys=True) + "\n"


# --- regulatory parameter records ----------------------------------------------


def params_to_json(p: EmtCoreParams | EpigeneticParams) -> str:
    """Parameter record as JSON, tagged with its type."""
    return json.dumps({"type": type(p).__name__, "params": dataclasses.asdict(p)}, indent=2) + "\n"


def _core_from(d: dict) -> EmtCoreParams:
    d = dict(d)
    for key in ("h_z_mu200", "h_s_mu200", "h_z_mz", "h_s_mz"):
        if key in d:
            d[key] = HillParams(**d[key])
    if "tables" in d:
        d["tables"] = TranslationTables(**{k: tuple(v) if isinstance(v, list) else v
                                           for k, v in d["tables"].items()})
    return EmtCoreParams(**d)


def params_from_json(text: str) -> EmtCoreParams | EpigeneticParams:
    """Inverse of :func:`params_to_json`; missing fields take their defaults."""
    doc = json.loads(text)
    kind, d = doc.get("type"), doc.get("params", {})
    try:
        if kind == "EmtCoreParams":
            return _core_from(d)
        if kind == "EpigeneticParams":
            d = dict(d)
            if "core" in d:
                d["core"] = _core_from(d["core"])
            return EpigeneticParams(**d)
    except TypeError as exc:
        raise ConfigError(f"params: {exc}") from None
    raise ConfigError(f"type: unknown parameter record {kind!r}")
