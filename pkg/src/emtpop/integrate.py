"""Adaptive Dormand-Prince 5(4) integration.

The stepper works on flat float arrays, so a whole ensemble of
independent trajectories can be advanced together by handing it a
vectorised right-hand side.  All trajectories then share one step size.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

__all__ = ["IntegratorConfig", "IntegrationError", "Trajectory", "integrate"]

# Dormand & Prince (1980), 7 stages with FSAL.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B_EMB = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)
_E = _B - _B_EMB

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0
# PI controller exponents (Hairer & Wanner, beta = 0.04 for DOPRI5)
_ALPHA = 0.7 / 5
_BETA = 0.04


@dataclass(frozen=True)
class IntegratorConfig:
    rtol: float = 1e-6
    atol: float = 1e-9
    max_step: float = np.inf
    first_step: float | None = None
    dense_output: bool = False
    max_steps: int = 1_000_000

    def __post_init__(self):
        if self.rtol <= 0 or self.atol <= 0:
            raise ValueError("rtol and atol must be positive")
        if self.max_step <= 0:
            raise ValueError("max_step must be positive")


class IntegrationError(RuntimeError):
    """Raised when the step size underflows or the field goes non-finite."""

    def __init__(self, message: str, t: float, y: np.ndarray):
        super().__init__(f"{message} (t = {t:.6g})")
        self.t = t
        self.y = y


@dataclass
class Trajectory:
    """Samples of an integrated trajectory.

    ``y`` has shape ``(len(t),) + y0.shape``.  With ``dense_output`` the
    accepted step endpoints are kept in ``t_steps``/``y_steps`` and
    :meth:`__call__` interpolates linearly between them.
    """

    t: np.ndarray
    y: np.ndarray
    n_steps: int
    n_rejected: int
    n_evals: int
    t_steps: np.ndarray | None = None
    y_steps: np.ndarray | None = None

    def __call__(self, t):
        if self.t_steps is None:
            raise ValueError("integrate with dense_output=True to interpolate")
        ts, ys = self.t_steps, self.y_steps.reshape(len(self.t_steps), -1)
        out = np.stack([np.interp(t, ts, ys[:, j]) for j in range(ys.shape[1])], axis=-1)
        return out.reshape(np.shape(t) + self.y_steps.shape[1:])

    @property
    def final(self) -> np.ndarray:
        return self.y[-1]


def _initial_step(rhs, t0, y0, f0, direction, rtol, atol):
    # Hairer, Norsett & Wanner, "Solving ODEs I", II.4
    scale = atol + np.abs(y0) * rtol
    d0 = np.max(np.abs(y0) / scale)
    d1 = np.max(np.abs(f0) / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = y0 + h0 * direction * f0
    f1 = rhs(t0 + h0 * direction, y1)
    d2 = np.max(np.abs(f1 - f0) / scale) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1)


def integrate(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    y0,
    t_span: tuple[float, float],
    cfg: IntegratorConfig = IntegratorConfig(),
    t_eval: Sequence[float] | None = None,
    tstops: Sequence[float] = (),
    on_step: Callable[[float, np.ndarray], None] | None = None,
) -> Trajectory:
    """Integrate ``dy/dt = rhs(t, y)`` over ``t_span``.

    Parameters
    ----------
    rhs
        Vector field; receives and returns arrays shaped like ``y0``.
    t_span
        ``(t0, t1)``; backward integration (``t1 < t0``) is allowed.
    t_eval
        Output times inside ``t_span``.  Steps are shortened so that every
        output time is hit exactly, never interpolated.  Defaults to the
        two endpoints.
    tstops
        Extra times the stepper must land on, e.g. kinks of a piecewise
        right-hand side.
    on_step
        Called with ``(t, y)`` after every accepted step.

    Raises
    ------
    IntegrationError
        On step-size underflow, step budget exhaustion or a non-finite
        field; the exception carries the last accepted state.
    """
    t0, t1 = float(t_span[0]), float(t_span[1])
    if t0 == t1:
        raise ValueError("t_span is degenerate")
    direction = 1.0 if t1 > t0 else -1.0
    y = np.array(y0, dtype=float)
    shape = y.shape
    y = y.ravel()

    def f(t, v):
        return np.asarray(rhs(t, v.reshape(shape)), dtype=float).ravel()

    if t_eval is None:
        t_eval = np.array([t0, t1])
    else:
        t_eval = np.asarray(t_eval, dtype=float)
        if np.any(direction * np.diff(t_eval) < 0):
            raise ValueError("t_eval must be monotone in the integration direction")
        if np.any(direction * (t_eval - t0) < 0) or np.any(direction * (t_eval - t1) > 0):
            raise ValueError("t_eval outside t_span")
    stops = sorted(
        {float(s) for s in list(t_eval) + list(tstops) + [t1] if direction * (s - t0) > 0
         and direction * (s - t1) <= 0},
        key=lambda s: direction * s,
    )

    out_t, out_y = [], []
    eval_iter = iter(t_eval)
    next_eval = next(eval_iter, None)
    while next_eval is not None and next_eval == t0:
        out_t.append(t0)
        out_y.append(y.copy())
        next_eval = next(eval_iter, None)

    t = t0
    fy = f(t, y)
    n_evals = 1
    if not np.all(np.isfinite(fy)):
        raise IntegrationError("non-finite right-hand side at initial state", t, y.reshape(shape))
    h = cfg.first_step or _initial_step(f, t, y, fy, direction, cfg.rtol, cfg.atol)
    n_evals += 1
    h = min(h, cfg.max_step, abs(t1 - t0))
    err_prev = 1e-4
    n_steps = n_rejected = 0
    steps_t = [t] if cfg.dense_output else None
    steps_y = [y.copy()] if cfg.dense_output else None
    stop_idx = 0
    k = np.empty((7, y.size))

    while stop_idx < len(stops):
        target = stops[stop_idx]
        remaining = abs(target - t)
        last = h >= remaining * (1 - 1e-12)
        step = remaining if last else h
        if step < 10 * np.finfo(float).eps * max(1.0, abs(t)):
            raise IntegrationError("step size underflow", t, y.reshape(shape))
        if n_steps + n_rejected >= cfg.max_steps:
            raise IntegrationError("maximum number of steps exceeded", t, y.reshape(shape))
        hs = direction * step

        k[0] = fy
        for i in range(1, 7):
            yi = y + hs * (np.asarray(_A[i]) @ k[:i])
            k[i] = f(t + _C[i] * hs, yi)
        n_evals += 6
        y_new = yi  # stage 7 evaluates at the 5th-order solution (FSAL)
        err_vec = hs * (_E @ k)
        scale = cfg.atol + cfg.rtol * np.maximum(np.abs(y), np.abs(y_new))
        with np.errstate(invalid="ignore"):
            err = float(np.max(np.abs(err_vec) / scale)) if y.size else 0.0

        if not np.isfinite(err):
            logger.debug("non-finite error estimate at t=%g, h=%g", t, step)
            h = step * _MIN_FACTOR
            n_rejected += 1
            continue
        if err <= 1.0:
            t = target if last else t + hs
            y = y_new
            fy = k[6].copy()  # k is overwritten by the next attempt
            n_steps += 1
            if cfg.dense_output:
                steps_t.append(t)
                steps_y.append(y.copy())
            if on_step is not None:
                on_step(t, y.reshape(shape))
            if last:
                stop_idx += 1
                while next_eval is not None and next_eval == t:
                    out_t.append(t)
                    out_y.append(y.copy())
                    next_eval = next(eval_iter, None)
            if err == 0.0:
                factor = _MAX_FACTOR
            else:
                factor = _SAFETY * err ** -_ALPHA * err_prev**_BETA
                factor = min(_MAX_FACTOR, max(_MIN_FACTOR, factor))
            # a step cut short to hit a stop says nothing about the natural size
            h = min(max(h, step * factor) if last else step * factor, cfg.max_step)
            err_prev = max(err, 1e-4)
        else:
            logger.debug("rejected step at t=%g, h=%g, err=%g", t, step, err)
            factor = max(_MIN_FACTOR, _SAFETY * err ** -_ALPHA)
            h = step * factor
            n_rejected += 1

    return Trajectory(
        t=np.array(out_t),
        y=np.array(out_y).reshape((len(out_t),) + shape),
        n_steps=n_steps,
        n_rejected=n_rejected,
        n_evals=n_evals,
        t_steps=None if steps_t is None else np.array(steps_t),
        y_steps=None if steps_y is None else np.array(steps_y).reshape((len(steps_t),) + shape),
    )
