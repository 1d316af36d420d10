"""Dormand-Prince 5(4) integrator with PI step-size control and dense output.

The step controller follows the reference DOPRI5 code from "Solving Ordinary
Differential Equations I". Samples between steps come from the pair's
4th-order continuous extension, so requesting more output times does not
change the step sequence.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import IntegrationError, SingularPointError, SingularStateError, StepSizeUnderflowError

_EPS = np.finfo(float).eps

C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
# 5th-order solution minus embedded 4th-order solution
E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])
# continuous extension
D = np.array([
    -12715105075 / 11282082432,
    0.0,
    87487479700 / 32700410799,
    -10690763975 / 1880347072,
    701980252875 / 199316789632,
    -1453857185 / 822651844,
    69997945 / 29380423,
])


@dataclass(frozen=True)
class StepControl:
    """Tolerances and controller constants.

    The local error of a step is ``sqrt(mean((err / sk)**2))`` with
    ``sk = atol + rtol * max(|y_old|, |y_new|)``; a step is accepted when it is <= 1.
    """

    rtol: float = 1e-10
    atol: float = 1e-10
    safety: float = 0.9
    beta: float = 0.04  # PI stabilisation; 0 gives the classical I controller
    min_factor: float = 0.2
    max_factor: float = 10.0
    max_steps: int = 100_000
    h_max: float = np.inf

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("integration tolerances must be positive")
        if not 0 <= self.beta < 0.2:
            raise ValueError("beta must lie in [0, 0.2)")


@dataclass(frozen=True)
class Solution:
    t: np.ndarray
    y: np.ndarray  # shape (len(t), dim)
    n_accepted: int
    n_rejected: int
    n_evals: int


class _Rhs:
    """Wraps the user function: counts calls and attaches the time to failures."""

    def __init__(self, fun: Callable, dim: int):
        self.fun = fun
        self.dim = dim
        self.calls = 0

    def __call__(self, t: float, y: np.ndarray) -> np.ndarray:
        self.calls += 1
        try:
            out = np.asarray(self.fun(t, y), dtype=float)
        except SingularStateError:
            raise
        except SingularPointError as exc:
            raise SingularStateError(f"singular state {y.tolist()}: {exc}", t) from exc
        if out.shape != (self.dim,):
            raise ValueError(f"right-hand side returned shape {out.shape}, expected ({self.dim},)")
        if not np.all(np.isfinite(out)):
            raise IntegrationError(f"right-hand side is not finite at y = {y.tolist()}", t)
        return out


def _rms(v: np.ndarray) -> float:
    return float(np.sqrt(np.mean(v * v)))


def _initial_step(f: _Rhs, t0, y0, f0, direction, ctl: StepControl, span: float) -> float:
    sk = ctl.atol + ctl.rtol * np.abs(y0)
    dnf = _rms(f0 / sk)
    dny = _rms(y0 / sk)
    h = 1e-6 if dnf <= 1e-5 or dny <= 1e-5 else 0.01 * dny / dnf
    h = min(h, ctl.h_max, span)
    f1 = f(t0 + direction * h, y0 + direction * h * f0)
    der2 = _rms((f1 - f0) / sk) / h
    der12 = max(der2, dnf)
    h1 = max(1e-6, 1e-3 * h) if der12 <= 1e-15 else (0.01 / der12) ** 0.2
    return min(100 * h, h1, ctl.h_max, span)


def solve(
    fun: Callable[[float, np.ndarray], np.ndarray],
    t0: float,
    y0,
    t1: float,
    t_eval=None,
    control: StepControl | None = None,
) -> Solution:
    """Integrate ``y' = fun(t, y)`` from ``t0`` to ``t1`` (either direction).

    Args:
        fun: right-hand side returning an array shaped like ``y0``.
        t_eval: output times, monotone in the direction of integration and
            inside ``[t0, t1]``. Defaults to the accepted step points.
        control: tolerances and controller settings.

    Raises:
        StepSizeUnderflowError: the step size fell below the floating-point
            resolution of ``t`` (typically a pole of the vector field).
        SingularStateError: ``fun`` raised :class:`SingularPointError`.
        IntegrationError: non-finite derivative or too many steps.
    """
    ctl = control or StepControl()
    t0, t1 = float(t0), float(t1)
    y = np.array(y0, dtype=float).ravel()
    f = _Rhs(fun, y.size)
    direction = 1.0 if t1 >= t0 else -1.0

    if t_eval is None:
        ts_out, ys_out = [t0], [y.copy()]
        pending = None
    else:
        pending = np.asarray(t_eval, dtype=float).ravel()
        if pending.size and (
            np.any(direction * np.diff(pending) < 0)
            or direction * (pending[0] - t0) < 0
            or direction * (pending[-1] - t1) > 0
        ):
            raise ValueError("t_eval must be monotone and inside [t0, t1]")
        ts_out, ys_out = [], []
        # samples sitting exactly at t0
        while pending.size and pending[0] == t0:
            ts_out.append(t0)
            ys_out.append(y.copy())
            pending = pending[1:]

    if t1 == t0:
        return Solution(np.array(ts_out if ts_out else [t0]), np.array(ys_out if ys_out else [y]), 0, 0, 0)

    t = t0
    k1 = f(t, y)
    h = direction * _initial_step(f, t0, y, k1, direction, ctl, abs(t1 - t0))
    expo = 0.2 - 0.75 * ctl.beta
    err_old = 1e-4
    rejected_last = False
    n_acc = n_rej = 0
    k = np.empty((7, y.size))

    while direction * (t - t1) < 0:
        if n_acc + n_rej >= ctl.max_steps:
            raise IntegrationError(f"exceeded {ctl.max_steps} steps", t)
        if abs(h) <= 10 * _EPS * max(1.0, abs(t)):
            raise StepSizeUnderflowError(
                "step size underflow; the solution is probably approaching a singularity (a chart pole or a blow-up)", t
            )
        last = direction * (t + 1.01 * h - t1) >= 0
        if last:
            h = t1 - t

        k[0] = k1
        for s in range(1, 7):
            k[s] = f(t + C[s] * h, y + h * (np.asarray(A[s]) @ k[:s]))
        y_new = y + h * (np.asarray(A[6]) @ k[:6])
        k7 = k[6]  # FSAL: stage 7 is f(t + h, y_new)

        sk = ctl.atol + ctl.rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = _rms(h * (E @ k) / sk)
        fac11 = err**expo
        if err <= 1.0:
            fac = fac11 / err_old**ctl.beta
            fac = min(1 / ctl.min_factor, max(1 / ctl.max_factor, fac / ctl.safety))
            h_new = h / fac
            err_old = max(err, 1e-4)
            if rejected_last:
                h_new = direction * min(abs(h_new), abs(h))
            t_new = t + h if not last else t1

            if pending is None:
                ts_out.append(t_new)
                ys_out.append(y_new.copy())
            else:
                upto = np.searchsorted(direction * pending, direction * t_new, side="right")
                if upto:
                    chunk, pending = pending[:upto], pending[upto:]
                    ys_out.extend(_dense(t, h, y, y_new, k, chunk, t_new))
                    ts_out.extend(chunk.tolist())

            n_acc += 1
            rejected_last = False
            t, y, k1 = t_new, y_new, k7
            h = h_new
        else:
            h = h / min(1 / ctl.min_factor, fac11 / ctl.safety)
            rejected_last = True
            n_rej += 1

    return Solution(np.array(ts_out), np.array(ys_out), n_acc, n_rej, f.calls)


def _dense(t, h, y, y_new, k, chunk, t_new):
    ydiff = y_new - y
    bspl = h * k[0] - ydiff
    r4 = ydiff - h * k[6] - bspl
    r5 = h * (D @ k)
    out = []
    for s in chunk:
        if s == t_new:
            out.append(y_new.copy())
            continue
        th = (s - t) / h
        th1 = 1.0 - th
        out.append(y + th * (ydiff + th1 * (bspl + th * (r4 + th1 * r5))))
    return out
