"""Dormand–Prince 5(4) integrator with PI step control and dense output."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
A = [
    np.zeros(0),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
E = B5 - B4
# continuous extension: weight of stage i at theta is sum_k P[i, k] theta^(k+1)
P = np.array(
    [
        [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)


class StepSizeUnderflow(RuntimeError):
    def __init__(self, t: float):
        super().__init__(f"step size underflow; last good t = {t!r}")
        self.t = t


@dataclass
class Step:
    """One accepted step from ``t0`` to ``t0 + h`` (``h`` may be negative)."""

    t0: float
    h: float
    y0: np.ndarray
    k: np.ndarray  # stage derivatives, shape (7, dim)

    @property
    def t1(self) -> float:
        return self.t0 + self.h

    @property
    def y1(self) -> np.ndarray:
        return self.y0 + self.h * (B5 @ self.k)

    def __call__(self, t: float) -> np.ndarray:
        theta = (t - self.t0) / self.h
        return self.y0 + self.h * (P @ theta ** np.arange(1, 5)) @ self.k


def rk_step(f, t: float, y: np.ndarray, h: float) -> np.ndarray:
    """Single fixed Dormand–Prince fifth-order step."""
    k = np.empty((7, y.size))
    k[0] = f(t, y)
    for i in range(1, 6):
        k[i] = f(t + C[i] * h, y + h * (A[i] @ k[:i]))
    return y + h * (B5[:6] @ k[:6])


def dopri5(
    f: Callable[[float, np.ndarray], np.ndarray],
    t0: float,
    y0,
    t1: float,
    rtol: float = 1e-10,
    atol: float = 1e-10,
    h0: float | None = None,
    max_steps: int = 200000,
    on_step: Callable[[float, np.ndarray], None] | None = None,
) -> list[Step]:
    """Integrate ``y' = f(t, y)`` from ``t0`` to ``t1`` in either direction."""
    y = np.asarray(y0, dtype=float).copy()
    t = float(t0)
    direction = 1.0 if t1 >= t0 else -1.0
    span = abs(t1 - t0)
    steps: list[Step] = []
    if span == 0.0:
        return steps
    k0 = np.asarray(f(t, y), dtype=float)
    if h0 is None:
        h0 = 0.01 * (1 + np.max(np.abs(y))) / (1 + np.max(np.abs(k0))) * (rtol / 1e-6) ** 0.2
    h = min(span, h0)
    err_prev = 1e-4
    beta = 0.04
    alpha = 0.2 - 0.75 * beta
    for _ in range(max_steps):
        remaining = abs(t1 - t)
        if remaining <= 1e-14 * max(1.0, abs(t1)):
            return steps
        last = h >= remaining
        h = min(h, remaining)
        if h < 1e-14 * max(1.0, abs(t)):
            raise StepSizeUnderflow(t)
        hs = direction * h
        k = np.empty((7, y.size))
        k[0] = k0
        for i in range(1, 6):
            k[i] = f(t + C[i] * hs, y + hs * (A[i] @ k[:i]))
        y_new = y + hs * (B5[:6] @ k[:6])
        k[6] = f(t + hs, y_new)
        err_vec = hs * (E @ k)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.sqrt(np.mean((err_vec / scale) ** 2)))
        if not np.isfinite(err):
            h *= 0.2
            continue
        if err <= 1.0:
            steps.append(Step(t, hs, y.copy(), k))
            t = t1 if last else t + hs
            y = y_new
            k0 = k[6]
            if on_step is not None:
                on_step(t, y)
            factor = 10.0 if err == 0 else min(10.0, max(0.2, 0.9 * err**-alpha * err_prev**beta))
            err_prev = max(err, 1e-4)
            h *= factor
        else:
            h *= max(0.2, 0.9 * err**-0.2)
    raise StepSizeUnderflow(t)


class Solution:
    """Piecewise dense solution assembled from steps taken in both directions."""

    def __init__(self, forward: list[Step], backward: list[Step], t_start: float, y_start):
        self.forward = forward
        self.backward = backward
        self.t_start = t_start
        nodes = [(s.t1, s.y1) for s in reversed(backward)]
        nodes.append((t_start, np.asarray(y_start, dtype=float)))
        nodes += [(s.t1, s.y1) for s in forward]
        self.node_t = np.array([n[0] for n in nodes])
        self.node_y = np.array([n[1] for n in nodes])
        self._fwd_ends = np.array([s.t1 for s in forward])
        self._bwd_ends = np.array([s.t1 for s in backward])

    @property
    def t_min(self) -> float:
        return float(self.node_t[0])

    @property
    def t_max(self) -> float:
        return float(self.node_t[-1])

    def __call__(self, t: float) -> np.ndarray:
        if t >= self.t_start:
            if not self.forward:
                return self.node_y[-1].copy()
            i = min(int(np.searchsorted(self._fwd_ends, t)), len(self.forward) - 1)
            return self.forward[i](t)
        if not self.backward:
            return self.node_y[0].copy()
        i = min(int(np.searchsorted(-self._bwd_ends, -t)), len(self.backward) - 1)
        return self.backward[i](t)


def solve_both_ways(f, t_start: float, y0, t_span: tuple[float, float], **kw) -> Solution:
    """Integrate from ``t_start`` forward to ``t_span[1]`` and backward to ``t_span[0]``."""
    lo, hi = t_span
    if not lo <= t_start <= hi or lo == hi:
        raise ValueError("initial time must lie inside a non-empty span")
    back = dopri5(f, t_start, y0, lo, **kw)
    fwd = dopri5(f, t_start, y0, hi, **kw)
    return Solution(fwd, back, t_start, y0)
