"""Asymptotic order estimation and coefficient extraction on geometric ladders."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

CURVATURE_SPREAD = 0.05


class AsymError(ValueError):
    pass


class InsufficientDataError(AsymError):
    """Too few samples above the noise floor; vanishing claims treat this as a pass."""


class NonConvergentError(AsymError):
    pass


@dataclass(frozen=True)
class OrderFit:
    samples: tuple[tuple[float, float], ...]
    slope: float
    intercept: float
    r2: float
    noise_floor: float
    used_points: int
    curvature: bool

    def to_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "r2": self.r2,
            "noise_floor": self.noise_floor,
            "used_points": self.used_points,
            "curvature": self.curvature,
        }


def dyadic_ladder(k0: int = 3, k1: int = 10) -> np.ndarray:
    """``s = 2^-k`` for ``k = k0..k1`` (decreasing)."""
    return 2.0 ** -np.arange(k0, k1 + 1, dtype=float)


def _sorted(samples: Iterable[tuple[float, float]]) -> list[tuple[float, float]]:
    pts = sorted(((float(s), float(v)) for s, v in samples), key=lambda p: -p[0])
    for (s0, _), (s1, _) in zip(pts, pts[1:]):
        if s1 == s0:
            raise AsymError("sample abscissae must be distinct")
    return pts


def local_slopes(samples: Sequence[tuple[float, float]]) -> np.ndarray:
    pts = _sorted(samples)
    ls = np.log([p[0] for p in pts])
    lv = np.log([p[1] for p in pts])
    return np.diff(lv) / np.diff(ls)


def estimate_order(samples: Iterable[tuple[float, float]], noise_floor: float = 0.0) -> OrderFit:
    """Least-squares slope of ``log value`` against ``log s``.

    Points with ``value <= 10 * noise_floor`` are discarded.  ``curvature``
    is set when the local slopes are strictly monotone with spread above
    ``CURVATURE_SPREAD`` (a logarithmic correction signature).
    """
    pts = _sorted(samples)
    if len(pts) < 5:
        raise AsymError("at least 5 samples are required")
    if any(v < 0 for _, v in pts):
        raise AsymError("values must be non-negative magnitudes")
    used = [(s, v) for s, v in pts if v > 10.0 * noise_floor and v > 0.0]
    if len(used) < 3:
        raise InsufficientDataError("all samples at noise floor")
    x = np.log([p[0] for p in used])
    y = np.log([p[1] for p in used])
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    ls = np.diff(y) / np.diff(x)
    d = np.diff(ls)
    monotone = len(d) > 0 and (np.all(d > 0) or np.all(d < 0))
    curvature = bool(monotone and (ls.max() - ls.min()) > CURVATURE_SPREAD)
    return OrderFit(tuple(pts), float(slope), float(intercept), r2, float(noise_floor), len(used), curvature)


def richardson(samples_signed: Iterable[tuple[float, float]], k: int) -> tuple[float, float]:
    """Extrapolated limit of ``value / s^k`` and its error estimate.

    Assumes a geometric ladder with constant ratio and an error expansion in
    integer powers of ``s``.  The diagonal entry with the smallest change
    from its predecessor is returned.
    """
    pts = _sorted(samples_signed)
    if len(pts) < 3:
        raise AsymError("at least 3 samples are required")
    s = np.array([p[0] for p in pts])
    ratios = s[:-1] / s[1:]
    r = float(ratios[0])
    if r <= 1 or np.max(np.abs(ratios - r)) > 1e-9 * r:
        raise AsymError("samples must lie on a geometric ladder")
    T0 = np.array([p[1] for p in pts]) / s**k
    tail = np.abs(T0[-4:])
    if len(tail) == 4 and tail[0] > 0 and np.all(tail[1:] >= math.sqrt(r) * tail[:-1]):
        raise NonConvergentError(f"value / s^{k} grows geometrically; the order is below {k}")
    m = len(T0)
    T = [list(T0)]
    for j in range(1, m):
        prev = T[-1]
        f = r**j
        T.append([(f * prev[i + 1] - prev[i]) / (f - 1) for i in range(len(prev) - 1)])
    diag = [T[j][-1] for j in range(m)]
    diffs = np.abs(np.diff(diag))
    if len(diffs) >= 2 and np.all(np.diff(diffs) > 0) and diffs[0] > 0:
        raise NonConvergentError("Richardson extrapolation is not converging")
    j = int(np.argmin(diffs)) + 1
    return float(diag[j]), float(diffs[j - 1])


def extract_coefficient(samples_signed: Iterable[tuple[float, float]], k: int) -> float:
    """Coefficient of ``s^k`` in signed samples ``(s, f(s))``."""
    return richardson(samples_signed, k)[0]
