"""Truncated polyhomogeneous maps ``u(s, t)`` from the upper half-plane model
of the hyperbolic plane (``sign = +1``) or AdS2 (``sign = -1``) into a
normal-form target, and their tension field, second fundamental form and
pullback metric.

Components::

    x = s x1 + s^2 x2 + s^3 x3 + s^3 log(s) v0
    y = gamma + s y1 + s^2 y2 + s^3 y3 + s^3 log(s) v   (+ h chi(s) dphi(t))
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .ambient import AmbientMetric
from .geodesic import Curve, Kinematics, NullVelocityError, kinematics

X_KEYS = ("x1", "x2", "x3", "v0")
Y_KEYS = ("y1", "y2", "y3", "v")
ALL_KEYS = X_KEYS + Y_KEYS


class MapError(ValueError):
    pass


class CausalMismatchError(MapError):
    pass


class ChartExitError(MapError):
    pass


def _profile(key: str, s: float) -> tuple[float, float, float]:
    """``p(s), p'(s), p''(s)`` multiplying coefficient ``key``."""
    if key in ("x1", "y1"):
        return s, 1.0, 0.0
    if key in ("x2", "y2"):
        return s * s, 2 * s, 2.0
    if key in ("x3", "y3"):
        return s**3, 3 * s * s, 6 * s
    L = math.log(s)
    return s**3 * L, 3 * s * s * L + s * s, 6 * s * L + 5 * s


def smooth_cutoff(s_max: float) -> Callable[[float], tuple[float, float, float]]:
    """``chi`` with ``chi = 1`` on ``s <= s_max/2`` and ``chi = chi' = chi'' = 0`` at ``s_max``."""
    a, b = 0.5 * s_max, s_max
    w = b - a

    def chi(s: float) -> tuple[float, float, float]:
        if s <= a:
            return 1.0, 0.0, 0.0
        if s >= b:
            return 0.0, 0.0, 0.0
        r = (s - a) / w
        step = r**3 * (10 - 15 * r + 6 * r * r)
        d1 = 30 * r * r * (1 - r) ** 2 / w
        d2 = 60 * r * (1 - r) * (1 - 2 * r) / w**2
        return 1.0 - step, -d1, -d2

    return chi


@dataclass(frozen=True)
class Variation:
    """Additive deformation ``h chi(s) dphi(t)`` of the boundary components."""

    h: float
    chi: Callable[[float], tuple[float, float, float]]
    dphi: Callable[[float], np.ndarray]


@dataclass(frozen=True)
class MapJet:
    u: np.ndarray
    us: np.ndarray
    ut: np.ndarray
    uss: np.ndarray
    utt: np.ndarray
    ust: np.ndarray

    @property
    def uts(self) -> np.ndarray:
        return self.ust


@dataclass(frozen=True)
class Slice:
    """Coefficient functions and their first two t-derivatives at one t."""

    t: float
    kin: Kinematics
    jets: np.ndarray  # exact gamma, gamma', gamma''
    values: dict
    d1: dict
    d2: dict


Coefficient = float | np.ndarray | Callable[[float], object]


@dataclass(frozen=True, eq=False)
class ExpansionMap:
    """Truncated expansion with theorem coefficients unless overridden.

    ``overrides`` replace, ``shifts`` are added to the theorem values; both
    map a coefficient name to a constant or a function of ``t``.
    """

    curve: Curve
    ambient: AmbientMetric
    sign: int = 1
    overrides: Mapping[str, Coefficient] = field(default_factory=dict)
    shifts: Mapping[str, Coefficient] = field(default_factory=dict)
    variation: Variation | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise MapError("domain sign must be +1 (hyperbolic plane) or -1 (AdS2)")
        for k in list(self.overrides) + list(self.shifts):
            if k not in ALL_KEYS:
                raise MapError(f"unknown coefficient {k!r}; expected one of {ALL_KEYS}")

    @property
    def n(self) -> int:
        return self.curve.chart.n

    @property
    def theorem_coefficients(self) -> bool:
        return not self.overrides and not self.shifts

    def with_changes(self, overrides=None, shifts=None, variation=None) -> ExpansionMap:
        """Copy with merged coefficient changes; a pure variation change shares cached slices."""
        same = not overrides and not shifts
        return ExpansionMap(
            self.curve,
            self.ambient,
            self.sign,
            {**self.overrides, **(overrides or {})},
            {**self.shifts, **(shifts or {})},
            variation if variation is not None else self.variation,
            self._cache if same else {},
        )

    # -- coefficient functions ----------------------------------------------

    def _kin(self, curve: Curve, t: float) -> Kinematics:
        k = kinematics(curve, t)
        c = k.causal
        if c == 0:
            raise NullVelocityError(t, k.N)
        if c != self.sign:
            kind = "spacelike" if self.sign == 1 else "timelike"
            raise CausalMismatchError(f"boundary curve must be {kind} at t = {t!r}")
        return k

    def theorem_values(self, k: Kinematics) -> dict:
        lam = k.lam
        a_sharp = k.alpha_sharp
        aa = k.inner(a_sharp, a_sharp)
        zero = np.zeros(self.n)
        return {
            "x1": lam,
            "x2": 0.0,
            "x3": -0.25 * lam**3 * aa,
            "v0": 0.0,
            "y1": zero,
            "y2": 0.5 * lam**2 * a_sharp,
            "y3": zero,
            "v": zero,
        }

    def coefficients(self, k: Kinematics) -> dict:
        vals = self.theorem_values(k)
        for key, c in self.overrides.items():
            vals[key] = _resolve(c, k.t, key, self.n)
        for key, c in self.shifts.items():
            vals[key] = vals[key] + _resolve(c, k.t, key, self.n)
        return vals

    def _stack(self, vals: dict) -> np.ndarray:
        return np.concatenate([np.atleast_1d(np.asarray(vals[k], dtype=float)) for k in ALL_KEYS])

    def _unstack(self, z: np.ndarray) -> dict:
        out = {}
        i = 0
        for k in ALL_KEYS:
            w = 1 if k in X_KEYS else self.n
            out[k] = float(z[i]) if w == 1 else z[i : i + w].copy()
            i += w
        return out

    def slice(self, t: float) -> Slice:
        t = float(t)
        hit = self._cache.get(t)
        if hit is not None:
            return hit
        view = self.curve.local(t)
        h = _t_step(t)
        kin0 = self._kin(view, t)
        stack = []
        for j in (-2, -1, 0, 1, 2):
            kj = kin0 if j == 0 else self._kin(view, t + j * h)
            stack.append(self._stack(self.coefficients(kj)))
        Z = np.array(stack)
        v0, d1, d2 = _stencil(Z, h)
        jets = view.jets(t)
        sl = Slice(t, kin0, jets, self._unstack(v0), self._unstack(d1), self._unstack(d2))
        self._cache[t] = sl
        return sl


def _t_step(t: float) -> float:
    return 1e-4 * max(1.0, abs(t))


def _stencil(Z: np.ndarray, h: float):
    """Centre value and 5-point first and second derivatives of rows ``Z[0..4]``."""
    d1 = (Z[0] - 8 * Z[1] + 8 * Z[3] - Z[4]) / (12 * h)
    d2 = (-Z[0] + 16 * Z[1] - 30 * Z[2] + 16 * Z[3] - Z[4]) / (12 * h * h)
    return Z[2], d1, d2


def _variation_jet(var: Variation, t: float):
    h = _t_step(t)
    V = np.array([np.asarray(var.dphi(t + j * h), dtype=float) for j in (-2, -1, 0, 1, 2)])
    return _stencil(V, h)


def _resolve(c: Coefficient, t: float, key: str, n: int):
    v = c(t) if callable(c) else c
    if key in X_KEYS:
        return float(v)
    arr = np.asarray(v, dtype=float)
    if arr.shape != (n,):
        raise MapError(f"coefficient {key} must have {n} components")
    return arr


def build_expansion(
    curve: Curve,
    sign: int,
    ambient: AmbientMetric,
    t_check: tuple[float, ...] = (),
    overrides: Mapping[str, Coefficient] | None = None,
    shifts: Mapping[str, Coefficient] | None = None,
) -> ExpansionMap:
    """Expansion with theorem coefficients, validated at the ``t_check`` points."""
    if not _same_chart(curve.chart, ambient.boundary):
        raise MapError("ambient boundary chart differs from the curve chart")
    m = ExpansionMap(curve, ambient, sign, dict(overrides or {}), dict(shifts or {}))
    for t in t_check:
        m._kin(curve, float(t))
    return m


def _same_chart(a, b) -> bool:
    return a is b or (a.variables == b.variables and a.components == b.components)


# -- evaluation ---------------------------------------------------------------


def eval_map(m: ExpansionMap, s: float, t: float) -> MapJet:
    if not s > 0:
        raise MapError(f"s must be positive (got {s!r})")
    sl = m.slice(t)
    n = m.n
    u = np.zeros(n + 1)
    us, ut, uss, utt, ust = (np.zeros(n + 1) for _ in range(5))
    g0, g1, g2 = sl.jets[0], sl.jets[1], sl.jets[2]
    u[1:] += g0
    ut[1:] += g1
    utt[1:] += g2
    for key in ALL_KEYS:
        p, dp, ddp = _profile(key, s)
        c, c1, c2 = sl.values[key], sl.d1[key], sl.d2[key]
        sl_ = slice(0, 1) if key in X_KEYS else slice(1, None)
        u[sl_] += p * c
        us[sl_] += dp * c
        uss[sl_] += ddp * c
        ut[sl_] += p * c1
        utt[sl_] += p * c2
        ust[sl_] += dp * c1
    if m.variation is not None:
        h = m.variation.h
        chi, dchi, ddchi = m.variation.chi(s)
        w, w1, w2 = _variation_jet(m.variation, sl.t)
        u[1:] += h * chi * w
        us[1:] += h * dchi * w
        uss[1:] += h * ddchi * w
        ut[1:] += h * chi * w1
        utt[1:] += h * chi * w2
        ust[1:] += h * dchi * w1
    return MapJet(u, us, ut, uss, utt, ust)


def _target(m: ExpansionMap, jet: MapJet, s: float, t: float):
    x = jet.u[0]
    if not x > 0:
        raise ChartExitError(f"map leaves the target chart (x = {x:.3g}) at s = {s!r}, t = {t!r}")
    return m.ambient.gplus_and_christoffel(x, jet.u[1:])


def _quad(G: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("ijk,j,k->i", G, a, b)


def tension(m: ExpansionMap, s: float, t: float) -> np.ndarray:
    """``tau(u)^I`` in the ambient coordinates."""
    jet = eval_map(m, s, t)
    _, G = _target(m, jet, s, t)
    e = m.sign
    return s * s * (jet.uss + e * jet.utt + _quad(G, jet.us, jet.us) + e * _quad(G, jet.ut, jet.ut))


def tension_norm(m: ExpansionMap, s: float, t: float) -> float:
    """``sqrt(|g+(tau, tau)|)``."""
    jet = eval_map(m, s, t)
    gp, G = _target(m, jet, s, t)
    e = m.sign
    tau = s * s * (jet.uss + e * jet.utt + _quad(G, jet.us, jet.us) + e * _quad(G, jet.ut, jet.ut))
    return math.sqrt(abs(float(tau @ gp @ tau)))


def second_fundamental_form(m: ExpansionMap, s: float, t: float) -> dict[str, np.ndarray]:
    """``nabla_A Phi_B^I`` for ``AB`` in ``ss``, ``st`` (= ``ts``), ``tt``."""
    jet = eval_map(m, s, t)
    _, G = _target(m, jet, s, t)
    return {
        "ss": jet.uss + jet.us / s + _quad(G, jet.us, jet.us),
        "st": jet.ust + jet.ut / s + _quad(G, jet.us, jet.ut),
        "tt": jet.utt - m.sign * jet.us / s + _quad(G, jet.ut, jet.ut),
    }


def pullback(m: ExpansionMap, s: float, t: float) -> dict[str, float]:
    """Coordinate components of ``u* g+ - h+``."""
    jet = eval_map(m, s, t)
    gp, _ = _target(m, jet, s, t)
    return {
        "ss": float(jet.us @ gp @ jet.us) - 1.0 / s**2,
        "st": float(jet.us @ gp @ jet.ut),
        "tt": float(jet.ut @ gp @ jet.ut) - m.sign / s**2,
    }


# -- predicted leading coefficients -------------------------------------------


def sff_leading_coefficients(
    k: Kinematics, x3: float, y3: np.ndarray, P: np.ndarray, sign: int
) -> dict[str, np.ndarray | float]:
    """Coefficients of ``s`` in the second fundamental form components.

    Keys: ``ss0, tt0, st0`` (x-components) and ``ss, tt, st`` (y-components).
    """
    lam = k.lam
    v = k.v
    a_sharp = k.alpha_sharp
    aa = k.inner(a_sharp, a_sharp)
    av = float(k.alpha @ v)
    y3 = np.asarray(y3, dtype=float)
    c0 = 4 * x3 + lam**3 * aa
    P_mixed_v = k.geo.g_inv @ (P @ v)
    st = -2 * x3 * v / lam + lam**2 * k.nabla_alpha_sharp - lam**2 * av * a_sharp - lam**2 * P_mixed_v
    return {
        "ss0": c0,
        "tt0": -sign * c0,
        "st0": 3 * k.inner(v, y3) / lam,
        "ss": 3 * y3,
        "tt": -sign * 3 * y3,
        "st": st,
    }


def predicted_sff(m: ExpansionMap, t: float) -> dict[str, np.ndarray | float]:
    sl = m.slice(t)
    k = sl.kin
    P = m.ambient.schouten(k.y)
    return sff_leading_coefficients(k, sl.values["x3"], sl.values["y3"], P, m.sign)


def predicted_pullback(m: ExpansionMap, t: float) -> dict[str, float]:
    """``s -> 0`` limits of the coordinate components of ``u* g+ - h+``."""
    sl = m.slice(t)
    k = sl.kin
    lam = k.lam
    x3, y3 = sl.values["x3"], sl.values["y3"]
    v = k.v
    a_sharp = k.alpha_sharp
    aa = k.inner(a_sharp, a_sharp)
    av = float(k.alpha @ v)
    dlam = -lam * av
    P = m.ambient.schouten(k.y)
    bracket = (
        dlam**2
        - m.sign * 2 * lam * x3
        + 2 * lam * dlam * av
        + lam**2 * k.inner(k.nabla_alpha_sharp, v)
        - lam**2 * float(v @ P @ v)
    )
    return {
        "ss": (4 * lam * x3 + lam**4 * aa) / lam**2,
        "st": 3 * k.inner(v, y3) / lam**2,
        "tt": bracket / lam**2,
    }


def energy_density(m: ExpansionMap, s: float, t: float) -> float:
    """``1/2 |du|^2`` with respect to the domain metric."""
    jet = eval_map(m, s, t)
    if not jet.u[0] > 0:
        raise ChartExitError(f"map leaves the target chart at s = {s!r}, t = {t!r}")
    gp = m.ambient.gplus_at(jet.u[0], jet.u[1:])
    return 0.5 * s * s * (float(jet.us @ gp @ jet.us) + m.sign * float(jet.ut @ gp @ jet.ut))


def max_abs(d) -> float:
    if isinstance(d, dict):
        return max(float(np.max(np.abs(v))) for v in d.values())
    return float(np.max(np.abs(d)))
