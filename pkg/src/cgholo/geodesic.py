"""Conformal geodesics: first-order (gamma, alpha) system, reduced third-order
ODE, adaptive integration and Möbius reparametrisation.

Notation along a curve with velocity ``v``:

* ``N = <v, v>``, ``A = nabla_v v`` (covariant acceleration), ``J = nabla_v A``,
* ``B = <v, A>`` and ``B' = |A|^2 + <v, J>``.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .expr import Add, Div, Expr, Mul, eval_taylor4, number, parse, substitute
from .integrate import Solution, rk_step, solve_both_ways
from .jets import Taylor4
from .tensor import (
    ChartMetric,
    christoffel_derivative,
    christoffel_from_jet,
    inverse,
    schouten_at,
)

NULL_THRESHOLD = 1e-10
CAUSAL_DRIFT = 1e-6


class NullVelocityError(ValueError):
    def __init__(self, t: float, norm2: float):
        super().__init__(f"velocity is null at t = {t!r} (|v|^2 = {norm2:.3g})")
        self.t = t


class CausalFlipError(RuntimeError):
    pass


class NotConformalGeodesicError(ValueError):
    pass


class PoleError(ValueError):
    pass


def is_null(norm2: float, v: np.ndarray) -> bool:
    return abs(norm2) < NULL_THRESHOLD * max(1.0, float(v @ v))


def causal_character(norm2: float, v: np.ndarray) -> int:
    """+1 spacelike, -1 timelike, 0 null."""
    if is_null(norm2, v):
        return 0
    return 1 if norm2 > 0 else -1


# -- pointwise geometry --------------------------------------------------------


@dataclass(frozen=True)
class Geometry:
    """Metric data at one chart point needed by the conformal geodesic equations."""

    g: np.ndarray
    g_inv: np.ndarray
    dg: np.ndarray
    gamma: np.ndarray
    dgamma: np.ndarray
    P: np.ndarray


def geometry_at(chart: ChartMetric, y) -> Geometry:
    jet = chart.jet(y)
    g_inv = inverse(jet.g)
    return Geometry(
        jet.g,
        g_inv,
        jet.dg,
        christoffel_from_jet(g_inv, jet.dg),
        christoffel_derivative(g_inv, jet),
        schouten_at(chart, y),
    )


# -- curves --------------------------------------------------------------------


class Curve:
    """A parametrised curve providing exact derivatives up to order three."""

    chart: ChartMetric

    def jets(self, t: float) -> np.ndarray:
        """Array ``[gamma, gamma', gamma'', gamma''']`` of shape ``(4, n)``."""
        raise NotImplementedError

    def local(self, t: float) -> Curve:
        """A view that is smooth near ``t`` (used for finite differences in t)."""
        return self


@dataclass(frozen=True, eq=False)
class CurveSpec(Curve):
    """Curve given by closed-form components in the parameter ``t``."""

    components: tuple
    chart: ChartMetric
    variable: str = "t"
    causal_cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if len(self.components) != self.chart.n:
            raise ValueError(
                f"curve has {len(self.components)} components, chart dimension is {self.chart.n}"
            )

    @classmethod
    def from_strings(cls, components: Sequence[str], chart: ChartMetric, variable: str = "t") -> CurveSpec:
        return cls(tuple(parse(c, [variable]) for c in components), chart, variable)

    def taylor(self, t: float) -> list[Taylor4]:
        return [eval_taylor4(c, t, self.variable) for c in self.components]

    def jets(self, t: float) -> np.ndarray:
        return np.array([tj.derivatives()[:4] for tj in self.taylor(t)]).T

    def position(self, t: float) -> np.ndarray:
        return self.jets(t)[0]

    def causal(self, t: float) -> int:
        if t not in self.causal_cache:
            y, v = self.jets(t)[:2]
            g = self.chart.jet(y).g
            self.causal_cache[t] = causal_character(float(v @ g @ v), v)
        return self.causal_cache[t]

    def compose(self, f: Expr) -> CurveSpec:
        """Reparametrised curve ``t -> gamma(f(t))``."""
        mapping = {self.variable: f}
        return CurveSpec(tuple(substitute(c, mapping) for c in self.components), self.chart, self.variable)


@dataclass(frozen=True)
class Kinematics:
    """Covariant kinematics of a curve at one parameter value."""

    t: float
    y: np.ndarray
    v: np.ndarray
    geo: Geometry
    A: np.ndarray
    J: np.ndarray
    N: float
    B: float
    dB: float

    @property
    def causal(self) -> int:
        return causal_character(self.N, self.v)

    def lower(self, w: np.ndarray) -> np.ndarray:
        return self.geo.g @ w

    def inner(self, a: np.ndarray, b: np.ndarray) -> float:
        return float(a @ self.geo.g @ b)

    def _require_nonnull(self) -> None:
        if is_null(self.N, self.v):
            raise NullVelocityError(self.t, self.N)

    @property
    def alpha_sharp(self) -> np.ndarray:
        self._require_nonnull()
        N, B = self.N, self.B
        return self.A / N - 2.0 * B * self.v / N**2

    @property
    def alpha(self) -> np.ndarray:
        return self.lower(self.alpha_sharp)

    @property
    def nabla_alpha_sharp(self) -> np.ndarray:
        """Covariant derivative of the vector alpha^# along the curve."""
        self._require_nonnull()
        N, B, dB = self.N, self.B, self.dB
        return self.J / N - 4 * B * self.A / N**2 - 2 * dB * self.v / N**2 + 8 * B**2 * self.v / N**3

    @property
    def lam(self) -> float:
        return math.sqrt(abs(self.N))

    def residual(self) -> np.ndarray:
        """Third-order conformal geodesic residual."""
        self._require_nonnull()
        N, B, A, v = self.N, self.B, self.A, self.v
        P = self.geo.P
        Pv_sharp = self.geo.g_inv @ (P @ v)
        return (
            self.J
            - 3 * B * A / N
            + (1.5 * self.inner(A, A) / N) * v
            + 2 * float(v @ P @ v) * v
            - N * Pv_sharp
        )


def kinematics_from_jets(chart: ChartMetric, jets: np.ndarray, t: float = float("nan")) -> Kinematics:
    y, v, acc, jerk = jets[0], jets[1], jets[2], jets[3]
    geo = geometry_at(chart, y)
    G, dG = geo.gamma, geo.dgamma
    A = acc + np.einsum("ijk,j,k->i", G, v, v)
    dA = jerk + np.einsum("mijk,m,j,k->i", dG, v, v, v) + 2 * np.einsum("ijk,j,k->i", G, acc, v)
    J = dA + np.einsum("ijk,j,k->i", G, v, A)
    g = geo.g
    N = float(v @ g @ v)
    B = float(v @ g @ A)
    dB = float(A @ g @ A + v @ g @ J)
    return Kinematics(t, y, v, geo, A, J, N, B, dB)


def kinematics(curve: Curve, t: float) -> Kinematics:
    return kinematics_from_jets(curve.chart, curve.jets(t), t)


def alpha_from_curve(chart: ChartMetric, jets: np.ndarray, t: float = float("nan")) -> np.ndarray:
    """Covector alpha determined by a non-null curve from its 2-jet."""
    return kinematics_from_jets(chart, _pad(jets), t).alpha


def cg_residual_third_order(chart: ChartMetric, jets: np.ndarray, t: float = float("nan")) -> np.ndarray:
    return kinematics_from_jets(chart, jets, t).residual()


def _pad(jets: np.ndarray) -> np.ndarray:
    jets = np.asarray(jets, dtype=float)
    if jets.shape[0] >= 4:
        return jets[:4]
    return np.vstack([jets, np.zeros((4 - jets.shape[0], jets.shape[1]))])


# -- first-order system --------------------------------------------------------


@dataclass(frozen=True)
class CGState:
    t: float
    gamma: np.ndarray
    v: np.ndarray
    a: np.ndarray

    def vector(self) -> np.ndarray:
        return np.concatenate([self.gamma, self.v, self.a])

    @classmethod
    def from_vector(cls, t: float, z: np.ndarray) -> CGState:
        n = z.size // 3
        return cls(t, z[:n].copy(), z[n : 2 * n].copy(), z[2 * n :].copy())

    @classmethod
    def from_curve(cls, curve: Curve, t: float) -> CGState:
        k = kinematics(curve, t)
        return cls(t, k.y.copy(), k.v.copy(), k.alpha)


def _rhs_parts(geo: Geometry, v: np.ndarray, a: np.ndarray):
    a_sharp = geo.g_inv @ a
    av = float(a @ v)
    N = float(v @ geo.g @ v)
    aa = float(a @ a_sharp)
    dv = -np.einsum("ijk,j,k->i", geo.gamma, v, v) - 2 * av * v + N * a_sharp
    # covariant derivative of alpha along v, then back to coordinate derivative
    nabla_a = geo.P @ v + av * a - 0.5 * aa * (geo.g @ v)
    da = nabla_a + np.einsum("kij,j,k->i", geo.gamma, v, a)
    return dv, da, a_sharp, av, N


def cg_rhs_first_order(chart: ChartMetric, state: CGState) -> CGState:
    """Time derivative of ``(gamma, v, a)``; well defined for null ``v``."""
    geo = geometry_at(chart, state.gamma)
    dv, da, *_ = _rhs_parts(geo, state.v, state.a)
    return CGState(state.t, state.v.copy(), dv, da)


def _rhs_vector(chart: ChartMetric):
    def f(t: float, z: np.ndarray) -> np.ndarray:
        n = z.size // 3
        geo = geometry_at(chart, z[:n])
        dv, da, *_ = _rhs_parts(geo, z[n : 2 * n], z[2 * n :])
        return np.concatenate([z[n : 2 * n], dv, da])

    return f


def state_jets(chart: ChartMetric, z: np.ndarray) -> np.ndarray:
    """Exact ``[gamma, gamma', gamma'', gamma''']`` of the trajectory through ``z``."""
    n = z.size // 3
    y, v, a = z[:n], z[n : 2 * n], z[2 * n :]
    geo = geometry_at(chart, y)
    dv, da, a_sharp, av, N = _rhs_parts(geo, v, a)
    dg_v = np.einsum("kij,k->ij", geo.dg, v)
    dN = float(v @ dg_v @ v + 2 * v @ geo.g @ dv)
    da_sharp = -geo.g_inv @ dg_v @ a_sharp + geo.g_inv @ da
    dav = float(da @ v + a @ dv)
    ddv = (
        -np.einsum("mijk,m,j,k->i", geo.dgamma, v, v, v)
        - 2 * np.einsum("ijk,j,k->i", geo.gamma, dv, v)
        - 2 * dav * v
        - 2 * av * dv
        + dN * a_sharp
        + N * da_sharp
    )
    return np.array([y, v, dv, ddv])


@dataclass
class Trajectory:
    chart: ChartMetric
    solution: Solution
    causal: int

    def state(self, t: float) -> CGState:
        return CGState.from_vector(t, self.solution(t))

    def sample(self, times: Iterable[float]) -> list[CGState]:
        return [self.state(float(t)) for t in times]

    def curve(self, substeps: int = 4) -> TrajectoryCurve:
        return TrajectoryCurve(self, substeps)

    def to_csv(self, path, times: Iterable[float]) -> None:
        n = self.chart.n
        curve = self.curve()
        header = ["t"] + [f"gamma{i + 1}" for i in range(n)] + [f"v{i + 1}" for i in range(n)]
        header += [f"a{i + 1}" for i in range(n)] + ["residual_norm"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for t in times:
                st = self.state(float(t))
                if self.causal != 0:
                    res = float(np.linalg.norm(kinematics(curve, float(t)).residual()))
                else:
                    res = float("nan")
                w.writerow([repr(float(t))] + [repr(float(x)) for x in st.vector()] + [repr(res)])


class TrajectoryCurve(Curve):
    """Curve view of an integrated trajectory.

    States away from the stored nodes are obtained by a fixed number of
    Runge–Kutta substeps from a node chosen by an anchor time, which keeps the
    map ``t -> state`` smooth for finite differencing near the anchor.
    """

    def __init__(self, traj: Trajectory, substeps: int = 4, anchor: float | None = None):
        self.traj = traj
        self.chart = traj.chart
        self.substeps = substeps
        self.anchor = anchor
        self._f = _rhs_vector(traj.chart)

    def local(self, t: float) -> TrajectoryCurve:
        return TrajectoryCurve(self.traj, self.substeps, anchor=t)

    def state_vector(self, t: float) -> np.ndarray:
        sol = self.traj.solution
        ref = t if self.anchor is None else self.anchor
        i = int(np.argmin(np.abs(sol.node_t - ref)))
        t0, z = float(sol.node_t[i]), sol.node_y[i].copy()
        h = (t - t0) / self.substeps
        if h == 0.0:
            return z
        for j in range(self.substeps):
            z = rk_step(self._f, t0 + j * h, z, h)
        return z

    def jets(self, t: float) -> np.ndarray:
        return state_jets(self.chart, self.state_vector(t))


def integrate_cg(
    chart: ChartMetric,
    s0: CGState,
    t_span: tuple[float, float],
    tol: float = 1e-10,
    atol: float | None = None,
) -> Trajectory:
    """Adaptive integration of the first-order system in both directions from ``s0.t``."""
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    g0 = chart.jet(s0.gamma).g
    N0 = float(s0.v @ g0 @ s0.v)
    sigma = causal_character(N0, s0.v)
    f = _rhs_vector(chart)

    def monitor(t: float, z: np.ndarray) -> None:
        n = z.size // 3
        v = z[n : 2 * n]
        N = float(v @ chart.jet(z[:n]).g @ v)
        if sigma == 0:
            drift = abs(N) > CAUSAL_DRIFT * max(1.0, float(v @ v))
        else:
            drift = sigma * N < -CAUSAL_DRIFT
        if drift:
            raise CausalFlipError(f"causal character of the velocity changed near t = {t!r}")

    sol = solve_both_ways(
        f, s0.t, s0.vector(), t_span, rtol=tol, atol=tol if atol is None else atol, on_step=monitor
    )
    return Trajectory(chart, sol, sigma)


def integrate_third_order(
    chart: ChartMetric,
    t0: float,
    jets0: np.ndarray,
    t_span: tuple[float, float],
    tol: float = 1e-10,
) -> Solution:
    """Integrate the reduced ODE for the state ``(gamma, gamma', gamma'')``.

    The residual is affine in ``gamma'''`` with unit coefficient, so the ODE
    is ``gamma''' = -residual(gamma, gamma', gamma'', 0)``.
    """
    n = chart.n

    def f(t: float, z: np.ndarray) -> np.ndarray:
        jets = np.vstack([z.reshape(3, n), np.zeros((1, n))])
        res = kinematics_from_jets(chart, jets, t).residual()
        return np.concatenate([z[n:], -res])

    z0 = np.asarray(jets0, dtype=float)[:3].ravel()
    return solve_both_ways(f, t0, z0, t_span, rtol=tol, atol=tol)


# -- Möbius reparametrisation -------------------------------------------------


@dataclass(frozen=True)
class Mobius:
    """Projective class of ``[[a, b], [c, d]]`` normalised to ``|ad - bc| = 1``."""

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        det = self.a * self.d - self.b * self.c
        if det == 0:
            raise ValueError("Möbius matrix must be invertible")
        k = 1.0 / math.sqrt(abs(det))
        for name in "abcd":
            object.__setattr__(self, name, getattr(self, name) * k)

    @property
    def det(self) -> float:
        return self.a * self.d - self.b * self.c

    def pole(self) -> float | None:
        return None if self.c == 0 else -self.d / self.c

    def expr(self, variable: str = "t") -> Expr:
        t = parse(variable, [variable])
        return Div(Add(Mul(number(self.a), t), number(self.b)), Add(Mul(number(self.c), t), number(self.d)))


def mobius_apply(f: Mobius, t: float) -> float:
    den = f.c * t + f.d
    if den == 0 or abs(den) < 1e-300:
        raise PoleError(f"pole of the Möbius map at t = {t!r}")
    return (f.a * t + f.b) / den


def schwarzian(f: Expr, t: float, variable: str = "t") -> float:
    """``f'''/f' - 3/2 (f''/f')^2`` from a Taylor jet."""
    d = eval_taylor4(f, t, variable).derivatives()
    if d[1] == 0:
        raise ValueError(f"critical point of the reparametrisation at t = {t!r}")
    return d[3] / d[1] - 1.5 * (d[2] / d[1]) ** 2


def schwarzian_is_zero(f: Mobius, points: Sequence[float] = (-2.0, -1.0, 0.0, 1.0, 2.0), tol: float = 1e-8) -> bool:
    pts = [p for p in points if f.pole() is None or abs(p - f.pole()) > 1e-3]
    return all(abs(schwarzian(f.expr(), p)) < tol for p in pts)


@dataclass(frozen=True)
class ReparamReport:
    input_max_residual: float
    output_max_residual: float
    samples: tuple[float, ...]

    def is_cg(self, tol: float = 1e-6) -> bool:
        return self.output_max_residual < tol


def reparametrization_check(
    curve: CurveSpec,
    f: Mobius | Expr,
    domain: tuple[float, float],
    samples: int = 9,
    input_tol: float = 1e-8,
) -> ReparamReport:
    """Residuals of ``gamma`` at ``f(tau)`` and of ``gamma o f`` at ``tau``."""
    fexpr = f.expr(curve.variable) if isinstance(f, Mobius) else f
    taus = np.linspace(domain[0], domain[1], samples)
    if isinstance(f, Mobius) and f.pole() is not None:
        p = f.pole()
        if domain[0] - 1e-12 <= p <= domain[1] + 1e-12:
            raise PoleError(f"Möbius pole t = {p!r} lies inside the domain")
    mapped = [float(eval_taylor4(fexpr, float(tau), curve.variable).value) for tau in taus]
    res_in = max(float(np.linalg.norm(kinematics(curve, s).residual())) for s in mapped)
    if res_in >= input_tol:
        raise NotConformalGeodesicError(
            f"input curve is not a conformal geodesic (residual {res_in:.3g})"
        )
    composed = curve.compose(fexpr)
    res_out = max(float(np.linalg.norm(kinematics(composed, float(tau)).residual())) for tau in taus)
    return ReparamReport(res_in, res_out, tuple(float(x) for x in taus))


def lambda_identity_errors(curve: Curve, t: float, h: float = 2e-3) -> tuple[float, float]:
    """Errors of the first and second lambda identities at ``t``.

    Derivatives of ``lambda = sqrt(| |v|^2 |)`` use a 5-point stencil on a
    view of the curve that is smooth near ``t``.
    """
    view = curve.local(t)
    lam = [kinematics(view, t + k * h).lam for k in (-2, -1, 0, 1, 2)]
    d1 = (lam[0] - 8 * lam[1] + 8 * lam[3] - lam[4]) / (12 * h)
    d2 = (-lam[0] + 16 * lam[1] - 30 * lam[2] + 16 * lam[3] - lam[4]) / (12 * h * h)
    k = kinematics(view, t)
    eps = 1.0 if k.N > 0 else -1.0
    a_v = float(k.alpha @ k.v)
    nabla_a_v = k.inner(k.nabla_alpha_sharp, k.v)
    aa = k.inner(k.alpha_sharp, k.alpha_sharp)
    lam0 = k.lam
    e1 = d1 + lam0 * a_v
    e2 = d2 - (3 * lam0 * a_v**2 - lam0 * nabla_a_v - eps * lam0**3 * aa)
    return float(e1), float(e2)


def warn_if_not_cg(curve: Curve, times: Iterable[float], tol: float = 1e-8) -> float:
    worst = max(float(np.linalg.norm(kinematics(curve, t).residual())) for t in times)
    if worst > tol:
        warnings.warn(f"curve is not a conformal geodesic (max residual {worst:.3g})", stacklevel=2)
    return worst
