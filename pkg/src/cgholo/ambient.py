"""Normal-form targets ``g+ = (dx^2 + g_x) / x^2`` over a boundary chart.

Ambient coordinates are ordered ``(x, y1, ..., yn)``; index 0 is ``x``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .tensor import (
    ChartMetric,
    MetricError,
    MetricJet,
    christoffel_from_jet,
    curvature_at,
    curvature_from_jet,
    inverse,
    riemann_only,
    schouten_override_jet,
)

FD_STEP_P = 1e-5


class Mode(enum.Enum):
    HYPERBOLIC = "ExactHyperbolicUpperHalf"
    BALL = "ExactBall"
    ADS = "ExactAdS"
    TRUNCATED2 = "Truncated2"

    @classmethod
    def parse(cls, text: str) -> Mode:
        for m in cls:
            if text.strip().lower() in (m.value.lower(), m.name.lower()):
                return m
        raise ValueError(f"unknown ambient mode {text!r}; choose from {[m.value for m in cls]}")


class AmbientError(ValueError):
    pass


def _conformal_factor(mode: Mode, x: float) -> tuple[float, float, float]:
    """``f, f', f''`` with ``g_x = f(x) g``."""
    if mode is Mode.BALL:
        q = 1.0 - x * x / 4.0
        return q * q, -x * q, -1.0 + 0.75 * x * x
    return 1.0, 0.0, 0.0


@dataclass(frozen=True, eq=False)
class AmbientMetric:
    boundary: ChartMetric
    mode: Mode
    validate: bool = True
    _checked: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if isinstance(self.mode, str):
            object.__setattr__(self, "mode", Mode.parse(self.mode))
        if self.validate:
            self._validate()

    @property
    def n(self) -> int:
        return self.boundary.n

    @property
    def dim(self) -> int:
        return self.boundary.n + 1

    def _validate(self) -> None:
        b = self.boundary
        pts = b.sample_points(4, np.random.default_rng(7))
        if self.mode in (Mode.HYPERBOLIC, Mode.ADS):
            expected_q = 0 if self.mode is Mode.HYPERBOLIC else 1
            if b.signature[1] != expected_q:
                raise AmbientError(
                    f"{self.mode.value} needs a boundary of signature ({b.n - expected_q},{expected_q})"
                )
            for y in pts:
                riem = riemann_only(b, y).riemann
                if np.max(np.abs(riem)) > 1e-8:
                    raise AmbientError(f"{self.mode.value} requires a flat boundary metric")
        elif self.mode is Mode.BALL:
            if b.signature[1] != 0:
                raise AmbientError("ExactBall requires a Riemannian boundary")
            for y in pts:
                cp = riemann_only(b, y)
                lowered = np.einsum("im,mjkl->ijkl", cp.g, cp.riemann)
                model = np.einsum("ik,jl->ijkl", cp.g, cp.g) - np.einsum("il,jk->ijkl", cp.g, cp.g)
                if np.max(np.abs(lowered - model)) > 1e-8 * max(1.0, np.max(np.abs(model))):
                    raise AmbientError("ExactBall requires the unit round sphere metric")
        elif self.mode is Mode.TRUNCATED2 and b.n == 2 and b.schouten_exprs is None:
            raise AmbientError("Truncated2 over a 2-dimensional boundary requires a Schouten override")

    # -- boundary data -------------------------------------------------------

    def schouten(self, y) -> np.ndarray:
        """Boundary Schouten tensor used by this mode."""
        y = np.asarray(y, dtype=float)
        if self.boundary.schouten_exprs is not None:
            return schouten_override_jet(self.boundary, y)[0]
        if self.mode in (Mode.HYPERBOLIC, Mode.ADS):
            return np.zeros((self.n, self.n))
        if self.mode is Mode.BALL:
            return 0.5 * self.boundary.jet(y).g
        return curvature_at(self.boundary, y).schouten

    def _schouten_grad(self, y: np.ndarray) -> np.ndarray:
        """``dP[k, i, j]``: exact for overrides, central differences otherwise."""
        if self.boundary.schouten_exprs is not None:
            return schouten_override_jet(self.boundary, y)[1]
        n = self.n
        dP = np.empty((n, n, n))
        for k in range(n):
            e = np.zeros(n)
            e[k] = FD_STEP_P
            dP[k] = (self.schouten(y + e) - self.schouten(y - e)) / (2 * FD_STEP_P)
        return dP

    def gx(self, x: float, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        g = self.boundary.jet(y).g
        if self.mode is Mode.TRUNCATED2:
            return g - x * x * self.schouten(y)
        return _conformal_factor(self.mode, x)[0] * g

    # -- g+ and its derivatives ---------------------------------------------

    def _check_x(self, x: float) -> None:
        if not x > 0:
            raise AmbientError(f"ambient point must have x > 0 (got x = {x!r})")

    def gplus_at(self, x: float, y) -> np.ndarray:
        self._check_x(x)
        n = self.n
        G = np.zeros((n + 1, n + 1))
        G[0, 0] = 1.0 / x**2
        G[1:, 1:] = self.gx(x, y) / x**2
        return G

    def metric_jet(self, x: float, y, second: bool = False) -> MetricJet:
        """Jet of ``g+`` in the ambient coordinates; second derivatives on request."""
        self._check_x(x)
        y = np.asarray(y, dtype=float)
        n = self.n
        bj = self.boundary.jet(y)
        g, dg, ddg = bj.g, bj.dg, bj.ddg
        G = np.zeros((n + 1, n + 1))
        dG = np.zeros((n + 1, n + 1, n + 1))
        ddG = np.zeros((n + 1, n + 1, n + 1, n + 1)) if second else None
        G[0, 0] = x**-2
        dG[0, 0, 0] = -2 * x**-3
        if second:
            ddG[0, 0, 0, 0] = 6 * x**-4
        if self.mode is Mode.TRUNCATED2:
            P = self.schouten(y)
            dP = self._schouten_grad(y)
            G[1:, 1:] = g / x**2 - P
            dG[0, 1:, 1:] = -2 * g / x**3
            dG[1:, 1:, 1:] = dg / x**2 - dP
            if second:
                if self.boundary.schouten_exprs is None:
                    raise AmbientError("second derivatives of a computed Schouten tensor are not available")
                ddP = _override_hessian(self.boundary, y)
                ddG[0, 0, 1:, 1:] = 6 * g / x**4
                ddG[0, 1:, 1:, 1:] = -2 * dg / x**3
                ddG[1:, 0, 1:, 1:] = -2 * dg / x**3
                ddG[1:, 1:, 1:, 1:] = ddg / x**2 - ddP
        else:
            f, df, ddf = _conformal_factor(self.mode, x)
            phi = f / x**2
            dphi = df / x**2 - 2 * f / x**3
            ddphi = ddf / x**2 - 4 * df / x**3 + 6 * f / x**4
            G[1:, 1:] = phi * g
            dG[0, 1:, 1:] = dphi * g
            dG[1:, 1:, 1:] = phi * dg
            if second:
                ddG[0, 0, 1:, 1:] = ddphi * g
                ddG[0, 1:, 1:, 1:] = dphi * dg
                ddG[1:, 0, 1:, 1:] = dphi * dg
                ddG[1:, 1:, 1:, 1:] = phi * ddg
        return MetricJet(G, dG, ddG)

    def christoffel_gplus(self, x: float, y) -> np.ndarray:
        """Exact ``Gamma^I_{JK}`` of ``g+`` at ``(x, y)``."""
        jet = self.metric_jet(x, y)
        return christoffel_from_jet(inverse(jet.g), jet.dg)

    def gplus_and_christoffel(self, x: float, y) -> tuple[np.ndarray, np.ndarray]:
        jet = self.metric_jet(x, y)
        return jet.g, christoffel_from_jet(inverse(jet.g), jet.dg)

    def leading_christoffel(self, x: float, y) -> np.ndarray:
        """Leading-order asymptotic Christoffel symbols of a normal-form metric."""
        y = np.asarray(y, dtype=float)
        n = self.n
        bj = self.boundary.jet(y)
        g_inv = inverse(bj.g)
        P_mixed = g_inv @ self.schouten(y)
        out = np.zeros((n + 1, n + 1, n + 1))
        out[0, 0, 0] = -1.0 / x
        out[0, 1:, 1:] = bj.g / x
        block = -np.eye(n) / x - x * P_mixed
        out[1:, 0, 1:] = block
        out[1:, 1:, 0] = block
        out[1:, 1:, 1:] = christoffel_from_jet(g_inv, bj.dg)
        return out

    def riemann_gplus(self, x: float, y) -> np.ndarray:
        """Exact ``R^I_{JKL}`` of ``g+`` (exact modes and overrides only)."""
        return curvature_from_jet(self.metric_jet(x, y, second=True)).riemann

    def sectional_curvature(self, x: float, y, X, Y) -> float:
        jet = self.metric_jet(x, y, second=True)
        cp = curvature_from_jet(jet)
        R = np.einsum("im,mjkl->ijkl", jet.g, cp.riemann)
        X, Y = np.asarray(X, float), np.asarray(Y, float)
        num = np.einsum("ijkl,i,j,k,l->", R, X, Y, X, Y)
        den = (X @ jet.g @ X) * (Y @ jet.g @ Y) - (X @ jet.g @ Y) ** 2
        return float(num / den)

    def einstein_residual(self, x: float, y, rel_step: float = 1e-4) -> float:
        """``max |(g+^{-1} Ric(g+))^I_J + n delta^I_J|`` by nested central differences."""
        self._check_x(x)
        h = rel_step * x
        if h < 1e-12:
            raise AmbientError("finite-difference step underflow in einstein_residual")
        p0 = np.concatenate([[x], np.asarray(y, dtype=float)])
        dim = self.dim

        def metric(p):
            return self.gplus_at(p[0], p[1:])

        def gamma(p):
            dG = np.empty((dim, dim, dim))
            for k in range(dim):
                e = np.zeros(dim)
                e[k] = h
                dG[k] = (metric(p + e) - metric(p - e)) / (2 * h)
            return christoffel_from_jet(inverse(metric(p)), dG)

        G0 = gamma(p0)
        dGam = np.empty((dim, dim, dim, dim))
        for m in range(dim):
            e = np.zeros(dim)
            e[m] = h
            dGam[m] = (gamma(p0 + e) - gamma(p0 - e)) / (2 * h)
        term = np.einsum("kilj->ijkl", dGam)
        quad = np.einsum("ikm,mlj->ijkl", G0, G0)
        riem = term - np.transpose(term, (0, 1, 3, 2)) + quad - np.transpose(quad, (0, 1, 3, 2))
        ric = np.einsum("ijil->jl", riem)
        mixed = inverse(metric(p0)) @ ric
        return float(np.max(np.abs(mixed + self.n * np.eye(dim))))


def _override_hessian(chart: ChartMetric, y: np.ndarray) -> np.ndarray:
    from .expr import eval_jet2

    n = chart.n
    out = np.empty((n, n, n, n))
    for i in range(n):
        for j in range(i, n):
            jet = eval_jet2(chart.schouten_exprs[i][j], y, chart.variables)
            out[:, :, i, j] = out[:, :, j, i] = jet.hess
    return out


def make_ambient(boundary: ChartMetric, mode: str | Mode, validate: bool = True) -> AmbientMetric:
    if not isinstance(mode, Mode):
        mode = Mode.parse(mode)
    if boundary.n < 2:
        raise MetricError("boundary dimension must be at least 2")
    return AmbientMetric(boundary, mode, validate)
