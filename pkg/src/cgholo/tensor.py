"""Pointwise curvature of chart metrics, valid for indefinite signatures.

Index conventions: ``gamma[i, j, k] = Gamma^i_{jk}``,
``riemann[i, j, k, l] = R^i_{jkl}`` with
``R^i_{jkl} = d_k Gamma^i_{lj} - d_l Gamma^i_{kj} + Gamma^i_{km} Gamma^m_{lj} - Gamma^i_{lm} Gamma^m_{kj}``,
``ricci[j, l] = R^i_{jil}``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .expr import Expr, eval_jet2, evaluate, parse


class MetricError(ValueError):
    pass


class SingularMetricError(MetricError):
    pass


class SignatureError(MetricError):
    pass


class UnsupportedSchoutenError(MetricError):
    pass


class SchoutenValidationError(MetricError):
    pass


SINGULAR_COND = 1e12


@dataclass(frozen=True)
class MetricJet:
    """Metric with first and (optionally) second partial derivatives at a point.

    ``dg[k, i, j] = d_k g_ij`` and ``ddg[k, l, i, j] = d_k d_l g_ij``.
    """

    g: np.ndarray
    dg: np.ndarray
    ddg: np.ndarray | None = None


@dataclass(frozen=True)
class CurvaturePoint:
    y: np.ndarray
    g: np.ndarray
    g_inv: np.ndarray
    gamma: np.ndarray
    riemann: np.ndarray
    ricci: np.ndarray
    scalar: float
    schouten: np.ndarray


def inverse(g: np.ndarray) -> np.ndarray:
    """Inverse by LU with partial pivoting; rejects near-singular matrices."""
    cond = np.linalg.cond(g)
    if not np.isfinite(cond) or cond > SINGULAR_COND:
        raise SingularMetricError(f"singular metric (condition number {cond:.3g})")
    return np.linalg.solve(g, np.eye(g.shape[0]))


def christoffel_from_jet(g_inv: np.ndarray, dg: np.ndarray) -> np.ndarray:
    # lowered[l, j, k] = 1/2 (d_j g_lk + d_k g_lj - d_l g_jk)
    lowered = 0.5 * (
        np.transpose(dg, (1, 0, 2)) + np.transpose(dg, (1, 2, 0)) - dg
    )
    return np.einsum("il,ljk->ijk", g_inv, lowered)


def christoffel_derivative(g_inv: np.ndarray, jet: MetricJet) -> np.ndarray:
    """``dgamma[m, i, j, k] = d_m Gamma^i_{jk}`` from a second-order metric jet."""
    dg, ddg = jet.dg, jet.ddg
    lowered = 0.5 * (np.transpose(dg, (1, 0, 2)) + np.transpose(dg, (1, 2, 0)) - dg)
    # d_m lowered[l, j, k] = 1/2 (d_m d_j g_lk + d_m d_k g_lj - d_m d_l g_jk)
    dlowered = 0.5 * (
        np.einsum("mjlk->mljk", ddg) + np.einsum("mklj->mljk", ddg) - np.einsum("mljk->mljk", ddg)
    )
    dg_inv = -np.einsum("ia,mab,bl->mil", g_inv, dg, g_inv)
    return np.einsum("mil,ljk->mijk", dg_inv, lowered) + np.einsum("il,mljk->mijk", g_inv, dlowered)


def riemann_from(gamma: np.ndarray, dgamma: np.ndarray) -> np.ndarray:
    term = np.einsum("kilj->ijkl", dgamma)  # d_k Gamma^i_{lj}
    quad = np.einsum("ikm,mlj->ijkl", gamma, gamma)
    return term - np.transpose(term, (0, 1, 3, 2)) + quad - np.transpose(quad, (0, 1, 3, 2))


def schouten_from(ricci: np.ndarray, scalar: float, g: np.ndarray) -> np.ndarray:
    n = g.shape[0]
    return (ricci - scalar * g / (2.0 * (n - 1))) / (n - 2)


def curvature_from_jet(jet: MetricJet, y=None) -> CurvaturePoint:
    """Curvature stack from a second-order metric jet (Schouten is NaN when n = 2)."""
    g = jet.g
    n = g.shape[0]
    g_inv = inverse(g)
    gamma = christoffel_from_jet(g_inv, jet.dg)
    dgamma = christoffel_derivative(g_inv, jet)
    riem = riemann_from(gamma, dgamma)
    ricci = np.einsum("ijil->jl", riem)
    ricci = 0.5 * (ricci + ricci.T)
    scalar = float(np.einsum("jl,jl->", g_inv, ricci))
    P = schouten_from(ricci, scalar, g) if n >= 3 else np.full((n, n), np.nan)
    return CurvaturePoint(
        y=np.asarray(y if y is not None else np.zeros(n), dtype=float),
        g=g,
        g_inv=g_inv,
        gamma=gamma,
        riemann=riem,
        ricci=ricci,
        scalar=scalar,
        schouten=P,
    )


@dataclass(frozen=True, eq=False)
class ChartMetric:
    """Symmetric matrix of expressions ``g_ij(y)`` on one coordinate chart.

    Only the upper triangle of ``components`` is read.  ``signature`` is
    ``(p, q)``: ``p`` positive and ``q`` negative eigenvalues.  ``box`` is a
    coordinate box used for sampling validation points.
    """

    components: tuple
    variables: tuple[str, ...]
    signature: tuple[int, int]
    name: str = "custom"
    schouten_exprs: tuple | None = None
    box: tuple[tuple[float, float], ...] | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        n = len(self.variables)
        if n < 2:
            raise MetricError("dimension must be at least 2")
        if len(self.components) != n or any(len(r) != n for r in self.components):
            raise MetricError("component matrix must be n x n")
        if sum(self.signature) != n:
            raise MetricError("signature must satisfy p + q = n")
        if self.box is None:
            object.__setattr__(self, "box", tuple((0.2, 0.8) for _ in range(n)))
        object.__setattr__(self, "_jet_cached", lru_cache(maxsize=4096)(self._jet_uncached))

    @classmethod
    def from_strings(
        cls,
        rows: Sequence[Sequence[str]],
        variables: Sequence[str] | None = None,
        signature: tuple[int, int] | None = None,
        **kwargs,
    ) -> ChartMetric:
        n = len(rows)
        variables = tuple(variables or [f"y{i + 1}" for i in range(n)])
        comps = [[None] * n for _ in range(n)]
        for i in range(n):
            for j in range(i, n):
                e = parse(str(rows[i][j]), variables)
                comps[i][j] = comps[j][i] = e
        signature = signature or (n, 0)
        return cls(tuple(tuple(r) for r in comps), variables, tuple(signature), **kwargs)

    @property
    def n(self) -> int:
        return len(self.variables)

    def upper(self, i: int, j: int) -> Expr:
        return self.components[min(i, j)][max(i, j)]

    def values(self, y) -> np.ndarray:
        """Metric components (vectorised over trailing array shape of ``y``)."""
        env = {v: y[k] for k, v in enumerate(self.variables)}
        n = self.n
        rows = [[None] * n for _ in range(n)]
        for i in range(n):
            for j in range(i, n):
                rows[i][j] = rows[j][i] = np.broadcast_to(evaluate(self.upper(i, j), env), np.shape(y[0]))
        return np.array(rows, dtype=float)

    def _jet_uncached(self, y: tuple) -> MetricJet:
        n = self.n
        g = np.empty((n, n))
        dg = np.empty((n, n, n))
        ddg = np.empty((n, n, n, n))
        for i in range(n):
            for j in range(i, n):
                jet = eval_jet2(self.upper(i, j), y, self.variables)
                g[i, j] = g[j, i] = jet.value
                dg[:, i, j] = dg[:, j, i] = jet.grad
                ddg[:, :, i, j] = ddg[:, :, j, i] = jet.hess
        return MetricJet(g, dg, ddg)

    def jet(self, y) -> MetricJet:
        return self._jet_cached(tuple(float(v) for v in y))

    def check_signature(self, g: np.ndarray) -> None:
        eig = np.linalg.eigvalsh(g)
        p = int(np.sum(eig > 0))
        q = int(np.sum(eig < 0))
        if (p, q) != tuple(self.signature):
            raise SignatureError(f"metric signature ({p},{q}) differs from declared {self.signature}")

    def sample_points(self, count: int, rng: np.random.Generator) -> np.ndarray:
        lo = np.array([b[0] for b in self.box])
        hi = np.array([b[1] for b in self.box])
        return lo + (hi - lo) * rng.random((count, self.n))


def metric_at(m: ChartMetric, y) -> tuple[np.ndarray, np.ndarray]:
    g = m.jet(y).g
    g_inv = inverse(g)
    m.check_signature(g)
    return g, g_inv


def christoffel(m: ChartMetric, y) -> np.ndarray:
    jet = m.jet(y)
    return christoffel_from_jet(inverse(jet.g), jet.dg)


def christoffel_and_derivative(m: ChartMetric, y) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """``(g, g_inv, Gamma, dGamma)`` at ``y``."""
    jet = m.jet(y)
    g_inv = inverse(jet.g)
    return jet.g, g_inv, christoffel_from_jet(g_inv, jet.dg), christoffel_derivative(g_inv, jet)


def schouten_at(m: ChartMetric, y) -> np.ndarray:
    """Schouten tensor ``P_ij`` (user-supplied when n = 2)."""
    if m.schouten_exprs is not None:
        return _override_values(m, y)
    if m.n == 2:
        raise UnsupportedSchoutenError(
            "Schouten tensor is undefined in dimension 2; supply it with schouten_override"
        )
    return curvature_at(m, y).schouten


def curvature_at(m: ChartMetric, y) -> CurvaturePoint:
    y = np.asarray(y, dtype=float)
    jet = m.jet(y)
    m.check_signature(jet.g)
    cp = curvature_from_jet(jet, y)
    if m.schouten_exprs is not None:
        cp = CurvaturePoint(**{**cp.__dict__, "schouten": _override_values(m, y)})
    elif m.n == 2:
        raise UnsupportedSchoutenError(
            "Schouten tensor is undefined in dimension 2; supply it with schouten_override"
        )
    return cp


def riemann_only(m: ChartMetric, y) -> CurvaturePoint:
    """Curvature without the Schouten requirement (NaN Schouten when n = 2)."""
    y = np.asarray(y, dtype=float)
    return curvature_from_jet(m.jet(y), y)


def _override_values(m: ChartMetric, y) -> np.ndarray:
    n = m.n
    P = np.empty((n, n))
    env = {v: float(y[k]) for k, v in enumerate(m.variables)}
    for i in range(n):
        for j in range(i, n):
            P[i, j] = P[j, i] = evaluate(m.schouten_exprs[min(i, j)][max(i, j)], env)
    return P


def schouten_override_jet(m: ChartMetric, y):
    """Value and gradient of the override: ``(P[i, j], dP[k, i, j])``."""
    n = m.n
    P = np.empty((n, n))
    dP = np.empty((n, n, n))
    for i in range(n):
        for j in range(i, n):
            jet = eval_jet2(m.schouten_exprs[i][j], y, m.variables)
            P[i, j] = P[j, i] = jet.value
            dP[:, i, j] = dP[:, j, i] = jet.grad
    return P, dP


def schouten_override(
    m: ChartMetric,
    P: Sequence[Sequence[str | Expr]],
    sample_points: np.ndarray | None = None,
    fd_step: float = 1e-5,
) -> ChartMetric:
    """Attach a user Schouten tensor to a 2-dimensional chart and validate it.

    Checks ``tr_g P = R/2`` (to 1e-8) and ``div P = d(tr P)`` (finite
    differences, to 1e-6) at the sample points.
    """
    if m.n != 2:
        raise MetricError("schouten_override is only meaningful for n = 2")
    n = m.n
    exprs = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            e = P[i][j]
            e = parse(e, m.variables) if isinstance(e, str) else e
            exprs[i][j] = exprs[j][i] = e
    out = ChartMetric(
        m.components, m.variables, m.signature, m.name, tuple(tuple(r) for r in exprs), m.box
    )
    if sample_points is None:
        sample_points = m.sample_points(5, np.random.default_rng(0))
    for y in np.atleast_2d(sample_points):
        _validate_override(out, y, fd_step)
    return out


def _validate_override(m: ChartMetric, y: np.ndarray, h: float) -> None:
    cp = riemann_only(m, y)
    P = _override_values(m, y)
    trace = float(np.einsum("ij,ij->", cp.g_inv, P))
    target = cp.scalar / 2.0
    if abs(trace - target) > 1e-8 * max(1.0, abs(target)):
        raise SchoutenValidationError(
            f"trace identity violated at {y.tolist()}: tr P = {trace:.6g}, R/2 = {target:.6g}"
        )
    # div P: nabla^j P_ij = g^{jk} (d_k P_ij - Gamma^l_{ki} P_lj - Gamma^l_{kj} P_il)
    n = m.n
    dP = np.empty((n, n, n))
    dtr = np.empty(n)
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        Pp, Pm = _override_values(m, y + e), _override_values(m, y - e)
        dP[k] = (Pp - Pm) / (2 * h)
        trp = np.einsum("ij,ij->", riemann_only(m, y + e).g_inv, Pp)
        trm = np.einsum("ij,ij->", riemann_only(m, y - e).g_inv, Pm)
        dtr[k] = (trp - trm) / (2 * h)
    G = cp.gamma
    cov = dP - np.einsum("lki,lj->kij", G, P) - np.einsum("lkj,il->kij", G, P)
    div = np.einsum("jk,kij->i", cp.g_inv, cov)
    if np.max(np.abs(div - dtr)) > 1e-6 * max(1.0, float(np.max(np.abs(P)))):
        raise SchoutenValidationError(f"divergence identity violated at {y.tolist()}")
