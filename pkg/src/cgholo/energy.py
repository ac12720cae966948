"""Renormalised energy of expansion maps from the hyperbolic plane on a window.

``E(eps) = int_{t0}^{t1} int_eps^{s_max} e(u) s^-2 ds dt`` is evaluated by
tensor-product Gauss–Legendre quadrature and fitted as
``c1/eps + e_ren + c eps``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .hmap import ExpansionMap, MapError, Variation, energy_density, smooth_cutoff

REL_AGREEMENT = 1e-9


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class Window:
    t0: float
    t1: float
    s_max: float

    def __post_init__(self):
        if not self.t1 > self.t0 or not self.s_max > 0:
            raise ValueError("window needs t1 > t0 and s_max > 0")


@dataclass(frozen=True)
class Quadrature:
    """Nodes and weights on geometric s-panels and uniform t-panels."""

    s_nodes: np.ndarray
    s_weights: np.ndarray
    s_panel: np.ndarray  # lower panel edge of each s node
    t_nodes: np.ndarray
    t_weights: np.ndarray
    order: int


def _gauss(a: float, b: float, q: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(q)
    return 0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w


def build_quadrature(window: Window, eps_ladder: Sequence[float], order: int) -> Quadrature:
    eps = sorted(float(e) for e in eps_ladder)
    if eps[-1] >= window.s_max or eps[0] <= 0:
        raise ValueError("epsilons must lie in (0, s_max)")
    edges = set(eps)
    e = eps[-1]
    while e * 2 < window.s_max:
        e *= 2
        edges.add(e)
    edges = sorted(edges) + [window.s_max]
    # split any panel with ratio above 2
    fine = [edges[0]]
    for b in edges[1:]:
        a = fine[-1]
        k = int(np.ceil(np.log2(b / a) - 1e-12)) if b / a > 2 else 1
        fine += list(a * (b / a) ** (np.arange(1, k + 1) / k))
    sn, sw, sp = [], [], []
    for a, b in zip(fine[:-1], fine[1:]):
        x, w = _gauss(a, b, order)
        sn.append(x)
        sw.append(w)
        sp.append(np.full(order, a))
    n_t = max(1, int(np.ceil(window.t1 - window.t0)))
    tn, tw = [], []
    for j in range(n_t):
        a = window.t0 + (window.t1 - window.t0) * j / n_t
        b = window.t0 + (window.t1 - window.t0) * (j + 1) / n_t
        x, w = _gauss(a, b, order)
        tn.append(x)
        tw.append(w)
    return Quadrature(
        np.concatenate(sn), np.concatenate(sw), np.concatenate(sp), np.concatenate(tn), np.concatenate(tw), order
    )


def truncated_energies(m: ExpansionMap, quad: Quadrature, eps_ladder: Sequence[float]) -> np.ndarray:
    """``E(eps)`` for every ``eps`` in the ladder from one set of nodes."""
    if m.sign != 1:
        raise MapError("the renormalised energy is implemented for the hyperbolic-plane domain")
    eps = np.asarray(eps_ladder, dtype=float)
    # inner integral per s node, summed over t
    col = np.zeros(quad.s_nodes.size)
    for t, wt in zip(quad.t_nodes, quad.t_weights):
        for i, s in enumerate(quad.s_nodes):
            col[i] += wt * energy_density(m, float(s), float(t))
    col *= quad.s_weights / quad.s_nodes**2
    return np.array([col[quad.s_panel >= e * (1 - 1e-12)].sum() for e in eps])


@dataclass(frozen=True)
class EnergyReport:
    window: Window
    epsilons: tuple[float, ...]
    energies: tuple[float, ...]
    c1: float
    e_ren: float
    linear: float
    fit_residual: float
    order: int

    def to_dict(self) -> dict:
        return {
            "window": {"t0": self.window.t0, "t1": self.window.t1, "s_max": self.window.s_max},
            "epsilons": list(self.epsilons),
            "energies": list(self.energies),
            "c1": self.c1,
            "e_ren": self.e_ren,
            "linear": self.linear,
            "fit_residual": self.fit_residual,
            "quadrature_order": self.order,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def fit_energy(eps: np.ndarray, E: np.ndarray) -> tuple[float, float, float, float]:
    """Least squares for ``c1/eps + e_ren + a eps (+ b eps^2 + c eps^3)``.

    The quadratic and cubic tail terms are used when the ladder leaves at
    least one spare degree of freedom; they absorb the smooth remainder of
    truncated maps that would otherwise bias ``c1``.
    """
    eps = np.asarray(eps, dtype=float)
    tail = max(1, min(3, eps.size - 3))
    A = np.vstack([1.0 / eps, np.ones_like(eps)] + [eps**p for p in range(1, tail + 1)]).T
    scale = np.abs(A).max(axis=0)
    coef, *_ = np.linalg.lstsq(A / scale, E, rcond=None)
    coef = coef / scale
    resid = float(np.sqrt(np.mean((A @ coef - E) ** 2)))
    return float(coef[0]), float(coef[1]), float(coef[2]), resid


def converged_quadrature(
    m: ExpansionMap, window: Window, eps_ladder: Sequence[float], start: int = 6, max_order: int = 40
) -> tuple[Quadrature, np.ndarray]:
    prev = None
    order = start
    while order <= max_order:
        quad = build_quadrature(window, eps_ladder, order)
        E = truncated_energies(m, quad, eps_ladder)
        if prev is not None and np.max(np.abs(E - prev) / np.maximum(1.0, np.abs(E))) < REL_AGREEMENT:
            return quad, E
        prev = E
        order += 4
    raise QuadratureError("energy quadrature did not converge")


def default_epsilons(window: Window, count: int = 6) -> tuple[float, ...]:
    return tuple(window.s_max * 2.0 ** -np.arange(3, 3 + count))


def renormalized_energy(
    m: ExpansionMap,
    window: Window,
    eps_ladder: Sequence[float] | None = None,
    quad: Quadrature | None = None,
) -> EnergyReport:
    eps = np.asarray(eps_ladder if eps_ladder is not None else default_epsilons(window), dtype=float)
    if quad is None:
        quad, E = converged_quadrature(m, window, eps)
    else:
        E = truncated_energies(m, quad, eps)
    c1, e_ren, lin, resid = fit_energy(eps, E)
    return EnergyReport(window, tuple(eps.tolist()), tuple(E.tolist()), c1, e_ren, lin, resid, quad.order)


def bump(t0: float, t1: float) -> Callable[[float], float]:
    """Smooth profile vanishing with two derivatives at both window ends."""

    def b(t: float) -> float:
        r = (t - t0) / (t1 - t0)
        if r <= 0 or r >= 1:
            return 0.0
        return (16 * r * r * (1 - r) ** 2) ** 2

    return b


@dataclass(frozen=True)
class FirstVariation:
    numeric: float
    predicted: float

    @property
    def relative_error(self) -> float:
        return abs(self.numeric - self.predicted) / max(abs(self.predicted), 1e-300)


def predicted_variation(m: ExpansionMap, dphi: Callable[[float], np.ndarray], quad: Quadrature) -> float:
    """``-3 int <u3, dphi>_g / |gamma'|^2_g dt`` over the quadrature t-nodes."""
    total = 0.0
    for t, w in zip(quad.t_nodes, quad.t_weights):
        sl = m.slice(float(t))
        k = sl.kin
        total += w * k.inner(sl.values["y3"], np.asarray(dphi(float(t)), dtype=float)) / k.N
    return -3.0 * total


def first_variation_check(
    m: ExpansionMap,
    dphi: Callable[[float], np.ndarray],
    window: Window,
    h: float = 1e-4,
    eps_ladder: Sequence[float] | None = None,
) -> FirstVariation:
    """Central difference of the renormalised energy along ``u + h chi(s) dphi(t)``.

    ``dphi`` must vanish at the window ends; ``chi`` cuts off smoothly
    between ``s_max/2`` and ``s_max``.  Both energies use identical nodes.

    The other coefficients are not recomputed for the varied boundary curve,
    and the interior tension of the truncated map is ignored, so the
    comparison with the boundary formula is exact only for a totally
    geodesic base map.
    """
    eps = np.asarray(eps_ladder if eps_ladder is not None else default_epsilons(window), dtype=float)
    if eps.max() > 0.5 * window.s_max:
        raise ValueError("epsilons must lie below s_max/2 where the cutoff equals one")
    quad, _ = converged_quadrature(m, window, eps)
    chi = smooth_cutoff(window.s_max)
    plus = m.with_changes(variation=Variation(h, chi, dphi))
    minus = m.with_changes(variation=Variation(-h, chi, dphi))
    e_plus = renormalized_energy(plus, window, eps, quad).e_ren
    e_minus = renormalized_energy(minus, window, eps, quad).e_ren
    return FirstVariation((e_plus - e_minus) / (2 * h), predicted_variation(m, dphi, quad))
