"""Job runners behind the command-line interface.

Every runner returns a :class:`JobResult` holding claims, structured data,
long-format sample rows and optional plot series.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import hmap
from .asym import InsufficientDataError, dyadic_ladder, estimate_order, richardson
from .config import ConfigError, JobConfig, RunConfig
from .energy import Window, renormalized_energy
from .geodesic import CGState, integrate_cg, integrate_third_order, kinematics, lambda_identity_errors
from .report import Claim, at_least, below
from .tensor import christoffel_from_jet, curvature_at, inverse, riemann_only

ZERO_THRESHOLD = 1e-12
NOISE_FLOOR = 1e-13


@dataclass
class Context:
    seed: int = 0
    ladder_depth: int | None = None


@dataclass
class JobResult:
    name: str
    kind: str
    claims: list[Claim] = field(default_factory=list)
    data: dict = field(default_factory=dict)
    rows: list[tuple] = field(default_factory=list)
    plots: dict = field(default_factory=dict)
    files: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "claims": [c.to_dict() for c in self.claims],
            "data": self.data,
        }


# -- curvature ----------------------------------------------------------------


def run_curvature(cfg: RunConfig, job: JobConfig, ctx: Context) -> JobResult:
    res = JobResult(job.name, job.kind)
    chart = cfg.chart
    rng = np.random.default_rng(ctx.seed)
    pts = chart.sample_points(job.int("points", 10), rng)
    compat, trace_err, scalars = 0.0, 0.0, []
    for y in pts:
        jet = chart.jet(y)
        G = christoffel_from_jet(inverse(jet.g), jet.dg)
        rebuilt = np.einsum("lj,lki->kij", jet.g, G) + np.einsum("il,lkj->kij", jet.g, G)
        compat = max(compat, float(np.max(np.abs(rebuilt - jet.dg))))
        if chart.n >= 3 or chart.schouten_exprs is not None:
            cp = curvature_at(chart, y)
            tr = float(np.einsum("ij,ij->", cp.g_inv, cp.schouten))
            target = cp.scalar / (2 * (chart.n - 1))
            trace_err = max(trace_err, abs(tr - target) / max(1.0, abs(target)))
        else:
            cp = riemann_only(chart, y)
        scalars.append(cp.scalar)
        res.rows.append((job.name, "scalar_curvature", None, None, cp.scalar))
    res.claims.append(below("metric_compatibility", "metric compatibility of the Christoffel symbols", compat, 1e-10))
    if chart.n >= 3 or chart.schouten_exprs is not None:
        res.claims.append(below("schouten_trace", "Schouten trace identity", trace_err, job.float("trace_tol", 1e-10)))
    res.data = {"points": pts.tolist(), "scalar_curvature": scalars}
    return res


# -- geodesic -----------------------------------------------------------------


def run_geodesic(cfg: RunConfig, job: JobConfig, ctx: Context) -> JobResult:
    res = JobResult(job.name, job.kind)
    curve = cfg.curve
    t0 = job.float("t0", 0.0)
    span = job.floats("t_span", [t0 - 1.0, t0 + 1.0])
    if len(span) != 2:
        raise ConfigError(f"job {job.name}: t_span needs two numbers")
    tol = job.float("tol", 1e-10)
    count = job.int("samples", 61)
    s0 = CGState.from_curve(curve, t0)
    traj = integrate_cg(cfg.chart, s0, (span[0], span[1]), tol)
    ts = np.linspace(span[0], span[1], count)
    states = traj.sample(ts)
    err = max(float(np.max(np.abs(st.gamma - curve.position(t)))) for st, t in zip(states, ts))
    for st, t in zip(states, ts):
        res.rows.append((job.name, "gamma_error", t, None, float(np.max(np.abs(st.gamma - curve.position(t))))))
    if job.bool("compare", True):
        res.claims.append(below("trajectory_error", "closed-form conformal geodesic", err, job.float("error_tol", 1e-8)))
    norms = [float(st.v @ cfg.chart.jet(st.gamma).g @ st.v) for st in states]
    if traj.causal == 0:
        res.claims.append(below("causal_preserved", "causal character preserved", max(map(abs, norms)), 1e-6))
    else:
        res.claims.append(
            at_least("causal_preserved", "causal character preserved", min(traj.causal * n for n in norms), -1e-6)
        )
        sol3 = integrate_third_order(cfg.chart, t0, curve.jets(t0), (span[0], span[1]), tol)
        n = cfg.chart.n
        agree = max(float(np.max(np.abs(sol3(t)[:n] - st.gamma))) for st, t in zip(states, ts))
        res.claims.append(below("third_order_agreement", "equivalence of the two conformal geodesic forms", agree, 1e-7))
        tc = traj.curve()
        inner = ts[(ts > span[0] + 0.01) & (ts < span[1] - 0.01)]
        errs = [lambda_identity_errors(tc, float(t)) for t in inner]
        res.claims.append(below("lambda_identity", "first derivative of the speed", max(abs(e[0]) for e in errs), 1e-7))
        res.claims.append(
            below("lambda_identity_second", "second derivative of the speed", max(abs(e[1]) for e in errs), 1e-6)
        )
    res.data = {"t0": t0, "t_span": list(span), "tol": tol, "max_error": err}
    res.files["trajectory"] = (traj, ts)
    res.plots["trajectory"] = {
        "integrated": ([st.gamma[0] for st in states], [st.gamma[1] for st in states]),
    }
    return res


# -- verify -------------------------------------------------------------------


def _coefficient_changes(job: JobConfig, n: int) -> tuple[dict, dict]:
    overrides, shifts = {}, {}
    for key in hmap.ALL_KEYS:
        for prefix, target in (("", overrides), ("shift_", shifts)):
            raw = job.get(prefix + key)
            if raw is None:
                continue
            vals = job.floats(prefix + key)
            if key in hmap.X_KEYS:
                if len(vals) != 1:
                    raise ConfigError(f"job {job.name}: {prefix + key} takes one number")
                target[key] = vals[0]
            else:
                if len(vals) != n:
                    raise ConfigError(f"job {job.name}: {prefix + key} takes {n} numbers")
                target[key] = np.array(vals)
    return overrides, shifts


QUANTITIES: dict[str, tuple[Callable, str, str, float]] = {
    "tension": (hmap.tension, "tension_slope", "tension field vanishing order", 3.5),
    "sff": (hmap.second_fundamental_form, "sff_slope", "second fundamental form vanishing order", 1.5),
    "pullback": (hmap.pullback, "pullback_decay", "pullback metric decay", 0.5),
}


def run_verify(cfg: RunConfig, job: JobConfig, ctx: Context) -> JobResult:
    res = JobResult(job.name, job.kind)
    k0 = job.int("ladder_min", 3)
    k1 = job.int("ladder_max", 10)
    if ctx.ladder_depth is not None:
        k1 = k0 + ctx.ladder_depth - 1
    if k1 - k0 + 1 < 5:
        raise ConfigError(f"job {job.name}: ladder needs at least 5 points")
    ladder = dyadic_ladder(k0, k1)
    ts = job.floats("t_samples", cfg.t_samples)
    noise = job.float("noise_floor", NOISE_FLOOR)
    zero = job.float("zero_threshold", ZERO_THRESHOLD)
    min_r2 = job.float("min_r2", 0.999)
    overrides, shifts = _coefficient_changes(job, cfg.chart.n)
    m = hmap.build_expansion(cfg.curve, cfg.sign, cfg.ambient, tuple(ts), overrides, shifts)
    wanted = [q.strip() for q in job.get("quantities", "tension,sff,pullback").split(",") if q.strip()]
    for q in wanted:
        if q not in QUANTITIES:
            raise ConfigError(f"job {job.name}: unknown quantity {q!r}")
        fn, slope_name, anchor, default_thr = QUANTITIES[q]
        table = {t: [hmap.max_abs(fn(m, float(s), t)) for s in ladder] for t in ts}
        for t, vals in table.items():
            for s, v in zip(ladder, vals):
                res.rows.append((job.name, q, t, s, v))
        res.plots[q] = {f"t={t:g}": (ladder, vals) for t, vals in table.items()}
        overall = max(max(v) for v in table.values())
        details: dict = {"max_abs": overall}
        if q == "sff":
            details["mixed_sff"] = _mixed_sff_records(m, ts, ladder)
        if q == "pullback":
            details["limits"] = _pullback_records(m, ts, ladder)
        if overall < zero:
            res.claims.append(below(f"{q}_zero", anchor, overall, zero, **details))
            continue
        slopes, r2s = [], []
        for t, vals in table.items():
            try:
                fit = estimate_order(list(zip(ladder, vals)), noise)
            except InsufficientDataError:
                continue
            slopes.append(fit.slope)
            r2s.append(fit.r2)
        worst = min(slopes) if slopes else float("inf")
        details.update({"slopes": slopes, "r2": r2s, "min_r2": min_r2})
        claim = at_least(slope_name, anchor, worst, job.float(f"{q}_slope_min", default_thr), **details)
        if r2s and min(r2s) < min_r2:
            claim.passed = False
        res.claims.append(claim)
    res.data = {"ladder": ladder.tolist(), "t_samples": ts, "noise_floor": noise, "sign": cfg.sign}
    return res


def _mixed_sff_records(m: hmap.ExpansionMap, ts, ladder) -> list[dict]:
    out = []
    for t in ts:
        pred = hmap.predicted_sff(m, t)
        comps = [hmap.second_fundamental_form(m, float(s), t)["st"][1:] for s in ladder]
        extracted = [richardson(list(zip(ladder, [c[i] for c in comps])), 1)[0] for i in range(m.n)]
        out.append({"t": t, "extracted_st": extracted, "predicted_st": np.asarray(pred["st"]).tolist()})
    return out


def _pullback_records(m: hmap.ExpansionMap, ts, ladder) -> list[dict]:
    out = []
    for t in ts:
        pred = hmap.predicted_pullback(m, t)
        vals = [hmap.pullback(m, float(s), t)["tt"] for s in ladder]
        out.append({"t": t, "extracted_tt": richardson(list(zip(ladder, vals)), 0)[0], "predicted_tt": pred["tt"]})
    return out


# -- energy -------------------------------------------------------------------


def run_energy(cfg: RunConfig, job: JobConfig, ctx: Context) -> JobResult:
    res = JobResult(job.name, job.kind)
    w = job.floats("window", [0.0, 1.0, 1.0])
    if len(w) != 3:
        raise ConfigError(f"job {job.name}: window takes t0, t1, s_max")
    window = Window(*w)
    eps = job.floats("epsilons")
    overrides, shifts = _coefficient_changes(job, cfg.chart.n)
    m = hmap.build_expansion(cfg.curve, cfg.sign, cfg.ambient, (w[0], w[1]), overrides, shifts)
    rep = renormalized_energy(m, window, eps)
    res.data = rep.to_dict()
    for e, E in zip(rep.epsilons, rep.energies):
        res.rows.append((job.name, "truncated_energy", None, e, E))
    res.claims.append(
        below("energy_fit", "renormalized energy expansion", rep.fit_residual / max(abs(rep.c1), 1.0), 1e-4)
    )
    tol = job.float("tol", 1e-8)
    if job.get("expect_c1") is not None:
        res.claims.append(below("energy_c1", "divergent coefficient", abs(rep.c1 - job.float("expect_c1", 0)), tol))
    if job.get("expect_e_ren") is not None:
        res.claims.append(
            below("energy_e_ren", "renormalized energy", abs(rep.e_ren - job.float("expect_e_ren", 0)), tol)
        )
    return res


# -- report -------------------------------------------------------------------


def run_report(cfg: RunConfig, job: JobConfig, ctx: Context) -> JobResult:
    res = JobResult(job.name, job.kind)
    ts = job.floats("t_samples", cfg.t_samples)
    table = []
    for t in ts:
        k = kinematics(cfg.curve, t)
        row = {"t": t, "norm2": k.N, "causal": k.causal}
        if k.causal != 0:
            row.update(
                lam=k.lam,
                alpha=k.alpha.tolist(),
                residual_norm=float(np.linalg.norm(k.residual())),
            )
            res.rows.append((job.name, "cg_residual", t, None, row["residual_norm"]))
        table.append(row)
    res.data = {"kinematics": table}
    expect = job.get("expect")
    worst = max((r.get("residual_norm", 0.0) for r in table), default=0.0)
    if expect == "cg":
        res.claims.append(below("curve_cg_residual", "third-order conformal geodesic equation", worst, 1e-8))
    elif expect == "not_cg":
        res.claims.append(at_least("curve_not_cg", "third-order conformal geodesic equation", worst, 1e-2))
    elif expect is not None:
        raise ConfigError(f"job {job.name}: expect must be cg or not_cg")
    return res


RUNNERS = {
    "curvature": run_curvature,
    "geodesic": run_geodesic,
    "verify": run_verify,
    "energy": run_energy,
    "report": run_report,
}


def run_job(cfg: RunConfig, job: JobConfig, ctx: Context) -> JobResult:
    return RUNNERS[job.kind](cfg, job, ctx)
