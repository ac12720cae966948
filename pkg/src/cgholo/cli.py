"""``cgholo run <config> --out <dir> [--plots] [--ladder-depth K] [--seed N]``.

Exit status: 0 when every claim passes, 1 when a claim fails, 2 on a
configuration or runtime error (one line on standard error).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import report
from .config import load
from .jobs import Context, run_job


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cgholo", description="Conformal geodesic and harmonic map checks.")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the jobs of a configuration file")
    run.add_argument("config", type=Path)
    run.add_argument("--out", type=Path, required=True, help="output directory")
    run.add_argument("--plots", action="store_true", help="also write SVG plots")
    run.add_argument("--ladder-depth", type=int, default=None, help="number of dyadic s samples")
    run.add_argument("--seed", type=int, default=0, help="seed for random sample points")
    return p


def run(config: Path, out: Path, plots: bool = False, ladder_depth: int | None = None, seed: int = 0) -> int:
    cfg = load(config)
    ctx = Context(seed=seed, ladder_depth=ladder_depth)
    results = [run_job(cfg, job, ctx) for job in cfg.jobs]
    out.mkdir(parents=True, exist_ok=True)
    report.write_report(out / "report.json", cfg.name, [r.to_dict() for r in results])
    report.write_samples(out / "samples.csv", [row for r in results for row in r.rows])
    for r in results:
        if "trajectory" in r.files:
            traj, ts = r.files["trajectory"]
            traj.to_csv(out / f"trajectory_{r.name}.csv", ts)
    if plots:
        pdir = out / "plots"
        pdir.mkdir(exist_ok=True)
        for r in results:
            for q, series in r.plots.items():
                loglog = q != "trajectory"
                report.svg_lines(
                    pdir / f"{r.name}_{q}.svg",
                    series,
                    f"{r.name}: {q}",
                    "log10 s" if loglog else "y1",
                    f"log10 max |{q}|" if loglog else "y2",
                    loglog=loglog,
                )
    return 0 if all(c.passed for r in results for c in r.claims) else 1


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run(args.config, args.out, args.plots, args.ladder_depth, args.seed)
    except Exception as exc:  # every failure maps to exit status 2
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"cgholo: error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
