"""Job configuration files.

Line-oriented ``[section]`` blocks of ``key = value`` pairs (``#`` starts a
comment line).  Sections::

    [metric]    builtin = flat | minkowski | sphere_polar | sphere_stereographic | hyperbolic
                dimension = n
                or: dimension, signature = p,q, g11 = ..., g12 = ..., ...
                optional Schouten override (n = 2): p11 = ..., p12 = ..., p22 = ...
    [curve]     gamma1 = <expr in t>, gamma2 = ..., t_samples = -0.5, 0, 0.5
    [ambient]   mode = ExactHyperbolicUpperHalf | ExactBall | ExactAdS | Truncated2
    [domain]    type = H2 | AdS2
    [job NAME]  kind = curvature | geodesic | verify | energy | report, plus job keys
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .ambient import AmbientMetric, make_ambient
from .builtins import builtin
from .geodesic import CurveSpec
from .tensor import ChartMetric, schouten_override

JOB_KINDS = ("curvature", "geodesic", "verify", "energy", "report")


class ConfigError(ValueError):
    pass


@dataclass
class JobConfig:
    name: str
    kind: str
    options: dict[str, str]

    def get(self, key: str, default=None):
        return self.options.get(key, default)

    def float(self, key: str, default: float) -> float:
        raw = self.options.get(key)
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"job {self.name}: {key} must be a number, got {raw!r}") from None

    def floats(self, key: str, default=None) -> list[float] | None:
        raw = self.options.get(key)
        if raw is None:
            return default
        try:
            return [float(x) for x in raw.split(",") if x.strip()]
        except ValueError:
            raise ConfigError(f"job {self.name}: {key} must be a comma-separated list of numbers") from None

    def int(self, key: str, default: int) -> int:
        return int(self.float(key, default))

    def bool(self, key: str, default: bool) -> bool:
        raw = self.options.get(key)
        if raw is None:
            return default
        if raw.strip().lower() in ("1", "true", "yes", "on"):
            return True
        if raw.strip().lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"job {self.name}: {key} must be a boolean")


@dataclass
class RunConfig:
    name: str
    chart: ChartMetric
    curve: CurveSpec | None
    t_samples: list[float]
    ambient: AmbientMetric | None
    sign: int
    jobs: list[JobConfig] = field(default_factory=list)


def _numbers(text: str, what: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"{what} must be a comma-separated list of numbers") from None


def _metric(sec: configparser.SectionProxy) -> ChartMetric:
    try:
        n = int(sec.get("dimension", "2"))
    except ValueError:
        raise ConfigError("[metric] dimension must be an integer") from None
    name = sec.get("builtin")
    if name:
        try:
            chart = builtin(name.strip(), n)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    else:
        sig = sec.get("signature")
        signature = tuple(int(x) for x in sig.split(",")) if sig else (n, 0)
        variables = [v.strip() for v in sec.get("variables", "").split(",") if v.strip()] or None
        rows = [["0"] * n for _ in range(n)]
        for i in range(n):
            for j in range(i, n):
                key = f"g{i + 1}{j + 1}"
                if key not in sec and i == j:
                    raise ConfigError(f"[metric] missing diagonal component {key}")
                rows[i][j] = rows[j][i] = sec.get(key, "0")
        chart = ChartMetric.from_strings(rows, variables, signature)
    pkeys = [k for k in sec if k.startswith("p") and k[1:].isdigit()]
    if pkeys:
        P = [["0"] * n for _ in range(n)]
        for i in range(n):
            for j in range(i, n):
                P[i][j] = P[j][i] = sec.get(f"p{i + 1}{j + 1}", "0")
        chart = schouten_override(chart, P)
    return chart


def load(path: str | Path) -> RunConfig:
    path = Path(path)
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#",), inline_comment_prefixes=("#",))
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc.message.splitlines()[0]}") from None
    if "metric" not in parser:
        raise ConfigError("missing [metric] section")
    chart = _metric(parser["metric"])

    curve = None
    t_samples: list[float] = []
    if "curve" in parser:
        sec = parser["curve"]
        comps = []
        for i in range(chart.n):
            key = f"gamma{i + 1}"
            if key not in sec:
                raise ConfigError(f"[curve] missing {key} (chart dimension {chart.n})")
            comps.append(sec[key])
        extra = [k for k in sec if k.startswith("gamma") and k[5:].isdigit() and int(k[5:]) > chart.n]
        if extra:
            raise ConfigError(f"[curve] has more components than the chart dimension {chart.n}")
        curve = CurveSpec.from_strings(comps, chart)
        t_samples = _numbers(sec.get("t_samples", "0"), "[curve] t_samples")

    ambient = None
    if "ambient" in parser:
        ambient = make_ambient(chart, parser["ambient"].get("mode", "ExactHyperbolicUpperHalf"))

    sign = 1
    if "domain" in parser:
        kind = parser["domain"].get("type", "H2").strip().lower()
        if kind not in ("h2", "ads2"):
            raise ConfigError("[domain] type must be H2 or AdS2")
        sign = 1 if kind == "h2" else -1

    jobs = []
    for section in parser.sections():
        if not section.startswith("job"):
            if section not in ("metric", "curve", "ambient", "domain"):
                raise ConfigError(f"unknown section [{section}]")
            continue
        name = section[3:].strip()
        if not name:
            raise ConfigError("job sections need a name: [job <name>]")
        opts = dict(parser[section])
        kind = opts.pop("kind", "").strip()
        if kind not in JOB_KINDS:
            raise ConfigError(f"job {name}: kind must be one of {', '.join(JOB_KINDS)}")
        if kind in ("geodesic", "verify", "energy", "report") and curve is None:
            raise ConfigError(f"job {name} needs a [curve] section")
        if kind in ("verify", "energy") and ambient is None:
            raise ConfigError(f"job {name} needs an [ambient] section")
        jobs.append(JobConfig(name, kind, opts))
    if not jobs:
        raise ConfigError("config defines no [job <name>] sections")
    jobs.sort(key=lambda j: j.name)
    return RunConfig(path.stem, chart, curve, t_samples, ambient, sign, jobs)
