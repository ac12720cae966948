"""Library of closed-form chart metrics.

Two-dimensional entries carry their canonical Schouten tensor (``P = (K/2) g``
for constant curvature ``K``) so they can be used directly with the
conformal geodesic equations.
"""

from __future__ import annotations

from .tensor import ChartMetric


def _names(n: int) -> list[str]:
    return [f"y{i + 1}" for i in range(n)]


def _diag(entries: list[str]) -> list[list[str]]:
    n = len(entries)
    return [[entries[i] if i == j else "0" for j in range(n)] for i in range(n)]


def _scaled(rows: list[list[str]], factor: str) -> list[list[str]]:
    return [[f"({factor})*({c})" if c != "0" else "0" for c in r] for r in rows]


def flat(n: int = 2) -> ChartMetric:
    m = ChartMetric.from_strings(_diag(["1"] * n), _names(n), (n, 0), name=f"flat{n}")
    if n == 2:
        m = _with_override(m, [["0", "0"], ["0", "0"]])
    return m


def minkowski(n: int = 2) -> ChartMetric:
    """``-dy1^2 + dy2^2 + ... + dyn^2`` (y1 is the time coordinate)."""
    m = ChartMetric.from_strings(
        _diag(["-1"] + ["1"] * (n - 1)), _names(n), (n - 1, 1), name=f"minkowski{n}"
    )
    if n == 2:
        m = _with_override(m, [["0", "0"], ["0", "0"]])
    return m


def sphere_polar(n: int = 2) -> ChartMetric:
    """Unit round sphere in hyperspherical coordinates (n = 2 or 3)."""
    if n == 2:
        rows = _diag(["1", "sin(y1)^2"])
    elif n == 3:
        rows = _diag(["1", "sin(y1)^2", "sin(y1)^2*sin(y2)^2"])
    else:
        raise ValueError("sphere_polar supports n = 2 or 3")
    box = tuple((0.4, 2.7) for _ in range(n - 1)) + ((-3.0, 3.0),)
    m = ChartMetric.from_strings(rows, _names(n), (n, 0), name=f"sphere_polar{n}", box=box)
    if n == 2:
        m = _with_override(m, _scaled(rows, "1/2"))
    return m


def sphere_stereographic(n: int = 2) -> ChartMetric:
    """Unit round sphere ``4|dy|^2/(1+|y|^2)^2``."""
    names = _names(n)
    r2 = "+".join(f"{v}^2" for v in names)
    rows = _scaled(_diag(["1"] * n), f"4/(1+{r2})^2")
    box = tuple((-1.5, 1.5) for _ in range(n))
    m = ChartMetric.from_strings(rows, names, (n, 0), name=f"sphere_stereo{n}", box=box)
    if n == 2:
        m = _with_override(m, _scaled(rows, "1/2"))
    return m


def hyperbolic_upper_half(n: int = 2) -> ChartMetric:
    """``|dy|^2 / yn^2`` on ``yn > 0``."""
    names = _names(n)
    rows = _scaled(_diag(["1"] * n), f"1/{names[-1]}^2")
    box = tuple((-1.0, 1.0) for _ in range(n - 1)) + ((0.5, 2.0),)
    m = ChartMetric.from_strings(rows, names, (n, 0), name=f"hyperbolic{n}", box=box)
    if n == 2:
        m = _with_override(m, _scaled(rows, "-1/2"))
    return m


def _with_override(m: ChartMetric, P) -> ChartMetric:
    from .tensor import schouten_override

    return schouten_override(m, P)


BUILTINS = {
    "flat": flat,
    "minkowski": minkowski,
    "sphere_polar": sphere_polar,
    "sphere_stereographic": sphere_stereographic,
    "hyperbolic": hyperbolic_upper_half,
}


def builtin(name: str, n: int) -> ChartMetric:
    try:
        factory = BUILTINS[name]
    except KeyError:
        raise ValueError(f"unknown builtin metric {name!r}; choose from {sorted(BUILTINS)}") from None
    return factory(n)
