import json

import numpy as np
import pytest

from cgholo import hmap
from cgholo.ambient import make_ambient
from cgholo.builtins import flat, minkowski
from cgholo.energy import (
    Window,
    bump,
    build_quadrature,
    default_epsilons,
    first_variation_check,
    renormalized_energy,
    truncated_energies,
)
from cgholo.geodesic import CurveSpec
from cgholo.hmap import energy_density, smooth_cutoff


@pytest.fixture(scope="module")
def plane():
    return flat(2)


@pytest.fixture(scope="module")
def h2(plane):
    return make_ambient(plane, "ExactHyperbolicUpperHalf")


def line_map(plane, h2, comps=("t", "0"), **kw):
    return hmap.build_expansion(CurveSpec.from_strings(list(comps), plane), 1, h2, **kw)


@pytest.mark.parametrize("comps", [("t", "0"), ("2*t", "0"), ("0.6*t", "0.8*t")])
def test_density_of_totally_geodesic_plane(plane, h2, comps):
    m = line_map(plane, h2, comps)
    for s in (0.01, 0.2, 0.9):
        for t in (-1.0, 0.3):
            assert energy_density(m, s, t) == pytest.approx(1.0, abs=1e-12)


def test_density_of_circle_has_finite_limit(plane, h2):
    m = line_map(plane, h2, ("(1-t^2)/(1+t^2)", "2*t/(1+t^2)"))
    vals = [energy_density(m, s, 0.3) for s in (2.0**-6, 2.0**-8, 2.0**-10)]
    assert abs(vals[2] - vals[1]) < abs(vals[1] - vals[0]) / 3
    assert abs(vals[2] - 1.0) < 1e-3


def test_line_energy_closed_form(plane, h2):
    rep = renormalized_energy(line_map(plane, h2), Window(0.0, 1.0, 1.0))
    assert abs(rep.c1 - 1.0) < 1e-8
    assert abs(rep.e_ren + 1.0) < 1e-8
    np.testing.assert_allclose(rep.energies, [1 / e - 1 for e in rep.epsilons], rtol=1e-10)
    assert rep.fit_residual < 1e-4
    doc = json.loads(rep.to_json())
    assert doc["window"] == {"t0": 0.0, "t1": 1.0, "s_max": 1.0}


def test_window_length_linearity(plane, h2):
    rep = renormalized_energy(line_map(plane, h2), Window(0.0, 2.0, 1.0))
    assert rep.c1 == pytest.approx(2.0, abs=1e-8)
    assert rep.e_ren == pytest.approx(-2.0, abs=1e-8)


def test_constant_term_stable_under_ladder_halving(plane, h2):
    m = line_map(plane, h2, ("(1-t^2)/(1+t^2)", "2*t/(1+t^2)"))
    w = Window(-0.5, 0.5, 0.5)
    eps = np.array(default_epsilons(w))
    a = renormalized_energy(m, w, eps)
    b = renormalized_energy(m, w, eps / 2)
    assert abs(a.e_ren - b.e_ren) < 1e-6
    assert a.c1 == pytest.approx(1.0, rel=1e-6)


def test_energy_minus_divergence_is_cauchy(plane, h2):
    m = line_map(plane, h2, ("(1-t^2)/(1+t^2)", "2*t/(1+t^2)"))
    w = Window(-0.5, 0.5, 0.5)
    rep = renormalized_energy(m, w)
    rest = np.array(rep.energies) - rep.c1 / np.array(rep.epsilons)
    diffs = np.abs(np.diff(rest))
    assert np.all(diffs[1:] < diffs[:-1])


def test_quadrature_panels_align_with_epsilons():
    w = Window(0.0, 1.0, 1.0)
    eps = [0.125, 0.0625]
    q = build_quadrature(w, eps, 6)
    assert set(eps) <= set(q.s_panel.tolist())
    assert q.s_weights.sum() == pytest.approx(1.0 - 0.0625)


def test_ads_domain_rejected():
    mk = minkowski(2)
    m = hmap.build_expansion(CurveSpec.from_strings(["t", "0"], mk), -1, make_ambient(mk, "ExactAdS"))
    with pytest.raises(hmap.MapError):
        truncated_energies(m, build_quadrature(Window(0, 1, 1), [0.1], 6), [0.1])


def test_window_validation():
    with pytest.raises(ValueError):
        Window(1.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        Window(0.0, 1.0, 0.0)


def test_cutoff_and_bump():
    chi = smooth_cutoff(1.0)
    assert chi(0.3) == (1.0, 0.0, 0.0)
    assert chi(1.0) == (0.0, 0.0, 0.0)
    v, d, _ = chi(0.75)
    assert v == pytest.approx(0.5) and d < 0
    b = bump(0.0, 1.0)
    assert b(0.0) == 0.0 and b(1.0) == 0.0 and b(0.5) == pytest.approx(1.0)


# -- first variation -------------------------------------------------------------------

WINDOW = Window(0.0, 1.0, 1.0)
EPS = (0.25, 0.125, 0.0625, 0.03125, 0.015625)


def _variation(plane, h2, w, e):
    m = line_map(plane, h2, overrides={"y3": np.asarray(w, dtype=float)})
    b = bump(WINDOW.t0, WINDOW.t1)
    return first_variation_check(m, lambda t: b(t) * np.asarray(e, dtype=float), WINDOW, eps_ladder=EPS)


def test_first_variation_closed_form(plane, h2):
    w, e = np.array([0.3, -0.7]), np.array([0.5, 1.2])
    fv = _variation(plane, h2, w, e)
    # integral of the bump over [0, 1] is 128/315
    assert fv.predicted == pytest.approx(-3 * (w @ e) * 128 / 315, rel=1e-9)
    assert fv.relative_error < 1e-2


def test_first_variation_vanishes_for_theorem_map(plane, h2):
    fv = _variation(plane, h2, [0.0, 0.0], [0.5, 1.2])
    assert abs(fv.numeric) < 1e-6 and fv.predicted == 0.0


def test_first_variation_doubles_with_u3(plane, h2):
    w, e = np.array([0.2, 0.4]), np.array([-1.0, 0.3])
    a = _variation(plane, h2, w, e)
    b = _variation(plane, h2, 2 * w, e)
    assert b.numeric == pytest.approx(2 * a.numeric, rel=1e-2)
    assert b.predicted == pytest.approx(2 * a.predicted, rel=1e-12)
