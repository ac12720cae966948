import csv

import numpy as np
import pytest

from cgholo.builtins import flat, minkowski, sphere_stereographic
from cgholo.expr import parse
from cgholo.geodesic import (
    CausalFlipError,
    CGState,
    CurveSpec,
    Mobius,
    NotConformalGeodesicError,
    NullVelocityError,
    PoleError,
    alpha_from_curve,
    cg_residual_third_order,
    cg_rhs_first_order,
    integrate_cg,
    integrate_third_order,
    kinematics,
    lambda_identity_errors,
    mobius_apply,
    reparametrization_check,
    schwarzian,
    schwarzian_is_zero,
    warn_if_not_cg,
)

RATIONAL = ["(1-t^2)/(1+t^2)", "2*t/(1+t^2)"]


@pytest.fixture(scope="module")
def plane():
    return flat(2)


@pytest.fixture(scope="module")
def circle(plane):
    return CurveSpec.from_strings(RATIONAL, plane)


def closed_circle(t):
    return np.array([(1 - t * t) / (1 + t * t), 2 * t / (1 + t * t)])


# -- 1-form and residual -------------------------------------------------------


def test_alpha_of_line_vanishes(plane):
    c = CurveSpec.from_strings(["t", "0"], plane)
    np.testing.assert_array_equal(alpha_from_curve(plane, c.jets(0.3)), [0.0, 0.0])
    np.testing.assert_array_equal(cg_residual_third_order(plane, c.jets(0.3)), [0.0, 0.0])


@pytest.mark.parametrize("t", [0.0, 0.4, 2.0])
def test_alpha_of_unit_circle(plane, t):
    c = CurveSpec.from_strings(["cos(t)", "sin(t)"], plane)
    k = kinematics(c, t)
    np.testing.assert_allclose(k.alpha_sharp, [-np.cos(t), -np.sin(t)], atol=1e-15)
    assert np.sqrt(k.inner(k.alpha_sharp, k.alpha_sharp)) == pytest.approx(1.0, abs=1e-15)


def test_alpha_rescaling_consistent_with_lambda(plane):
    # under t -> 2t, lambda doubles and alpha(v) satisfies d(lambda)/dt = -lambda alpha(v)
    c1 = CurveSpec.from_strings(["cos(t)", "sin(t)"], plane)
    c2 = CurveSpec.from_strings(["cos(2*t)", "sin(2*t)"], plane)
    k1, k2 = kinematics(c1, 0.3), kinematics(c2, 0.15)
    assert k2.lam == pytest.approx(2 * k1.lam)
    # lambda is constant for both, so alpha(v) must vanish
    assert abs(k1.alpha @ k1.v) < 1e-15 and abs(k2.alpha @ k2.v) < 1e-15
    c3 = CurveSpec.from_strings(["t^2", "0"], plane)
    e1, _ = lambda_identity_errors(c3, 1.3)
    assert abs(e1) < 1e-9


@pytest.mark.parametrize("t", [-1.0, 0.0, 0.5, 2.0])
def test_rational_circle_is_cg(circle, t):
    assert np.linalg.norm(kinematics(circle, t).residual()) < 1e-9


@pytest.mark.parametrize("R", [1.0, 2.0, 0.5])
def test_arclength_circle_residual(plane, R):
    c = CurveSpec.from_strings([f"{R}*cos(t/{R})", f"{R}*sin(t/{R})"], plane)
    for t in (0.0, 0.7, 2.1):
        k = kinematics(c, t)
        res = k.residual()
        np.testing.assert_allclose(res, k.v / (2 * R * R), atol=1e-12)
    if R == 1.0:
        assert np.linalg.norm(res) == pytest.approx(0.5, abs=1e-9)


def test_null_velocity_error():
    m = minkowski(2)
    c = CurveSpec.from_strings(["t", "t"], m)
    with pytest.raises(NullVelocityError) as info:
        kinematics(c, 0.25).residual()
    assert info.value.t == 0.25
    with pytest.raises(NullVelocityError):
        kinematics(CurveSpec.from_strings(["0", "0"], flat(2)), 1.0).alpha_sharp


# -- first-order system ----------------------------------------------------------


def test_rhs_flat_line(plane):
    d = cg_rhs_first_order(plane, CGState(0.0, np.zeros(2), np.array([1.0, 0.0]), np.zeros(2)))
    np.testing.assert_array_equal(d.gamma, [1.0, 0.0])
    np.testing.assert_array_equal(d.v, [0.0, 0.0])
    np.testing.assert_array_equal(d.a, [0.0, 0.0])


def test_null_line_is_stationary():
    m = minkowski(2)
    d = cg_rhs_first_order(m, CGState(0.0, np.zeros(2), np.array([1.0, 1.0]), np.zeros(2)))
    np.testing.assert_array_equal(d.v, [0.0, 0.0])
    np.testing.assert_array_equal(d.a, [0.0, 0.0])
    traj = integrate_cg(m, CGState(0.0, np.zeros(2), np.array([1.0, 1.0]), np.zeros(2)), (0.0, 5.0))
    assert traj.causal == 0
    np.testing.assert_allclose(traj.state(5.0).gamma, [5.0, 5.0], atol=1e-12)


def test_great_circle_on_three_sphere():
    m = sphere_stereographic(3)
    c = CurveSpec.from_strings(["t/sqrt(2)", "t/sqrt(2)", "0"], m)
    for t in (-0.5, 0.0, 0.8):
        assert np.linalg.norm(kinematics(c, t).residual()) < 1e-9
        s = CGState.from_curve(c, t)
        d = cg_rhs_first_order(m, s)
        jets = c.jets(t)
        # consistency: gamma'' from the system equals the curve's second derivative
        np.testing.assert_allclose(d.gamma, jets[1], atol=1e-14)
        np.testing.assert_allclose(d.v, jets[2], atol=1e-9)
    # the arc-length parametrisation of the same great circle is not projective
    arc = CurveSpec.from_strings(["tan(t/2)", "0", "0"], m)
    assert np.linalg.norm(kinematics(arc, 0.0).residual()) == pytest.approx(0.25, abs=1e-12)


def test_flat_line_trajectory(plane):
    traj = integrate_cg(plane, CGState(0.0, np.zeros(2), np.array([1.0, 0.0]), np.zeros(2)), (0.0, 10.0))
    err = max(np.abs(traj.state(t).gamma - [t, 0.0]).max() for t in np.linspace(0, 10, 101))
    assert err < 1e-12


def test_initial_state_of_rational_circle(circle):
    s = CGState.from_curve(circle, 0.0)
    np.testing.assert_allclose(s.gamma, [1.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(s.v, [0.0, 2.0], atol=1e-15)
    np.testing.assert_allclose(s.a, [-1.0, 0.0], atol=1e-15)


@pytest.fixture(scope="module")
def circle_traj(plane, circle):
    return integrate_cg(plane, CGState.from_curve(circle, 0.0), (-3.0, 3.0), tol=1e-10)


def test_rational_circle_trajectory(circle_traj):
    ts = np.linspace(-3, 3, 241)
    err = max(np.abs(circle_traj.state(t).gamma - closed_circle(t)).max() for t in ts)
    assert err < 1e-8


def test_third_order_agrees_with_first_order(plane, circle, circle_traj):
    sol = integrate_third_order(plane, 0.0, circle.jets(0.0), (-3.0, 3.0), tol=1e-10)
    ts = np.linspace(-3, 3, 121)
    err = max(np.abs(sol(t)[:2] - circle_traj.state(t).gamma).max() for t in ts)
    assert err < 1e-7


def test_lambda_identities_along_trajectories(circle_traj):
    cv = circle_traj.curve()
    for t in (-2.5, -1.0, 0.3, 1.7, 2.9):
        e1, e2 = lambda_identity_errors(cv, t)
        assert abs(e1) < 1e-7 and abs(e2) < 1e-6


def test_lambda_identities_on_timelike_curve():
    m = minkowski(2)
    c = CurveSpec.from_strings(["2*t/(1-t^2)", "(1+t^2)/(1-t^2)"], m)
    assert kinematics(c, 0.2).causal == -1
    assert np.linalg.norm(kinematics(c, 0.2).residual()) < 1e-12
    traj = integrate_cg(m, CGState.from_curve(c, 0.0), (-0.6, 0.6))
    assert traj.causal == -1
    for t in (-0.5, 0.1, 0.5):
        np.testing.assert_allclose(traj.state(t).gamma, c.position(t), atol=1e-8)
        e1, e2 = lambda_identity_errors(traj.curve(), t)
        assert abs(e1) < 1e-7 and abs(e2) < 1e-6


def test_causal_flip_detected_with_loose_tolerance():
    # the exact flow keeps sign(|v|^2); a coarse integration of near-null data does not
    m = minkowski(2)
    s0 = CGState(0.0, np.zeros(2), np.array([1.0, 1.0 + 1e-8]), np.array([-3.0, 2.0]))
    with np.errstate(all="ignore"), pytest.raises(CausalFlipError):
        integrate_cg(m, s0, (0.0, 3.0), tol=0.5)


def test_trajectory_csv(tmp_path, circle_traj):
    path = tmp_path / "traj.csv"
    circle_traj.to_csv(path, [-1.0, 0.0, 1.0])
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["t", "gamma1", "gamma2", "v1", "v2", "a1", "a2", "residual_norm"]
    assert len(rows) == 4
    assert float(rows[2][0]) == 0.0 and float(rows[2][1]) == 1.0
    assert all(float(r[-1]) < 1e-7 for r in rows[1:])


# -- Möbius reparametrisation ----------------------------------------------------


def test_mobius_examples():
    assert mobius_apply(Mobius(1, 0, 0, 1), 0.37) == 0.37
    assert mobius_apply(Mobius(0, 1, 1, 0), 2.0) == pytest.approx(0.5)
    f = Mobius(2, 1, 1, 1)
    assert abs(f.det) == pytest.approx(1.0)
    assert all(abs(schwarzian(f.expr(), t)) < 1e-8 for t in (0.0, 1.0, 2.0))
    assert schwarzian_is_zero(f)
    with pytest.raises(PoleError):
        mobius_apply(Mobius(0, 1, 1, 0), 0.0)


def test_schwarzian_of_cubic():
    # S(t^3 + t) at 0: f' = 1, f'' = 0, f''' = 6
    assert schwarzian(parse("t^3+t", ["t"]), 0.0) == pytest.approx(6.0)


def test_reparametrization_of_line(plane):
    line = CurveSpec.from_strings(["t", "0"], plane)
    assert reparametrization_check(line, parse("t+1", ["t"]), (0.0, 1.0)).output_max_residual == 0.0
    rep = reparametrization_check(line, Mobius(0, 1, 1, 3), (0.0, 1.0))
    assert rep.output_max_residual < 1e-8 and rep.is_cg()
    bad = reparametrization_check(line, parse("t^3+t", ["t"]), (-1.0, 1.0))
    assert bad.output_max_residual > 1e-2 and not bad.is_cg()


def test_pole_in_domain(circle):
    with pytest.raises(PoleError):
        reparametrization_check(circle, Mobius(1, 0, 1, -0.5), (0.0, 1.0))


def test_input_must_be_cg(plane):
    c = CurveSpec.from_strings(["cos(t)", "sin(t)"], plane)
    with pytest.raises(NotConformalGeodesicError):
        reparametrization_check(c, Mobius(1, 0, 0, 1), (0.0, 1.0))


def random_mobius(rng, domain):
    while True:
        a, b, c, d = rng.uniform(-2, 2, size=4)
        if abs(a * d - b * c) < 0.2:
            continue
        f = Mobius(a, b, c, d)
        p = f.pole()
        if p is None or not (domain[0] - 0.5 <= p <= domain[1] + 0.5):
            return f


def test_random_mobius_maps_preserve_cg(circle):
    rng = np.random.default_rng(2024)
    for _ in range(20):
        f = random_mobius(rng, (-0.5, 0.5))
        assert reparametrization_check(circle, f, (-0.5, 0.5)).output_max_residual < 1e-6


NON_MOBIUS = ["t^3+t", "exp(t)", "tan(t/2)", "t+0.3*sin(t)", "sqrt(t+2)"]


@pytest.mark.parametrize("f", NON_MOBIUS)
def test_non_mobius_maps_break_cg(circle, f):
    rep = reparametrization_check(circle, parse(f, ["t"]), (-0.5, 0.5))
    assert rep.output_max_residual > 1e-2


def test_warning_for_non_cg(plane):
    c = CurveSpec.from_strings(["cos(t)", "sin(t)"], plane)
    with pytest.warns(UserWarning):
        assert warn_if_not_cg(c, [0.0, 1.0]) == pytest.approx(0.5)
