"""Steering plans are judged only by independent replay through the map."""
import math

import numpy as np
import pytest

from shearmix import control as c
from shearmix.cocycle import projective_step
from shearmix.torus import TWO_PI, H, V, apply_map, apply_shear, distance, wrap_signed


def replay(phases, tau, x):
    x = np.asarray(x, dtype=float)
    for w in phases:
        x = apply_map(w, tau, x)
    return x


def replay_proj(phases, tau, x, v):
    x, v = np.asarray(x, dtype=float), np.asarray(v, dtype=float)
    for w in phases:
        x, v = projective_step(w, tau, x, v)
    return x, v


def line_gap(v, u):
    return abs(v[0] * u[1] - v[1] * u[0]) / (np.linalg.norm(v) * np.linalg.norm(u))


@pytest.mark.parametrize("tau,n", [(1.0, 13), (0.5, 26), (0.05, 252)])
def test_one_point_length(tau, n):
    assert c.steer_one_point([1, 1], [4, 5], tau).steps == n == math.ceil(4 * math.pi / tau)


def test_one_point_identity_plan():
    plan = c.steer_one_point([2.0, 3.0], [2.0, 3.0], 1.0)
    assert plan.steps == 13 and plan.achieved_error == 0.0
    x = np.array([2.0, 3.0])
    for w in plan.phases:
        y = apply_map(w, 1.0, x)
        assert distance(x, y) < 1e-15
        x = y


def test_one_point_random_replay():
    rng = np.random.default_rng(0)
    for tau in (0.05, 0.5, 1.0):
        for _ in range(30):
            x, y = rng.random((2, 2)) * TWO_PI
            plan = c.steer_one_point(x, y, tau)
            end = replay(plan.phases, tau, x)
            assert np.max(np.abs(wrap_signed(end - y))) < 1e-9
            assert abs(distance(end, y) - plan.achieved_error) < 1e-9


def test_one_point_equal_translations():
    x, y, tau = np.array([0.3, 6.0]), np.array([2.0, 1.0]), 1.0
    plan = c.steer_one_point(x, y, tau)
    step = wrap_signed(y - x) / plan.steps
    pts = [x]
    for w in plan.phases:
        pts.append(apply_map(w, tau, pts[-1]))
    moves = wrap_signed(np.diff(np.array(pts), axis=0))
    np.testing.assert_allclose(moves, np.tile(step, (plan.steps, 1)), atol=1e-12)


def test_one_point_tau_zero():
    plan = c.steer_one_point([0, 0], [1, 1], 0.0)
    assert not plan.success and plan.steps == 0


def test_rigid_phase_identity():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        x, y = rng.random((2, 2)) * TWO_PI
        gamma, tau = rng.random() * TWO_PI, rng.random() * 2
        for axis, a, o in ((H, 0, 1), (V, 1, 0)):
            beta = c.rigid_phase(x, y, gamma, axis)
            fx, fy = apply_shear(axis, beta, tau, x), apply_shear(axis, beta, tau, y)
            lhs = wrap_signed((fx[a] - fy[a]) - (x[a] - y[a]))
            rhs = 2 * tau * math.sin((x[o] - y[o]) / 2) * math.cos(gamma)
            assert abs(wrap_signed(lhs - rhs)) < 1e-12


def test_rigid_phase_special_angles():
    x, y, tau = np.array([1.0, 0.4]), np.array([2.5, 2.0]), 0.8
    beta = c.rigid_phase(x, y, math.pi / 2, H)
    fx, fy = apply_shear(H, beta, tau, x), apply_shear(H, beta, tau, y)
    assert abs(wrap_signed((fx[0] - fy[0]) - (x[0] - y[0]))) < 1e-12
    beta = c.rigid_phase(x, y, 0.0, H)
    fx, fy = apply_shear(H, beta, tau, x), apply_shear(H, beta, tau, y)
    change = wrap_signed((fx[0] - fy[0]) - (x[0] - y[0]))
    assert change == pytest.approx(2 * tau * math.sin((x[1] - y[1]) / 2), abs=1e-12)


def test_align_examples():
    diag = np.array([1.0, 1.0]) / math.sqrt(2)
    plan = c.align_projective_angle([1.0, 2.0], diag, 1.0)
    assert plan.steps == 10
    _, v = replay_proj(plan.phases, 1.0, [1.0, 2.0], diag)
    assert line_gap(v, diag) < 1e-12
    for v0, tau in (([1.0, 0.0], 1.0), ([0.0, 1.0], 0.05), ([0.3, -0.9], 0.5), ([-5.0, 0.01], 0.2)):
        plan = c.align_projective_angle([0.5, 4.0], v0, tau)
        _, v = replay_proj(plan.phases, tau, [0.5, 4.0], np.array(v0) / np.linalg.norm(v0))
        assert line_gap(v, diag) < 1e-9
        assert plan.steps >= 10
    assert c.align_projective_angle([0.5, 4.0], [0.0, 1.0], 0.05).steps > 10


def test_zeta_relation_and_selection():
    for tau in (0.05, 0.5, 1.0):
        z = c.solve_zeta(tau)
        assert z.residual < 1e-10
        assert c.zeta_relation_residual(z.zeta1, z.zeta2, tau) < 1e-10
        assert 0 < z.zeta1 < tau / TWO_PI and 0 < z.zeta2 < tau / TWO_PI
        assert z.score >= 1e-6
    with pytest.raises(ValueError):
        c.solve_zeta(1.5)


def test_zeta_edge():
    # at c_V = tau / (1 + tau) the horizontal coefficient reaches tau and zeta1 vanishes
    tau = 1.0
    cv = tau / (1 + tau)
    z2 = math.sqrt(tau ** 2 - cv ** 2) / TWO_PI
    assert c.zeta_relation_residual(0.0, z2, tau) < 1e-12
    z = c.solve_zeta(tau)
    assert z.c_v <= cv - 1e-6


def test_rigid_steps_translate_and_keep_diagonal():
    tau = 1.0
    z = c.solve_zeta(tau)
    diag = np.array([1.0, 1.0]) / math.sqrt(2)
    x, v = np.array([0.3, 5.0]), diag
    for _ in range(25):
        w = c._rigid_projective_step(x, tau, z)
        x2, v = projective_step(w, tau, x, v)
        np.testing.assert_allclose(wrap_signed(x2 - x), TWO_PI * z.vector, atol=1e-12)
        assert line_gap(v, diag) < 1e-9
        x = x2


def test_weyl_search():
    assert c.weyl_search([0.1, 0.2], [0, 0], [3, 3], 5.0) == 1
    z = np.array([math.sqrt(2) / 10, math.sqrt(3) / 10])
    x, y = np.array([0.1, 0.2]), np.array([4.0, 1.0])
    n = c.weyl_search(z, x, y, 0.05)
    assert n is not None
    d = distance(np.mod(x + TWO_PI * n * z, TWO_PI), y)
    assert d < 0.05
    # brute force re-scan agrees on minimality
    k = np.arange(1, n + 1)[:, None]
    dist = np.sqrt(np.sum(wrap_signed(x + TWO_PI * k * z - y) ** 2, axis=1))
    assert np.argmax(dist < 0.05) + 1 == n
    # rationally dependent rates stay on a line
    assert c.weyl_search([0.123, 0.123], [0, 0], [0, 3], 0.05, cap=20_000) is None
    with pytest.raises(ValueError):
        c.weyl_search(z, x, y, 0.0)


def test_projective_self_and_random():
    x, v = np.array([1.0, 2.0]), np.array([0.6, 0.8])
    plan = c.steer_projective(x, v, x, v, 0.5, 1.0)
    assert plan.success and plan.steps == 0
    rng = np.random.default_rng(3)
    for _ in range(3):
        x, xt = rng.random((2, 2)) * TWO_PI
        a, b = rng.random(2) * TWO_PI
        v, vt = np.array([math.cos(a), math.sin(a)]), np.array([math.cos(b), math.sin(b)])
        plan = c.steer_projective(x, v, xt, vt, 0.05, 1.0)
        xe, ve = replay_proj(plan.phases, 1.0, x, v)
        err = c.projective_distance(xe, ve, xt, vt)
        assert err < 0.05 and abs(err - plan.achieved_error) < 1e-9
        blocks = plan.diagnostics["blocks"]
        assert blocks["pullback"][1] == plan.steps
        assert blocks["pullback"][1] - blocks["pullback"][0] >= 10


def test_projective_tighter_eps_never_shorter():
    x, v, xt, vt = [0.4, 1.0], [1.0, 0.0], [2.0, 5.0], [0.3, 1.0]
    loose = c.steer_projective(x, v, xt, vt, 0.05, 1.0)
    tight = c.steer_projective(x, v, xt, vt, 0.025, 1.0)
    assert loose.success and tight.success
    assert tight.steps >= loose.steps


def test_two_point_random_and_blocks():
    rng = np.random.default_rng(4)
    for _ in range(5):
        x, y, xt, yt = rng.random((4, 2)) * TWO_PI
        plan = c.steer_two_point(x, y, xt, yt, 0.05, 1.0)
        xe, ye = replay(plan.phases, 1.0, x), replay(plan.phases, 1.0, y)
        err = distance(xe, xt) + distance(ye, yt)
        assert err < 0.05 and abs(err - plan.achieved_error) < 1e-9
        # separation is frozen at (delta1, 0) through the alignment and drift blocks
        lo, hi = plan.diagnostics["blocks"]["align"][0], plan.diagnostics["blocks"]["weyl"][1]
        px, py = replay(plan.phases[:lo], 1.0, x), replay(plan.phases[:lo], 1.0, y)
        for w in plan.phases[lo:hi]:
            px, py = apply_map(w, 1.0, px), apply_map(w, 1.0, py)
            sep = wrap_signed(px - py)
            assert abs(sep[0] - 1.0) < 1e-10 and abs(sep[1]) < 1e-10


def test_two_point_equal_second_coordinates():
    x, y, xt, yt = [0.5, 2.0], [1.7, 2.0], [4.0, 1.0], [5.0, 3.0]
    plan = c.steer_two_point(x, y, xt, yt, 0.05, 1.0)
    assert "zero_phase_prestep" in plan.diagnostics["log"]
    assert np.array_equal(plan.phases[0], [0.0, 0.0])
    err = distance(replay(plan.phases, 1.0, x), xt) + distance(replay(plan.phases, 1.0, y), yt)
    assert err < 0.05


def test_two_point_trivial_and_degenerate():
    plan = c.steer_two_point([1, 1], [2, 2], [1, 1], [2, 2.01], 0.05, 1.0)
    assert plan.success and plan.steps == 0
    with pytest.raises(ValueError):
        c.steer_two_point([1, 1], [1, 1], [2, 2], [3, 3], 0.05, 1.0)
    with pytest.raises(ValueError):
        c.steer_two_point([1, 1], [0, 1], [2, 2], [3, 3], 0.0, 1.0)
