import math

import numpy as np
import pytest

from shearmix.cocycle import lyapunov_estimate, projective_step
from shearmix.torus import TWO_PI, jacobian

GOLDEN = np.array([math.sqrt(5 - math.sqrt(5)), math.sqrt(5 + math.sqrt(5))]) / math.sqrt(10)


def test_projective_fixed_point():
    x, v = projective_step([0.0, 0.0], 1.0, [0.0, 0.0], GOLDEN)
    np.testing.assert_allclose(x, [0, 0], atol=1e-12)
    np.testing.assert_allclose(v, GOLDEN, atol=1e-12)


def test_projective_tau_zero_keeps_direction():
    rng = np.random.default_rng(0)
    v = rng.normal(size=(50, 2))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    _, v2 = projective_step(rng.random((50, 2)) * TWO_PI, 0.0, rng.random((50, 2)) * TWO_PI, v)
    np.testing.assert_allclose(v2, v, atol=1e-15)


def test_projective_matches_jacobian_and_is_unit():
    rng = np.random.default_rng(1)
    for _ in range(100):
        w, x = rng.random(2) * TWO_PI, rng.random(2) * TWO_PI
        v = rng.normal(size=2)
        v /= np.linalg.norm(v)
        _, v2 = projective_step(w, 1.3, x, v)
        u = jacobian(w, 1.3, x) @ v
        np.testing.assert_allclose(v2, u / np.linalg.norm(u), atol=1e-14)
        assert abs(v2 @ v2 - 1) < 1e-12


def test_lyapunov_tau_zero_exact():
    est = lyapunov_estimate(0.0, 1000, ensemble=2)
    assert est.lambda1 == 0.0 and est.lambda2 == 0.0 and est.ci_halfwidth == 0.0


@pytest.mark.parametrize("kwargs", [dict(steps=999), dict(steps=1000, ensemble=0), dict(steps=1005)])
def test_lyapunov_rejects_bad_sizes(kwargs):
    with pytest.raises(ValueError):
        lyapunov_estimate(1.0, **kwargs)


def test_lyapunov_short_run_consistency():
    est = lyapunov_estimate(1.0, 20_000, ensemble=8)
    assert est.lambda1 > 0
    assert est.lambda1 >= est.lambda2
    assert est.lambda1 - 3 * est.ci_halfwidth > 0
    # frame cross-check and volume preservation
    assert abs(est.lambda1_frame - est.lambda1) < 2 * est.ci_halfwidth
    assert abs(est.lambda_sum_frame) < est.ci_halfwidth
    other = lyapunov_estimate(1.0, 20_000, ensemble=8, v0=(0.3, 1.0))
    assert abs(other.lambda1 - est.lambda1) < 3 * est.ci_halfwidth


def test_lyapunov_deterministic():
    a = lyapunov_estimate(0.7, 1000, seed=3, ensemble=3)
    b = lyapunov_estimate(0.7, 1000, seed=3, ensemble=3)
    assert a.lambda1 == b.lambda1 and a.ci_halfwidth == b.ci_halfwidth
