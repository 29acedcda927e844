import math

import numpy as np
import pytest

from shearmix import certificates as c
from shearmix.torus import TWO_PI, cocycle, jacobian


def test_svd_rank_examples():
    assert c.svd_rank(np.eye(2))[0] == 2
    rank, sigma = c.svd_rank(np.array([[1.0, 1.0], [1.0, 2.0]]))
    assert rank == 2
    np.testing.assert_allclose(sorted(sigma), [(3 - math.sqrt(5)) / 2, (3 + math.sqrt(5)) / 2])
    assert c.svd_rank(np.array([[1.0, 1.0], [2.0, 2.0]]))[0] == 1
    rank, sigma = c.svd_rank(np.zeros((2, 3)))
    assert rank == 0 and np.all(sigma == 0)


def test_d_phi_one_step_rank_and_oracle():
    m = c.d_phi([0.0, 0.0], np.zeros((1, 2)), 1.0)
    assert (m.rows, m.cols) == (2, 2)
    assert c.svd_rank(m)[0] == 2


def test_zero_tau_gives_zero_derivatives():
    rng = np.random.default_rng(0)
    ph = rng.random((3, 2)) * TWO_PI
    assert np.all(c.d_phi([1.0, 2.0], ph, 0.0).entries == 0)
    assert np.all(c.d_phi_hat([1.0, 2.0], ph, 0.0).entries == 0)


@pytest.mark.parametrize("n", [1, 2, 4])
def test_random_points_match_oracles(n):
    rng = np.random.default_rng(n)
    for _ in range(25):
        x = rng.random(2) * TWO_PI
        ph = rng.random((n, 2)) * TWO_PI
        tau = 0.2 + rng.random() * 1.5
        a = c.d_phi(x, ph, tau).entries
        assert c.relative_discrepancy(a, c._phi_oracle(x, ph, tau, h=1e-5)) < 1e-5
        b = c.d_phi_hat(x, ph, tau).entries
        assert c.relative_discrepancy(b, c._phi_hat_oracle(x, ph, tau, h=1e-5)) < 1e-5


def test_d_phi_hat_one_step_matches_jacobian_differences():
    x, w, tau, h = np.array([0.7, 4.0]), np.array([1.0, 2.5]), 0.9, 1e-6
    m = c.d_phi_hat(x, w[None], tau).entries
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        fd = (jacobian(w + e, tau, x) - jacobian(w - e, tau, x)).ravel() / (2 * h)
        np.testing.assert_allclose(m[:, j], fd, atol=1e-8)


def test_endpoint_product_is_cocycle():
    rng = np.random.default_rng(5)
    x, ph = rng.random(2) * TWO_PI, rng.random((5, 2)) * TWO_PI
    _, _, p, _ = c.endpoint_derivatives(x, ph, 1.0)
    np.testing.assert_allclose(p, cocycle(ph, 1.0, x), atol=1e-12)


def test_det_tangent():
    rng = np.random.default_rng(6)
    for n in (1, 3, 5):
        assert c.det_tangent_residual(rng.random(2) * TWO_PI, rng.random((n, 2)) * TWO_PI, 1.0) < 1e-10


def test_one_point_certificate():
    rep = c.certify_one_point_small()
    assert rep.passed and rep.rank == 2 and rep.expected_rank == 2
    assert rep.oracle_discrepancy < 1e-5
    assert rep.details["fixed_point_residual"] < 1e-12
    perturbed = c.certify_one_point_small(x=[0.3, 0.3])
    assert perturbed.rank == 2


def test_projective_certificate():
    rep = c.certify_projective_small()
    assert rep.passed and rep.rank == 3
    assert rep.details["fixed_point_residual"] < 1e-12
    assert rep.oracle_discrepancy < 1e-4


def test_golden_direction_is_fixed():
    from shearmix.cocycle import projective_step
    v = np.array([math.sqrt(5 - math.sqrt(5)), math.sqrt(5 + math.sqrt(5))]) / math.sqrt(10)
    x2, v2 = projective_step([0.0, 0.0], 1.0, [0.0, 0.0], v)
    np.testing.assert_allclose(v2, v, atol=1e-12)
    np.testing.assert_array_equal(x2, [0.0, 0.0])


def test_two_point_certificate():
    rep = c.certify_two_point_small()
    assert rep.passed and rep.rank == 4
    assert abs(rep.details["determinant"]) > 0
    assert np.isfinite(rep.details["condition_number"])
    assert rep.details["fixed_point_residual"] < 1e-12


def test_furstenberg_certificate():
    rep = c.certify_furstenberg_n3()
    assert rep.passed
    assert rep.details["rank_dphi"] == 2
    assert rep.rank == 3
    assert rep.details["kernel_dim"] == 4
    assert rep.details["kernel_residual"] < 1e-10
    assert rep.oracle_discrepancy < 1e-4


@pytest.mark.parametrize("tol", [1e-10, 1e-8, 1e-6])
def test_ranks_stable_in_tolerance(tol):
    assert [r.rank for r in c.all_certificates(tol)] == [2, 3, 4, 3]


def test_failed_certificate_reports_failure():
    rep = c.certify_one_point_small(tau=0.0)
    assert rep.rank == 0 and not rep.passed
