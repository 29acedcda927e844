"""Rank certificates for the noise-to-state maps at explicit points.

Derivatives with respect to the phases are accumulated forward along the
orbit: each step propagates the tangents of the state and of the Jacobian
product and injects the sensitivity of its own two phases.  Every analytic
matrix is checked against central finite differences.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .torus import TWO_PI, apply_map, cocycle, displacement, iterate, wrap

DEFAULT_TOL = 1e-8
CERT_TAU = 1.0
ORACLE_TOL = 1e-4


@dataclass
class DerivativeMatrix:
    entries: np.ndarray
    row_labels: list[str]
    col_labels: list[str]

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]


@dataclass
class CertificateReport:
    name: str
    matrix: DerivativeMatrix
    singular_values: np.ndarray
    rank: int
    expected_rank: int
    oracle_discrepancy: float
    min_kept_sigma: float
    max_dropped_sigma: float
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return (self.rank == self.expected_rank
                and self.oracle_discrepancy < ORACLE_TOL
                and all(self.details.get("checks", {}).values()))


def _phase_labels(n):
    return [f"w{k + 1}^{i + 1}" for k in range(n) for i in range(2)]


def _step_tangent(w, dw, tau, x, dx):
    """One map step carrying tangents; returns new state, its tangent, A and dA."""
    a, b = w
    sh, chh = np.sin(x[1] - a), np.cos(x[1] - a)
    y1 = x[0] + tau * sh
    dy1 = dx[0] + tau * chh * (dx[1] - dw[0])
    ch = tau * chh
    dch = -tau * sh * (dx[1] - dw[0])
    sv, cvv = np.sin(y1 - b), np.cos(y1 - b)
    z2 = x[1] + tau * sv
    dz2 = dx[1] + tau * cvv * (dy1 - dw[1])
    cv = tau * cvv
    dcv = -tau * sv * (dy1 - dw[1])
    amat = np.array([[1.0, ch], [cv, 1.0 + ch * cv]])
    damat = np.stack([
        np.stack([np.zeros_like(dch), dch]),
        np.stack([dcv, dch * cv + ch * dcv]),
    ])
    return wrap(np.array([y1, z2])), np.stack([dy1, dz2]), amat, damat


def endpoint_derivatives(x, phases, tau):
    """Endpoint x_n, d x_n / d phases (2 x 2n), product P = D_x f^n and
    dP / d phases (2 x 2 x 2n)."""
    phases = np.asarray(phases, dtype=float).reshape(-1, 2)
    n = len(phases)
    m = 2 * n
    x = np.asarray(x, dtype=float)
    dx = np.zeros((2, m))
    p = np.eye(2)
    dp = np.zeros((2, 2, m))
    for k, w in enumerate(phases):
        dw = np.zeros((2, m))
        dw[0, 2 * k] = 1.0
        dw[1, 2 * k + 1] = 1.0
        x, dx, amat, damat = _step_tangent(w, dw, tau, x, dx)
        dp = np.einsum("ijm,jk->ikm", damat, p) + np.einsum("ij,jkm->ikm", amat, dp)
        p = amat @ p
    return x, dx, p, dp


def d_phi(x, phases, tau) -> DerivativeMatrix:
    """Derivative of the endpoint f^n(x) with respect to all 2n phases."""
    _, dx, _, _ = endpoint_derivatives(x, phases, tau)
    return DerivativeMatrix(dx, ["x1", "x2"], _phase_labels(dx.shape[1] // 2))


def d_phi_hat(x, phases, tau) -> DerivativeMatrix:
    """Derivative of the flattened product (a, b, c, d) = D_x f^n."""
    _, _, _, dp = endpoint_derivatives(x, phases, tau)
    return DerivativeMatrix(dp.reshape(4, -1), ["a", "b", "c", "d"],
                            _phase_labels(dp.shape[2] // 2))


def projective_endpoint_derivative(x, v, phases, tau):
    """Ambient 4-vector (x_n, v_n) and its derivative (4 x 2n), v_n = Pv/|Pv|."""
    xn, dx, p, dp = endpoint_derivatives(x, phases, tau)
    v = np.asarray(v, dtype=float)
    u = p @ v
    nu = np.linalg.norm(u)
    vn = u / nu
    du = np.einsum("ijm,j->im", dp, v)
    dvn = (du - np.outer(vn, vn @ du)) / nu
    return np.concatenate([xn, vn]), np.vstack([dx, dvn])


def svd_rank(m, tol: float = DEFAULT_TOL):
    """Rank as the count of singular values above ``tol * sigma_max``."""
    if not 0.0 < tol < 1.0:
        raise ValueError("tol must lie in (0, 1)")
    a = m.entries if isinstance(m, DerivativeMatrix) else np.asarray(m, dtype=float)
    sigma = np.linalg.svd(a, compute_uv=False)
    smax = sigma[0] if sigma.size else 0.0
    if smax == 0.0:
        return 0, sigma
    return int(np.sum(sigma > tol * smax)), sigma


def kernel_basis(a, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Orthonormal kernel basis from the right singular vectors."""
    a = np.asarray(a, dtype=float)
    _, sigma, vt = np.linalg.svd(a)
    rank = int(np.sum(sigma > tol * sigma[0])) if sigma.size and sigma[0] > 0 else 0
    return vt[rank:].T


def central_difference(fun, p0, h=1e-6, diff=None):
    """Central finite-difference Jacobian of ``fun`` at ``p0``.

    ``diff(a, b)`` measures ``a - b``; pass a wrapped difference for outputs
    that live on the torus.
    """
    p0 = np.asarray(p0, dtype=float)
    diff = diff or (lambda a, b: np.asarray(a) - np.asarray(b))
    cols = []
    for j in range(p0.size):
        e = np.zeros_like(p0)
        e.flat[j] = h
        cols.append(np.ravel(diff(fun(p0 + e), fun(p0 - e))) / (2 * h))
    return np.stack(cols, axis=1)


def relative_discrepancy(analytic, oracle) -> float:
    scale = max(np.max(np.abs(analytic)), 1e-300)
    return float(np.max(np.abs(analytic - oracle)) / scale)


def _torus_diff(a, b):
    return -displacement(a, b)


def _phi_oracle(x, phases, tau, h=1e-6):
    flat = np.asarray(phases, dtype=float).ravel()
    return central_difference(lambda p: iterate(p.reshape(-1, 2), tau, x), flat, h, _torus_diff)


def _phi_hat_oracle(x, phases, tau, h=1e-6):
    flat = np.asarray(phases, dtype=float).ravel()
    return central_difference(lambda p: cocycle(p.reshape(-1, 2), tau, x).ravel(), flat, h)


def _projective_value(x, v, phases, tau):
    xn = iterate(phases, tau, x)
    u = cocycle(phases, tau, x) @ np.asarray(v, dtype=float)
    return np.concatenate([xn, u / np.linalg.norm(u)])


def _mixed_diff(a, b):
    return np.concatenate([-displacement(a[:2], b[:2]), a[2:] - b[2:]])


def paper_entry_gap(computed, displayed) -> float:
    """Smallest max-abs entry gap over column permutations and sign flips.

    Informational only: the displayed matrices do not follow a single stated
    convention, so this never gates a certificate.
    """
    c = np.asarray(computed, dtype=float)
    d = np.asarray(displayed, dtype=float)
    if c.shape != d.shape:
        return float("nan")
    best = np.inf
    ncol = c.shape[1]
    perms = itertools.permutations(range(ncol)) if ncol <= 6 else [tuple(range(ncol))]
    for perm in perms:
        cp = c[:, perm]
        gap = np.max(np.minimum(np.abs(cp - d), np.abs(cp + d)).max(axis=0))
        best = min(best, gap)
    return float(best)


def _report(name, matrix, expected, oracle, tol, details=None):
    rank, sigma = svd_rank(matrix, tol)
    kept = sigma[:rank]
    dropped = sigma[rank:]
    return CertificateReport(
        name=name,
        matrix=matrix,
        singular_values=sigma,
        rank=rank,
        expected_rank=expected,
        oracle_discrepancy=relative_discrepancy(matrix.entries, oracle),
        min_kept_sigma=float(kept.min()) if kept.size else 0.0,
        max_dropped_sigma=float(dropped.max()) if dropped.size else 0.0,
        details=details or {},
    )


# Points at which the ranks are certified.
ONE_POINT_X = np.array([0.0, 0.0])
ONE_POINT_PHASES = np.array([[0.0, 0.0]])
ONE_POINT_DISPLAYED = np.array([[1.0, 1.0], [1.0, 2.0]])

PROJ_X = np.array([0.0, 0.0])
PROJ_V = np.array([1.0, 0.0])
PROJ_PHASES = np.array([[0.0, 0.0], [np.pi / 2, np.pi - 1.0]])
PROJ_DISPLAYED = np.array([[-1, 0, 0, 0], [0, -1, 0, 1], [0, 0, 0, 0], [1, 1, 1, 0]], float)
GOLDEN_V = np.array([np.sqrt(5 - np.sqrt(5)), np.sqrt(5 + np.sqrt(5))]) / np.sqrt(10)

TWO_POINT_X = np.array([np.pi, np.pi])
TWO_POINT_Y = np.array([0.0, 0.0])
TWO_POINT_PHASES = np.array([[0.0, 0.0], [0.0, 0.0]])
TWO_POINT_DISPLAYED = np.array(
    [[2, -1, 1, 0], [-3, 2, -1, 1], [-2, -1, -1, 0], [-3, -2, -1, -1]], float)

FURST_X = np.array([np.pi / 2, np.pi])
FURST_PHASES = np.array([
    [0.0, 0.0],
    [3 * np.pi / 2 + 1, np.pi / 2 - 1],
    [3 * np.pi / 2 + 1, 5 * np.pi / 2 - 2],
])
FURST_DPHI_DISPLAYED = np.array([[1, 0, 0, 0, 0, 0], [2, 0, 0, -1, 0, -1]], float)
FURST_M_DISPLAYED = np.array([
    [1, 0, 0, -1, -1, 0],
    [0, 0, -1, 0, 0, 0],
    [0, 1, 0, -1, -1, 0],
    [1, -1, -2, 0, 0, 0],
], float)


def certify_one_point_small(tau: float = CERT_TAU, tol: float = DEFAULT_TOL,
                            x=ONE_POINT_X) -> CertificateReport:
    """Submersion of the one-step map w -> f_w(x) plus the fixed point x = f_(0,0)(x)."""
    x = np.asarray(x, dtype=float)
    m = d_phi(x, ONE_POINT_PHASES, tau)
    oracle = _phi_oracle(x, ONE_POINT_PHASES, tau)
    fixed = float(np.max(np.abs(displacement(x, apply_map(ONE_POINT_PHASES[0], tau, x)))))
    checks = {}
    if np.array_equal(x, ONE_POINT_X):
        checks["fixed_point"] = fixed < 1e-12
    details = {
        "fixed_point_residual": fixed,
        "paper_entry_gap": paper_entry_gap(m.entries, ONE_POINT_DISPLAYED),
        "checks": checks,
    }
    return _report("one_point_small", m, 2, oracle, tol, details)


def certify_projective_small(tau: float = CERT_TAU, tol: float = DEFAULT_TOL) -> CertificateReport:
    """Rank 3 of the two-step noise-to-(x, v) map; golden-direction fixed point."""
    _, deriv = projective_endpoint_derivative(PROJ_X, PROJ_V, PROJ_PHASES, tau)
    m = DerivativeMatrix(deriv, ["x1", "x2", "v1", "v2"], _phase_labels(2))
    flat = PROJ_PHASES.ravel()
    oracle = central_difference(
        lambda p: _projective_value(PROJ_X, PROJ_V, p.reshape(-1, 2), tau), flat, 1e-6, _mixed_diff)
    w0 = np.zeros(2)
    xs = apply_map(w0, tau, PROJ_X)
    u = cocycle(w0[None], tau, PROJ_X) @ GOLDEN_V
    vs = u / np.linalg.norm(u)
    residual = float(max(np.max(np.abs(displacement(PROJ_X, xs))), np.max(np.abs(vs - GOLDEN_V))))
    details = {
        "fixed_point_residual": residual,
        "paper_entry_gap": paper_entry_gap(m.entries, PROJ_DISPLAYED),
        "checks": {"fixed_point": residual < 1e-12},
    }
    return _report("projective_small", m, 3, oracle, tol, details)


def two_point_derivative(x, y, phases, tau) -> DerivativeMatrix:
    _, dx, _, _ = endpoint_derivatives(x, phases, tau)
    _, dy, _, _ = endpoint_derivatives(y, phases, tau)
    n = dx.shape[1] // 2
    return DerivativeMatrix(np.vstack([dx, dy]), ["x1", "x2", "y1", "y2"], _phase_labels(n))


def certify_two_point_small(tau: float = CERT_TAU, tol: float = DEFAULT_TOL) -> CertificateReport:
    """Invertibility of the two-step noise-to-pair map; common fixed points."""
    m = two_point_derivative(TWO_POINT_X, TWO_POINT_Y, TWO_POINT_PHASES, tau)
    flat = TWO_POINT_PHASES.ravel()

    def pair(p):
        ph = p.reshape(-1, 2)
        return np.concatenate([iterate(ph, tau, TWO_POINT_X), iterate(ph, tau, TWO_POINT_Y)])

    def diff(a, b):
        return -displacement(a.reshape(2, 2), b.reshape(2, 2)).ravel()

    oracle = central_difference(pair, flat, 1e-6, diff)
    w0 = TWO_POINT_PHASES[0]
    res = max(
        float(np.max(np.abs(displacement(TWO_POINT_X, apply_map(w0, tau, TWO_POINT_X))))),
        float(np.max(np.abs(displacement(TWO_POINT_Y, apply_map(w0, tau, TWO_POINT_Y))))),
    )
    det = float(np.linalg.det(m.entries))
    details = {
        "fixed_point_residual": res,
        "determinant": det,
        "condition_number": float(np.linalg.cond(m.entries)),
        "paper_entry_gap": paper_entry_gap(m.entries, TWO_POINT_DISPLAYED),
        "checks": {"fixed_point": res < 1e-12, "nonzero_det": abs(det) > 0},
    }
    return _report("two_point_small", m, 4, oracle, tol, details)


def certify_furstenberg_n3(tau: float = CERT_TAU, tol: float = DEFAULT_TOL) -> CertificateReport:
    """Rank of the Jacobian-derivative restricted to the kernel of the endpoint derivative.

    The reported matrix is M K (4 x 4); full-row submersion of the endpoint map
    and kernel validity are recorded in ``details``.
    """
    dphi = d_phi(FURST_X, FURST_PHASES, tau)
    mhat = d_phi_hat(FURST_X, FURST_PHASES, tau)
    rank_phi, sigma_phi = svd_rank(dphi, tol)
    k = kernel_basis(dphi.entries, tol)
    mk = mhat.entries @ k
    oracle_phi = _phi_oracle(FURST_X, FURST_PHASES, tau)
    oracle_hat = _phi_hat_oracle(FURST_X, FURST_PHASES, tau)
    disc = max(relative_discrepancy(dphi.entries, oracle_phi),
               relative_discrepancy(mhat.entries, oracle_hat))
    kernel_residual = float(np.max(np.abs(dphi.entries @ k))) if k.size else 0.0
    details = {
        "rank_dphi": rank_phi,
        "sigma_dphi": sigma_phi,
        "kernel_dim": k.shape[1],
        "kernel_residual": kernel_residual,
        "d_phi": dphi,
        "d_phi_hat": mhat,
        "paper_entry_gap_dphi": paper_entry_gap(dphi.entries, FURST_DPHI_DISPLAYED),
        "paper_entry_gap_M": paper_entry_gap(mhat.entries, FURST_M_DISPLAYED),
        "checks": {"rank_dphi": rank_phi == 2, "kernel": kernel_residual < 1e-10},
    }
    mk_matrix = DerivativeMatrix(mk, ["a", "b", "c", "d"], [f"k{i + 1}" for i in range(k.shape[1])])
    rep = _report("furstenberg_n3", mk_matrix, 3, mk, tol, details)
    rep.oracle_discrepancy = disc
    return rep


def all_certificates(tol: float = DEFAULT_TOL) -> list[CertificateReport]:
    return [
        certify_one_point_small(tol=tol),
        certify_projective_small(tol=tol),
        certify_two_point_small(tol=tol),
        certify_furstenberg_n3(tol=tol),
    ]


def det_tangent_residual(x, phases, tau) -> float:
    """Max |d(det)| over columns of d_phi_hat; zero because det D_x f^n is 1."""
    _, _, p, dp = endpoint_derivatives(x, phases, tau)
    a, b, c, d = p.ravel()
    cof = np.array([d, -c, -b, a])
    return float(np.max(np.abs(cof @ dp.reshape(4, -1))))


__all__ = [
    "CERT_TAU",
    "CertificateReport",
    "DerivativeMatrix",
    "TWO_PI",
    "all_certificates",
    "central_difference",
    "certify_furstenberg_n3",
    "certify_one_point_small",
    "certify_projective_small",
    "certify_two_point_small",
    "d_phi",
    "d_phi_hat",
    "det_tangent_residual",
    "endpoint_derivatives",
    "kernel_basis",
    "projective_endpoint_derivative",
    "svd_rank",
    "two_point_derivative",
]
