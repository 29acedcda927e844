"""Passive-scalar mixing diagnostics.

The scalar is advected exactly: rho_n = rho_0 o (f^n)^{-1}, sampled on the
grid by pulling every node back through the inverse maps.  Fourier
coefficients use the normalized-measure convention
rho_k = (2 pi)^{-2} int rho e^{-i k.x} dx, approximated by the grid mean.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import i0

from .noise import DEFAULT_SEED, bootstrap_rng, derive_stream, next_phases, phases_at
from .spectrum import SpectralGrid
from .torus import TWO_PI, apply_inverse, apply_map, displacement

FLOOR_CONSTANT = 4.0
MIN_FIT_POINTS = 5
DRIFT_STREAM = 2**41
_DRIFT_BOOTSTRAP = 2
_PAIR_PURPOSE = 3


def grid_points(n: int) -> np.ndarray:
    """Nodes (2 pi i/n, 2 pi j/n), shape (n, n, 2), first index along x1."""
    t = np.arange(n) * (TWO_PI / n)
    g1, g2 = np.meshgrid(t, t, indexing="ij")
    return np.stack([g1, g2], axis=-1)


def cos_mode(k1: int = 1, k2: int = 0):
    def rho(x):
        return np.cos(k1 * x[..., 0] + k2 * x[..., 1])
    return rho


def von_mises_blob(center=(np.pi, np.pi), kappa: float = 4.0):
    """Smooth periodic bump with exactly zero mean."""
    c = np.asarray(center, dtype=float)
    norm = i0(kappa) ** 2

    def rho(x):
        x = np.asarray(x)
        return np.exp(kappa * (np.cos(x[..., 0] - c[0]) + np.cos(x[..., 1] - c[1]))) / norm - 1.0
    return rho


def backtrack(x, phases, tau):
    """(f^n)^{-1}(x): inverse maps applied from the last phase to the first."""
    x = np.asarray(x, dtype=float)
    for w in np.asarray(phases, dtype=float).reshape(-1, 2)[::-1]:
        x = apply_inverse(w, tau, x)
    return x


def advect_exact(rho0, phases, tau, n_grid: int) -> np.ndarray:
    """Samples of rho_0 o (f^n)^{-1} on the n_grid x n_grid nodes."""
    return rho0(backtrack(grid_points(n_grid), phases, tau))


def fourier_coefficients(field: np.ndarray) -> np.ndarray:
    """rho_k in numpy FFT ordering; axis 0 is k1, axis 1 is k2."""
    field = np.asarray(field, dtype=float)
    return np.fft.fft2(field) / field.size


def wavenumbers(n: int):
    k = np.fft.fftfreq(n, 1.0 / n)
    return np.meshgrid(k, k, indexing="ij")


def hs_norm(field: np.ndarray, s: float) -> float:
    """Homogeneous H^{-s} norm, sqrt(sum_{k != 0} |k|^{-2s} |rho_k|^2)."""
    if s <= 0:
        raise ValueError("s must be positive")
    coeffs = fourier_coefficients(field)
    k1, k2 = wavenumbers(coeffs.shape[0])
    ksq = k1 ** 2 + k2 ** 2
    ksq[0, 0] = 1.0
    weight = ksq ** (-s)
    weight[0, 0] = 0.0
    return float(np.sqrt(np.sum(weight * np.abs(coeffs) ** 2)))


def l2_norm(field: np.ndarray) -> float:
    """L^2 norm with respect to normalized Lebesgue measure."""
    return float(np.sqrt(np.mean(np.square(field))))


@dataclass
class MixingReport:
    s: float
    norms: np.ndarray
    fitted_alpha: float
    intercept: float
    fit_window: tuple[int, int]
    r_squared: float
    floor: float
    fit_ok: bool


def resolution_floor(rho0_l2: float, n_grid: int, s: float, constant: float = FLOOR_CONSTANT) -> float:
    return constant * (TWO_PI / n_grid) ** min(s, 1.0) * rho0_l2


def fit_decay(norms, floor: float, s: float = 1.0) -> MixingReport:
    """Log-linear least squares over the leading run of norms above ``floor``."""
    norms = np.asarray(norms, dtype=float)
    below = np.nonzero(norms < floor)[0]
    end = int(below[0]) - 1 if below.size else len(norms) - 1
    n = np.arange(end + 1)
    if end + 1 < MIN_FIT_POINTS:
        return MixingReport(s, norms, float("nan"), float("nan"), (0, end), float("nan"), floor, False)
    y = np.log(norms[: end + 1])
    slope, intercept = np.polyfit(n, y, 1)
    resid = y - (slope * n + intercept)
    sst = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / sst if sst > 0 else 1.0
    return MixingReport(s, norms, float(-slope), float(intercept), (0, end), float(r2), floor, True)


def norm_series(rho0, phases, tau, n_grid: int, s: float, every: int = 1, callback=None):
    """H^{-s} norms of rho_n for n = 0 .. len(phases); ``callback(n, field)`` sees every field."""
    phases = np.asarray(phases, dtype=float).reshape(-1, 2)
    nodes = grid_points(n_grid)
    norms = []
    for n in range(len(phases) + 1):
        field = rho0(backtrack(nodes, phases[:n], tau))
        norms.append(hs_norm(field, s))
        if callback is not None:
            callback(n, field)
    return np.asarray(norms)


def mixing_phases(seed: int, steps: int) -> np.ndarray:
    return next_phases(derive_stream(seed, 0), steps)[0]


def mixing_decay(rho0, tau: float, seed: int = DEFAULT_SEED, steps: int = 60, n_grid: int = 256,
                 s: float = 1.0, callback=None) -> MixingReport:
    """Per-step H^{-s} norms of the exactly advected scalar and their exponential fit."""
    if steps < 20:
        raise ValueError("mixing_decay needs steps >= 20")
    phases = mixing_phases(seed, steps)
    norms = norm_series(rho0, phases, tau, n_grid, s, callback=callback)
    floor = resolution_floor(l2_norm(rho0(grid_points(n_grid))), n_grid, s)
    return fit_decay(norms, floor, s)


def correlation_series(phi, psi, tau: float, seed: int = DEFAULT_SEED, n: int = 40,
                       quadrature: int = 512) -> np.ndarray:
    """Cor_k = int phi(x) psi(f^k x) dx / (2 pi)^2 for k = 0 .. n (signed)."""
    x = grid_points(quadrature)
    base = phi(x)
    phases = mixing_phases(seed, n) if n > 0 else np.zeros((0, 2))
    out = [float(np.mean(base * psi(x)))]
    for w in phases:
        x = apply_map(w, tau, x)
        out.append(float(np.mean(base * psi(x))))
    return np.asarray(out)


def correlation(phi, psi, tau: float, seed: int = DEFAULT_SEED, n: int = 40,
                quadrature: int = 512) -> float:
    return float(correlation_series(phi, psi, tau, seed, n, quadrature)[-1])


@dataclass
class DriftCheckReport:
    p: float
    s_star: float
    samples: int
    mean_log_ratio: float
    ci: float
    gamma_hat: float
    v_before: np.ndarray
    ev_after: np.ndarray
    log_ratio: np.ndarray


def drift_function(x, y, p: float, psi: SpectralGrid):
    """V(x, y) = d(x, y)^{-p} psi(x, w_hat(x, y)) near the diagonal."""
    w = displacement(x, y)
    d = np.sqrt(np.sum(w ** 2, axis=-1))
    return d ** (-p) * psi.evaluate(x, w / d[..., None])


def sample_near_diagonal(seed: int, pairs: int, s_star: float):
    """Pairs uniform in {0 < d(x, y) < s_star}."""
    rng = bootstrap_rng(seed, _PAIR_PURPOSE)
    x = rng.random((pairs, 2)) * TWO_PI
    r = s_star * np.sqrt(rng.random(pairs))
    r = np.where(r == 0.0, s_star * 0.5, r)
    ang = rng.random(pairs) * TWO_PI
    y = np.mod(x + r[:, None] * np.stack([np.cos(ang), np.sin(ang)], axis=-1), TWO_PI)
    return x, y


def two_point_drift_check(p: float, s_star: float, tau: float, pairs: int, mc_per_pair: int,
                          psi_p: SpectralGrid, seed: int = DEFAULT_SEED) -> DriftCheckReport:
    """Monte Carlo estimate of log(E V(f x, f y) / V(x, y)) over near-diagonal pairs."""
    if not 0 < p <= 0.5:
        raise ValueError("p must lie in (0, 0.5]")
    if not 0 < s_star < np.pi:
        raise ValueError("s_star must lie in (0, pi)")
    if np.min(psi_p.values) <= 0:
        raise ValueError("psi_p must be strictly positive")
    x, y = sample_near_diagonal(seed, pairs, s_star)
    v0 = drift_function(x, y, p, psi_p)
    w = phases_at(seed, DRIFT_STREAM, 0, pairs * mc_per_pair).reshape(pairs, mc_per_pair, 2)
    fx = apply_map(w, tau, x[:, None, :])
    fy = apply_map(w, tau, y[:, None, :])
    ratio = drift_function(fx, fy, p, psi_p) / v0[:, None]
    # averaging per-draw ratios keeps tau = 0 exact
    mean_ratio = ratio.mean(axis=1)
    log_ratio = np.log(mean_ratio)
    mlr = float(log_ratio.mean())
    rng = bootstrap_rng(seed, _DRIFT_BOOTSTRAP)
    idx = rng.integers(0, pairs, size=(2000, pairs))
    lo, hi = np.percentile(log_ratio[idx].mean(axis=1), [2.5, 97.5])
    return DriftCheckReport(p, s_star, pairs, mlr, float((hi - lo) / 2), float(np.exp(mlr)),
                            v0, v0 * mean_ratio, log_ratio)


def snapshot(field: np.ndarray) -> bytes:
    """Binary PGM (P5): min-max scaled to 0..255, rows ordered from x2 = 0."""
    field = np.asarray(field, dtype=float)
    n1, n2 = field.shape
    lo, hi = float(field.min()), float(field.max())
    if hi > lo:
        img = np.rint((field - lo) / (hi - lo) * 255.0).astype(np.uint8)
    else:
        img = np.full(field.shape, 128, dtype=np.uint8)
    header = f"P5\n{n1} {n2}\n255\n".encode("ascii")
    return header + np.ascontiguousarray(img.T).tobytes()
