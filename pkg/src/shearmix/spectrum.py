"""Power iteration for the twisted projective operator on T^2 x S^1.

The operator  P_q psi(x, v) = E |Df v|^{-q} psi(f(x), Df v/|Df v|)  is
discretized by collocation: each grid node averages over a frozen set of
``mc_samples`` phase draws, reading psi at the image point by periodic
trilinear interpolation.  Freezing the draws makes the discrete operator a
fixed positive matrix, so plain power iteration applies and ``q = 0`` gives an
exact Markov operator.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from .noise import DEFAULT_SEED, phases_at
from .torus import TWO_PI, apply_map, jacobian

SPECTRUM_STREAM = 2**40
_GROWTH_WINDOW = 10
_MIN_ITER = 12


@dataclass
class SpectralGrid:
    """Samples on the grid x = 2 pi (i/nx, j/ny), v = (cos t, sin t), t = 2 pi k/nv."""

    values: np.ndarray

    @property
    def nx(self) -> int:
        return self.values.shape[0]

    @property
    def ny(self) -> int:
        return self.values.shape[1]

    @property
    def nv(self) -> int:
        return self.values.shape[2]

    @classmethod
    def constant(cls, nx=32, ny=32, nv=64, value=1.0):
        return cls(np.full((nx, ny, nv), float(value)))

    def evaluate(self, x, v):
        """Periodic trilinear interpolation at points x (..., 2), directions v (..., 2)."""
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        theta = np.arctan2(v[..., 1], v[..., 0])
        gi = np.mod(x[..., 0], TWO_PI) * (self.nx / TWO_PI)
        gj = np.mod(x[..., 1], TWO_PI) * (self.ny / TWO_PI)
        gk = np.mod(theta, TWO_PI) * (self.nv / TWO_PI)
        return _interp_numpy(self.values, gi, gj, gk)


def _interp_numpy(values, gi, gj, gk):
    nx, ny, nv = values.shape
    i0 = np.floor(gi).astype(np.int64)
    j0 = np.floor(gj).astype(np.int64)
    k0 = np.floor(gk).astype(np.int64)
    fx, fy, fz = gi - i0, gj - j0, gk - k0
    out = 0.0
    for di, wx in ((0, 1 - fx), (1, fx)):
        for dj, wy in ((0, 1 - fy), (1, fy)):
            for dk, wz in ((0, 1 - fz), (1, fz)):
                out = out + wx * wy * wz * values[(i0 + di) % nx, (j0 + dj) % ny, (k0 + dk) % nv]
    return out


@numba.njit(cache=True)
def _apply_kernel(phi, gi, gj, gk, weight, mc):
    nx, ny, nv = phi.shape
    nodes = nx * ny * nv
    out = np.empty(nodes)
    flat = phi.ravel()
    for node in range(nodes):
        acc = 0.0
        base = node * mc
        for s in range(mc):
            a = gi[base + s]
            b = gj[base + s]
            c = gk[base + s]
            i0 = int(np.floor(a))
            j0 = int(np.floor(b))
            k0 = int(np.floor(c))
            fx = a - i0
            fy = b - j0
            fz = c - k0
            i0 %= nx
            j0 %= ny
            k0 %= nv
            i1 = (i0 + 1) % nx
            j1 = (j0 + 1) % ny
            k1 = (k0 + 1) % nv
            r00 = (i0 * ny + j0) * nv
            r01 = (i0 * ny + j1) * nv
            r10 = (i1 * ny + j0) * nv
            r11 = (i1 * ny + j1) * nv
            c00 = flat[r00 + k0] * (1 - fz) + flat[r00 + k1] * fz
            c01 = flat[r01 + k0] * (1 - fz) + flat[r01 + k1] * fz
            c10 = flat[r10 + k0] * (1 - fz) + flat[r10 + k1] * fz
            c11 = flat[r11 + k0] * (1 - fz) + flat[r11 + k1] * fz
            val = ((c00 * (1 - fy) + c01 * fy) * (1 - fx)
                   + (c10 * (1 - fy) + c11 * fy) * fx)
            acc += weight[base + s] * val
        out[node] = acc / mc
    return out.reshape(nx, ny, nv)


@dataclass
class ProjectiveImages:
    """Frozen Monte Carlo images of every grid node (grid-index coordinates)."""

    shape: tuple[int, int, int]
    mc_samples: int
    gi: np.ndarray
    gj: np.ndarray
    gk: np.ndarray
    log_stretch: np.ndarray

    def weights(self, q: float) -> np.ndarray:
        return np.exp(-q * self.log_stretch)

    def apply(self, phi: np.ndarray, q: float) -> np.ndarray:
        return _apply_kernel(phi, self.gi, self.gj, self.gk, self.weights(q), self.mc_samples)


def projective_images(tau: float, nx: int = 32, ny: int = 32, nv: int = 64,
                      mc_samples: int = 64, seed: int = DEFAULT_SEED,
                      chunk_nodes: int = 4096) -> ProjectiveImages:
    """Images of all nodes under ``mc_samples`` phase draws.

    Node ``(i, j, k)`` with flat index ``n`` uses pairs ``n*mc .. n*mc+mc-1``
    of the spectrum stream, so the discretization is a pure function of the
    arguments.
    """
    if min(nx, ny, nv) < 16:
        raise ValueError("grid resolutions must be >= 16")
    nodes = nx * ny * nv
    ii, jj, kk = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nv), indexing="ij")
    x = np.stack([ii.ravel() * TWO_PI / nx, jj.ravel() * TWO_PI / ny], axis=-1)
    theta = kk.ravel() * TWO_PI / nv
    v = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    total = nodes * mc_samples
    gi = np.empty(total)
    gj = np.empty(total)
    gk = np.empty(total)
    logn = np.empty(total)
    for start in range(0, nodes, chunk_nodes):
        stop = min(nodes, start + chunk_nodes)
        w = phases_at(seed, SPECTRUM_STREAM, start * mc_samples, (stop - start) * mc_samples)
        w = w.reshape(stop - start, mc_samples, 2)
        xs = x[start:stop, None, :]
        vs = v[start:stop, None, :]
        a = jacobian(w, tau, xs)
        xn = apply_map(w, tau, xs)
        u = np.einsum("...ij,...j->...i", a, np.broadcast_to(vs, w.shape))
        norm = np.sqrt(u[..., 0] ** 2 + u[..., 1] ** 2)
        th = np.mod(np.arctan2(u[..., 1], u[..., 0]), TWO_PI)
        sl = slice(start * mc_samples, stop * mc_samples)
        gi[sl] = (xn[..., 0] * (nx / TWO_PI)).ravel()
        gj[sl] = (xn[..., 1] * (ny / TWO_PI)).ravel()
        gk[sl] = (th * (nv / TWO_PI)).ravel()
        logn[sl] = np.log(norm).ravel()
    return ProjectiveImages((nx, ny, nv), mc_samples, gi, gj, gk, logn)


@dataclass
class PowerIterationResult:
    q: float
    r: float
    psi: SpectralGrid
    iterations: int
    residual: float
    converged: bool
    growth: list[float] = field(default_factory=list)


def power_iterate(images: ProjectiveImages, q: float, max_iter: int = 200,
                  tol: float = 1e-3) -> PowerIterationResult:
    phi = np.ones(images.shape)
    growth = []
    residual = np.inf
    it = 0
    while it < max_iter:
        it += 1
        nxt = images.apply(phi, q)
        g = float(np.max(np.abs(nxt)))
        nxt /= g
        residual = float(np.max(np.abs(nxt - phi)))
        growth.append(g)
        phi = nxt
        if residual < tol and it >= _MIN_ITER:
            break
    tail = np.asarray(growth[-_GROWTH_WINDOW:])
    r = float(np.exp(np.mean(np.log(tail))))
    psi = phi / phi.mean()
    return PowerIterationResult(q, r, SpectralGrid(psi), it, residual, residual < tol, growth)


def twisted_power_iteration(q: float, tau: float, nx: int = 32, ny: int = 32, nv: int = 64,
                            mc_samples: int = 64, max_iter: int = 200, tol: float = 1e-3,
                            seed: int = DEFAULT_SEED) -> PowerIterationResult:
    """Dominant eigenvalue r(q) and eigenfunction psi_q (normalized to mean 1)."""
    images = projective_images(tau, nx, ny, nv, mc_samples, seed)
    return power_iterate(images, q, max_iter, tol)


@dataclass
class MomentSpectrumReport:
    q_values: list[float]
    r_of_q: list[float]
    psi_q: list[SpectralGrid]
    iterations: list[int]
    residual: list[float]
    converged: list[bool]

    def rows(self):
        return list(zip(self.q_values, self.r_of_q, self.iterations, self.residual, self.converged))


def moment_spectrum(q_values, tau: float, nx: int = 32, ny: int = 32, nv: int = 64,
                    mc_samples: int = 64, max_iter: int = 200, tol: float = 1e-3,
                    seed: int = DEFAULT_SEED) -> MomentSpectrumReport:
    images = projective_images(tau, nx, ny, nv, mc_samples, seed)
    results = [power_iterate(images, float(q), max_iter, tol) for q in q_values]
    return MomentSpectrumReport(
        q_values=[res.q for res in results],
        r_of_q=[res.r for res in results],
        psi_q=[res.psi for res in results],
        iterations=[res.iterations for res in results],
        residual=[res.residual for res in results],
        converged=[res.converged for res in results],
    )


def moment_slope(report: MomentSpectrumReport, h: float) -> float:
    """Centered difference (log r(h) - log r(-h)) / 2h from a report containing +-h."""
    r = dict(zip(report.q_values, report.r_of_q))
    return (np.log(r[h]) - np.log(r[-h])) / (2 * h)


def psi_positivity_check(psi) -> tuple[float, bool]:
    """Minimum of psi over the grid and whether it is strictly positive."""
    values = psi.values if isinstance(psi, SpectralGrid) else np.asarray(psi)
    m = float(np.min(values))
    return m, m > 0
