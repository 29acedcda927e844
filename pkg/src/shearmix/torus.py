"""Alternating sinusoidal shear maps on the flat torus [0, 2pi)^2.

Points, phase pairs and tangent vectors are numpy arrays whose last axis has
length 2; every function broadcasts over leading axes.
"""
from __future__ import annotations

import math

import numpy as np

TWO_PI = 2.0 * np.pi

H = "H"
V = "V"


def wrap(angle):
    """Canonical representative of ``angle`` modulo 2pi, in [0, 2pi)."""
    with np.errstate(invalid="ignore"):
        r = np.mod(np.asarray(angle, dtype=float), TWO_PI)
    if r.ndim == 0:
        r = float(r)
        if not math.isfinite(r):
            raise ValueError("wrap: non-finite angle")
        # np.mod can round tiny negatives up to exactly 2pi
        return 0.0 if r >= TWO_PI else r
    if not np.isfinite(r).all():
        raise ValueError("wrap: non-finite angle")
    r[r >= TWO_PI] = 0.0
    return r


def wrap_signed(delta):
    """Representative of ``delta`` modulo 2pi in (-pi, pi]."""
    d = np.asarray(delta, dtype=float)
    r = np.pi - np.mod(np.pi - d, TWO_PI)
    return r if r.ndim else float(r)


def displacement(x, y):
    """Wrapped difference y - x, componentwise in (-pi, pi]."""
    return wrap_signed(np.asarray(y, dtype=float) - np.asarray(x, dtype=float))


def distance(x, y):
    """Flat torus distance."""
    d = displacement(x, y)
    return np.sqrt(np.sum(np.square(d), axis=-1))


def apply_shear(axis, beta, tau, x):
    """Horizontal (``"H"``) or vertical (``"V"``) shear with phase ``beta``."""
    x = np.asarray(x, dtype=float)
    out = np.array(x, dtype=float, copy=True)
    if axis == H:
        out[..., 0] = x[..., 0] + tau * np.sin(x[..., 1] - beta)
    elif axis == V:
        out[..., 1] = x[..., 1] + tau * np.sin(x[..., 0] - beta)
    else:
        raise ValueError(f"unknown shear axis {axis!r}")
    return wrap(out)


def _pack(x1, x2):
    if np.ndim(x1) == 0 and np.ndim(x2) == 0:
        return np.array([x1, x2])
    return np.stack(np.broadcast_arrays(x1, x2), axis=-1)


def apply_map(omega, tau, x):
    """One step: vertical shear with phase omega[1] after horizontal shear with omega[0]."""
    omega = np.asarray(omega, dtype=float)
    x = np.asarray(x, dtype=float)
    w1, w2 = omega[..., 0], omega[..., 1]
    x1 = wrap(x[..., 0] + tau * np.sin(x[..., 1] - w1))
    x2 = wrap(x[..., 1] + tau * np.sin(x1 - w2))
    return _pack(x1, x2)


def apply_inverse(omega, tau, x):
    """Inverse step, using f_w^{-1} = f^H_{w1+pi} o f^V_{w2+pi}."""
    omega = np.asarray(omega, dtype=float)
    x = np.asarray(x, dtype=float)
    w1, w2 = omega[..., 0], omega[..., 1]
    x2 = wrap(x[..., 1] - tau * np.sin(x[..., 0] - w2))
    x1 = wrap(x[..., 0] - tau * np.sin(x2 - w1))
    return _pack(x1, x2)


def shear_coefficients(omega, tau, x):
    """The scalars (C^H, C^V) that parametrize the one-step Jacobian."""
    omega = np.asarray(omega, dtype=float)
    x = np.asarray(x, dtype=float)
    w1, w2 = omega[..., 0], omega[..., 1]
    ch = tau * np.cos(x[..., 1] - w1)
    y1 = x[..., 0] + tau * np.sin(x[..., 1] - w1)
    cv = tau * np.cos(y1 - w2)
    return ch, cv


def jacobian(omega, tau, x):
    """D_x f_omega = [[1, C^H], [C^V, 1 + C^H C^V]], shape (..., 2, 2)."""
    ch, cv = shear_coefficients(omega, tau, x)
    ch, cv = np.broadcast_arrays(ch, cv)
    out = np.empty(ch.shape + (2, 2))
    out[..., 0, 0] = 1.0
    out[..., 0, 1] = ch
    out[..., 1, 0] = cv
    out[..., 1, 1] = 1.0 + ch * cv
    return out


def orbit(phases, tau, x):
    """Forward orbit x_0, ..., x_n for a sequence of phase pairs of shape (n, 2)."""
    phases = np.asarray(phases, dtype=float).reshape(-1, 2)
    x = np.asarray(x, dtype=float)
    out = np.empty((len(phases) + 1,) + x.shape)
    out[0] = x
    for k, w in enumerate(phases):
        x = apply_map(w, tau, x)
        out[k + 1] = x
    return out


def iterate(phases, tau, x):
    """Endpoint f^n(x) of the composition f_{w_n} o ... o f_{w_1}."""
    x = np.asarray(x, dtype=float)
    for w in np.asarray(phases, dtype=float).reshape(-1, 2):
        x = apply_map(w, tau, x)
    return x


def cocycle(phases, tau, x):
    """Ordered Jacobian product D_x f^n along the orbit of x (single point)."""
    x = np.asarray(x, dtype=float)
    m = np.eye(2)
    for w in np.asarray(phases, dtype=float).reshape(-1, 2):
        m = jacobian(w, tau, x) @ m
        x = apply_map(w, tau, x)
    return m
