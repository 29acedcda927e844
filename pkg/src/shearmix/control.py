"""Constructive steering plans for the one-point, projective and two-point chains.

Every planner advances its own copy of the state with the same map functions
that a replay uses, so each phase is chosen against the state it will really
act on.  Plans are checked by replay (``replay_*``); nothing downstream trusts
the planner's bookkeeping.

Shear primitives are written as  x_a <- x_a + amp * sin(x_o - beta)  with
``amp = +tau`` for forward steps and ``amp = -tau`` for the two halves of an
inverse step (vertical half first).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .certificates import projective_endpoint_derivative, two_point_derivative
from .cocycle import projective_step
from .torus import (
    H,
    TWO_PI,
    V,
    apply_inverse,
    apply_map,
    displacement,
    distance,
    wrap,
    wrap_signed,
)

DEFAULT_DELTA1 = 1.0
WEYL_CAP = 10**6
ALIGN_STEPS = 10
LANDING_STEPS = 3
DIAG = np.array([1.0, 1.0]) / math.sqrt(2.0)
_ZETA_MARGIN = 1e-6
_RATIONAL_Q = 50
_DEGENERATE_SIN = 0.25


@dataclass
class SteeringPlan:
    phases: np.ndarray
    achieved_error: float
    success: bool = True
    message: str = ""
    diagnostics: dict = field(default_factory=dict)

    @property
    def steps(self) -> int:
        return len(self.phases)


def _plan(phases, error, success=True, message="", **diagnostics):
    arr = np.asarray(phases, dtype=float).reshape(-1, 2)
    return SteeringPlan(arr, float(error), success, message, diagnostics)


# ---------------------------------------------------------------- one point

def one_point_steps(tau: float) -> int:
    return math.ceil(4 * math.pi / tau)


def _translate_phase(coord_other, t, amp):
    """beta with amp * sin(coord_other - beta) = t (principal branch)."""
    return wrap(coord_other - math.asin(max(-1.0, min(1.0, t / amp))))


def steer_one_point(x, y, tau: float) -> SteeringPlan:
    """Exact steering x -> y in ceil(4 pi / tau) steps of equal translation."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if tau <= 0:
        err = float(distance(x, y))
        if err == 0.0:
            return _plan([], 0.0)
        return _plan([], err, False, "tau = 0: only the identity is reachable")
    n = one_point_steps(tau)
    s = wrap(x)
    phases = []
    for k in range(n):
        tbar = displacement(s, y) / (n - k)
        b1 = _translate_phase(s[1], tbar[0], tau)
        mid1 = wrap(s[0] + tau * math.sin(s[1] - b1))
        b2 = _translate_phase(mid1, tbar[1], tau)
        w = np.array([b1, b2])
        phases.append(w)
        s = apply_map(w, tau, s)
    return _plan(phases, distance(s, y))


def replay_one_point(phases, tau, x):
    x = np.asarray(x, dtype=float)
    for w in np.asarray(phases).reshape(-1, 2):
        x = apply_map(w, tau, x)
    return x


# ----------------------------------------------------------- rigid motions

def rigid_phase(x, y, gamma: float, axis: str) -> float:
    """Phase centring a shear between x and y, offset by ``gamma``.

    For axis H the horizontal separation changes by 2 tau sin([x-y]_2 / 2) cos(gamma);
    gamma = pi/2 leaves it unchanged.  Raw coordinate differences are used.
    """
    if axis == H:
        return float(wrap((x[1] + y[1]) / 2 - gamma))
    if axis == V:
        return float(wrap((x[0] + y[0]) / 2 - gamma))
    raise ValueError(f"unknown axis {axis!r}")


def _shear(axis, amp, beta, p):
    """Primitive shear on an array of points (..., 2), bit-compatible with the maps."""
    p = np.array(p, dtype=float, copy=True)
    if axis == H:
        p[..., 0] = wrap(p[..., 0] + amp * np.sin(p[..., 1] - beta))
    else:
        p[..., 1] = wrap(p[..., 1] + amp * np.sin(p[..., 0] - beta))
    return p


def _other(axis):
    return 1 if axis == H else 0


def _idx(axis):
    return 0 if axis == H else 1


def _separation_phase(axis, amp, x, y, change):
    """Rigid phase producing ``change`` in the separation along ``axis``."""
    o = _other(axis)
    s = math.sin((x[o] - y[o]) / 2)
    denom = 2 * amp * s
    c = 0.0 if change == 0.0 else max(-1.0, min(1.0, change / denom))
    return rigid_phase(x, y, math.acos(c), axis)


_FORWARD = ((H, 1.0), (V, 1.0))
_BACKWARD = ((V, -1.0), (H, -1.0))


def _pair_step(pts, goals, tau, direction):
    """One map step on a point pair; ``goals[axis]`` is a callable(pts) -> beta.

    Returns the phase pair and the new state, recomputed with the map itself.
    """
    order = _FORWARD if direction == "forward" else _BACKWARD
    mid = pts
    beta = {}
    for axis, sign in order:
        beta[axis] = goals[axis](mid, sign * tau)
        mid = _shear(axis, sign * tau, beta[axis], mid)
    w = np.array([beta[H], beta[V]])
    stepper = apply_map if direction == "forward" else apply_inverse
    return w, stepper(w, tau, pts)


def _keep(axis):
    def goal(pts, amp):
        return rigid_phase(pts[0], pts[1], math.pi / 2, axis)
    return goal


def _achieve_separation(pts, delta1, tau, direction, phases, log):
    """Drive the pair to separation (delta1, 0); appends to ``phases``."""
    # make the vertical separation usable for horizontal adjustment
    guard = 0
    while abs(math.sin((pts[0, 1] - pts[1, 1]) / 2)) < _DEGENERATE_SIN:
        if guard == 0 and direction == "forward" and pts[0, 1] == pts[1, 1]:
            w = np.zeros(2)
            pts = apply_map(w, tau, pts)
            log.append("zero_phase_prestep")
        else:
            def push(p, amp):
                d = wrap_signed(p[0, 1] - p[1, 1])
                gamma = 0.0 if d >= 0 else math.pi
                if (p[0, 0] - p[1, 0]) * amp < 0:
                    gamma = math.pi - gamma
                return rigid_phase(p[0], p[1], gamma, V)
            w, pts = _pair_step(pts, {H: _keep(H), V: push}, tau, direction)
            log.append("separation_prestep")
        phases.append(w)
        guard += 1
        if guard > 1000:
            raise RuntimeError("could not separate the pair vertically")

    # horizontal separation -> delta1, vertical separation preserved
    rem = wrap_signed(delta1 - (pts[0, 0] - pts[1, 0]))
    nsteps = max(1, math.ceil(abs(rem) / (2 * tau * abs(math.sin((pts[0, 1] - pts[1, 1]) / 2))) * 1.0001))
    for k in range(nsteps):
        def adjust(p, amp, left=nsteps - k):
            r = wrap_signed(delta1 - (p[0, 0] - p[1, 0]))
            return _separation_phase(H, amp, p[0], p[1], r / left)
        w, pts = _pair_step(pts, {H: adjust, V: _keep(V)}, tau, direction)
        phases.append(w)

    # vertical separation -> 0, horizontal separation preserved
    rem = wrap_signed(-(pts[0, 1] - pts[1, 1]))
    nsteps = max(1, math.ceil(abs(rem) / (2 * tau * abs(math.sin(delta1 / 2))) * 1.0001))
    for k in range(nsteps):
        def adjust(p, amp, left=nsteps - k):
            r = wrap_signed(-(p[0, 1] - p[1, 1]))
            return _separation_phase(V, amp, p[0], p[1], r / left)
        w, pts = _pair_step(pts, {H: _keep(H), V: adjust}, tau, direction)
        phases.append(w)
    return pts


# --------------------------------------------------------------- Weyl scans

def weyl_search(zeta, x, y, eps: float, cap: int = WEYL_CAP, start: int = 1,
                chunk: int = 1 << 16):
    """Smallest n in [start, cap] with d(x + 2 pi n zeta, y) < eps, else None.

    Works in any dimension; ``zeta`` may be a :class:`ZetaPair`.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    z = np.atleast_1d(np.asarray(zeta.vector if isinstance(zeta, ZetaPair) else zeta, dtype=float))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    off = wrap_signed(x - y)
    for lo in range(start, cap + 1, chunk):
        n = np.arange(lo, min(cap, lo + chunk - 1) + 1, dtype=float)
        d = wrap_signed(off[None, :] + TWO_PI * n[:, None] * z[None, :])
        hit = np.nonzero(np.sqrt(np.sum(d * d, axis=1)) < eps)[0]
        if hit.size:
            return int(n[hit[0]])
    return None


@dataclass
class ZetaPair:
    zeta1: float
    zeta2: float
    c_h: float
    c_v: float
    residual: float
    score: float

    @property
    def vector(self):
        return np.array([self.zeta1, self.zeta2])


def zeta_relation_residual(zeta1, zeta2, tau):
    lhs = math.sqrt(max(tau * tau - (TWO_PI * zeta1) ** 2, 0.0))
    c = math.sqrt(max(tau * tau - (TWO_PI * zeta2) ** 2, 0.0))
    return abs(lhs - c / (1 - c))


def _rational_score(z, q=_RATIONAL_Q):
    """min over integer (m1, m2) != 0, |m_i| <= q of dist(m . z, Z)."""
    m1 = np.arange(-q, q + 1)[:, None]
    m2 = np.arange(0, q + 1)[None, :]
    val = m1 * z[0] + m2 * z[1]
    dist = np.abs(val - np.rint(val))
    mask = (m2 == 0) & (m1 <= 0)
    dist = np.where(mask, np.inf, dist)
    return float(dist.min())


def solve_zeta(tau: float, candidates: int = 400):
    """Translation rates (zeta1, zeta2) whose rigid steps keep the diagonal direction.

    Scans the vertical coefficient c_V over the admissible window
    (0, tau / (1 + tau)); the horizontal coefficient c_H = c_V / (1 - c_V) and
    both rates follow in closed form.  Among candidates far from rational
    lines with denominators <= 50 the best-separated one is returned.
    """
    if not 0 < tau <= 1:
        raise ValueError(f"solve_zeta supports 0 < tau <= 1, got tau={tau}")
    hi = tau / (1 + tau)
    cvs = np.linspace(_ZETA_MARGIN, hi - _ZETA_MARGIN, candidates)
    best = None
    for cv in cvs:
        ch = cv / (1 - cv)
        z2 = math.sqrt(tau * tau - cv * cv) / TWO_PI
        z1 = math.sqrt(max(tau * tau - ch * ch, 0.0)) / TWO_PI
        score = _rational_score(np.array([z1, z2]))
        if score < 1e-6:
            continue
        if best is None or score > best.score:
            best = ZetaPair(z1, z2, float(ch), float(cv), zeta_relation_residual(z1, z2, tau), score)
    return best


# --------------------------------------------------------------- projective

def projective_distance(x, v, xt, vt) -> float:
    """Product distance on T^2 x P^1; directions compared modulo sign."""
    dx = float(distance(x, xt))
    return math.hypot(dx, line_angle(v, vt))


def line_angle(v, u) -> float:
    """Angle in [0, pi/2] between the lines spanned by v and u."""
    cross = abs(float(v[0] * u[1] - v[1] * u[0]))
    return math.atan2(cross, abs(float(np.dot(v, u))))


def replay_projective(phases, tau, x, v):
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    for w in np.asarray(phases).reshape(-1, 2):
        x, v = projective_step(w, tau, x, v)
    return x, v


def _coef_phase(coord_other, c, amp):
    """beta with amp * cos(coord_other - beta) = c and nonnegative sine."""
    return wrap(coord_other - math.acos(max(-1.0, min(1.0, c / amp))))


def _align_block(x, v, tau, direction, min_steps=ALIGN_STEPS):
    """Shear-only steps making the tracked direction parallel to the diagonal.

    With |v2| >= |v1| the vertical Jacobian coefficient is held at 0 and the
    horizontal one accumulates (v2 - v1) / v2; otherwise the axes swap roles.
    """
    v = np.asarray(v, dtype=float) / np.linalg.norm(v)
    shear_axis = H if abs(v[1]) >= abs(v[0]) else V
    a, b = (0, 1) if shear_axis == H else (1, 0)
    total = (v[b] - v[a]) / v[b]
    n = max(min_steps, math.ceil(abs(total) / tau * 1.0001))
    order = _FORWARD if direction == "forward" else _BACKWARD
    phases = []
    x = np.asarray(x, dtype=float)
    for k in range(n):
        need = (v[b] - v[a]) / v[b] / (n - k)
        mid = x
        beta = {}
        u = v.copy()
        for axis, sign in order:
            amp = sign * tau
            o = mid[_other(axis)]
            if axis == shear_axis:
                beta[axis] = _coef_phase(o, need, amp)
                u[_idx(axis)] = u[_idx(axis)] + need * u[_other(axis)]
            else:
                beta[axis] = wrap(o - math.pi / 2)
            mid = _shear(axis, amp, beta[axis], mid)
        w = np.array([beta[H], beta[V]])
        phases.append(w)
        if direction == "forward":
            x, v = projective_step(w, tau, x, v)
        else:
            # inverse-step Jacobian applied to v, recomputed from the phases
            z = x
            m = np.eye(2)
            for axis, sign in order:
                amp = sign * tau
                o = _other(axis)
                jac = np.eye(2)
                jac[_idx(axis), o] = amp * math.cos(z[o] - beta[axis])
                m = jac @ m
                z = _shear(axis, amp, beta[axis], z)
            x = apply_inverse(w, tau, x)
            u = m @ v
            v = u / np.linalg.norm(u)
    return np.asarray(phases), x, v


def align_projective_angle(x, v, tau: float) -> SteeringPlan:
    """At least ten steps after which the tangent direction is parallel to (1, 1)."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    phases, xn, vn = _align_block(x, v, tau, "forward")
    xr, vr = replay_projective(phases, tau, x, v)
    err = line_angle(vr, DIAG)
    return _plan(phases, err, err < 1e-9, final_x=xr, final_v=vr)


def _rigid_projective_step(x, tau, zeta: ZetaPair):
    b1 = _coef_phase(x[1], zeta.c_h, tau)
    mid1 = wrap(x[0] + tau * math.sin(x[1] - b1))
    b2 = _coef_phase(mid1, zeta.c_v, tau)
    return np.array([b1, b2])


def _newton_landing(residual_and_jacobian, phases, tol=1e-13, max_iter=50):
    """Least-norm Gauss-Newton on the last few phases; returns phases or None."""
    ph = np.array(phases, dtype=float)
    for _ in range(max_iter):
        r, jac = residual_and_jacobian(ph)
        if np.max(np.abs(r)) < tol:
            return ph
        step, *_ = np.linalg.lstsq(jac, -r, rcond=None)
        scale = 1.0
        base = np.max(np.abs(r))
        while scale > 1e-4:
            trial = wrap(ph + scale * step.reshape(ph.shape))
            if np.max(np.abs(residual_and_jacobian(trial)[0])) < base:
                break
            scale *= 0.5
        ph = trial
    r, _ = residual_and_jacobian(ph)
    return ph if np.max(np.abs(r)) < 1e3 * tol else None


def _angle_residual(v, target):
    th = math.atan2(v[1], v[0]) - math.atan2(target[1], target[0])
    return (th + math.pi / 2) % math.pi - math.pi / 2


def _local_lipschitz_projective(phases, tau, x, v, h=1e-7):
    """Spectral norm of the block's derivative in (x1, x2, angle) coordinates."""
    th = math.atan2(v[1], v[0])

    def f(p):
        xx, vv = replay_projective(phases, tau, p[:2], np.array([math.cos(p[2]), math.sin(p[2])]))
        return np.array([xx[0], xx[1], math.atan2(vv[1], vv[0])])
    p0 = np.array([x[0], x[1], th])
    cols = []
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        d = f(p0 + e) - f(p0 - e)
        d[:2] = wrap_signed(d[:2])
        d[2] = (d[2] + math.pi / 2) % math.pi - math.pi / 2
        cols.append(d / (2 * h))
    return float(np.linalg.norm(np.stack(cols, axis=1), 2))


def steer_projective(x, v, xt, vt, eps: float, tau: float, cap: int = WEYL_CAP) -> SteeringPlan:
    """Approximate steering (x, v) -> (xt, vt) on T^2 x P^1.

    Blocks: forward alignment to the diagonal, rigid diagonal-preserving
    translations chosen by a Weyl scan, a short exact landing on the
    pulled-back base point, then the reversed backward alignment block.
    """
    if tau <= 0 or eps <= 0:
        raise ValueError("tau and eps must be positive")
    x = wrap(np.asarray(x, dtype=float))
    v = np.asarray(v, dtype=float) / np.linalg.norm(v)
    xt = wrap(np.asarray(xt, dtype=float))
    vt = np.asarray(vt, dtype=float) / np.linalg.norm(vt)
    if projective_distance(x, v, xt, vt) < eps:
        return _plan([], projective_distance(x, v, xt, vt))

    back, xbar, ubar = _align_block(xt, vt, tau, "backward")
    tail = back[::-1]
    fwd, xa, va = _align_block(x, v, tau, "forward")
    zeta = solve_zeta(tau)
    lip = _local_lipschitz_projective(tail, tau, xbar, DIAG)

    start = LANDING_STEPS
    eps_w = eps / 2
    for _attempt in range(20):
        m = weyl_search(zeta, xa, xbar, eps_w, cap, start=start)
        if m is None:
            return _plan(fwd, float("inf"), False, "Weyl scan exhausted", zeta=zeta)
        # the rigid run is tracked with projective_step, so (xs, vs) equals a replay
        rigid = []
        xs, vs = xa, va
        for _ in range(m - LANDING_STEPS):
            w = _rigid_projective_step(xs, tau, zeta)
            rigid.append(w)
            xs, vs = projective_step(w, tau, xs, vs)
        pre = np.concatenate([fwd, np.asarray(rigid).reshape(-1, 2)])
        guess = []
        g = xs
        for _ in range(LANDING_STEPS):
            w = _rigid_projective_step(g, tau, zeta)
            guess.append(w)
            g = apply_map(w, tau, g)

        def res_jac(ph, xs=xs, vs=vs):
            val, der = projective_endpoint_derivative(xs, vs, ph.reshape(-1, 2), tau)
            xe, ve = val[:2], val[2:]
            r = np.concatenate([wrap_signed(xe - xbar), [_angle_residual(ve, DIAG)]])
            dth = ve[0] * der[3] - ve[1] * der[2]
            return r, np.vstack([der[:2], dth])

        landed = _newton_landing(res_jac, np.asarray(guess).ravel())
        if landed is None:
            start = m + 1
            continue
        phases = np.concatenate([pre, landed.reshape(-1, 2), tail])
        xf, vf = replay_projective(phases[len(pre):], tau, xs, vs)
        err = projective_distance(xf, vf, xt, vt)
        blocks = {
            "align": (0, len(fwd)),
            "weyl": (len(fwd), len(pre)),
            "landing": (len(pre), len(pre) + LANDING_STEPS),
            "pullback": (len(pre) + LANDING_STEPS, len(phases)),
        }
        return _plan(phases, err, err < eps, zeta=zeta, weyl_steps=m, lipschitz=lip,
                     blocks=blocks, pulled_back=xbar)
    return _plan(fwd, float("inf"), False, "landing did not converge", zeta=zeta)


# ---------------------------------------------------------------- two point

def replay_two_point(phases, tau, x, y):
    pts = np.stack([np.asarray(x, dtype=float), np.asarray(y, dtype=float)])
    for w in np.asarray(phases).reshape(-1, 2):
        pts = apply_map(w, tau, pts)
    return pts[0], pts[1]


def steer_two_point(x, y, xt, yt, eps: float, tau: float, delta1: float = DEFAULT_DELTA1,
                    cap: int = WEYL_CAP) -> SteeringPlan:
    """Approximate steering of the pair (x, y) to (xt, yt) off the diagonal.

    Blocks: separation (delta1, 0); exact horizontal alignment with the
    pulled-back base point in ceil(4 pi / tau) steps; vertical rigid drift by
    tau cos(delta1 / 2) per step chosen by a Weyl scan; exact landing over the
    last few steps; the reversed backward separation block.
    """
    if tau <= 0 or eps <= 0:
        raise ValueError("tau and eps must be positive")
    x, y, xt, yt = (wrap(np.asarray(p, dtype=float)) for p in (x, y, xt, yt))
    if distance(x, y) == 0 or distance(xt, yt) == 0:
        raise ValueError("two-point steering needs distinct points")
    start_err = float(distance(x, xt) + distance(y, yt))
    if start_err < eps:
        return _plan([], start_err)

    log: list[str] = []
    back: list[np.ndarray] = []
    hat = _achieve_separation(np.stack([xt, yt]), delta1, tau, "backward", back, log)
    tail = np.asarray(back[::-1]).reshape(-1, 2)
    xhat, yhat = hat[0], hat[1]

    phases: list[np.ndarray] = []
    pts = _achieve_separation(np.stack([x, y]), delta1, tau, "forward", phases, log)
    n_sep = len(phases)

    # exact horizontal alignment with xhat; both points share x2 so H acts rigidly
    mprime = one_point_steps(tau)
    for k in range(mprime):
        def translate(p, amp, left=mprime - k):
            t = wrap_signed(xhat[0] - p[0, 0]) / left
            return _translate_phase(p[0, 1], t, amp)
        w, pts = _pair_step(pts, {H: translate, V: _keep(V)}, tau, "forward")
        phases.append(w)
    n_align = len(phases)

    def hold(p, amp):
        return float(p[0, 1])

    inc = tau * math.cos((pts[0, 0] - pts[1, 0]) / 2)
    start = LANDING_STEPS
    for _attempt in range(20):
        m = weyl_search([inc / TWO_PI], [pts[0, 1]], [xhat[1]], eps / 2, cap, start=start)
        if m is None:
            return _plan(phases, float("inf"), False, "Weyl scan exhausted", log=log)
        drift = list(phases)
        q = pts
        for _ in range(m):
            w, q = _pair_step(q, {H: hold, V: _keep(V)}, tau, "forward")
            drift.append(w)
        pre = np.asarray(drift[: len(drift) - LANDING_STEPS])
        guess = np.asarray(drift[len(drift) - LANDING_STEPS:]).ravel()
        xs, ys = replay_two_point(pre, tau, x, y)

        def res_jac(ph, xs=xs, ys=ys):
            pp = np.stack([xs, ys])
            for w in ph.reshape(-1, 2):
                pp = apply_map(w, tau, pp)
            r = np.concatenate([wrap_signed(pp[0] - xhat), wrap_signed(pp[1] - yhat)])
            return r, two_point_derivative(xs, ys, ph.reshape(-1, 2), tau).entries

        landed = _newton_landing(res_jac, guess)
        if landed is None:
            start = m + 1
            continue
        plan = np.concatenate([pre, landed.reshape(-1, 2), tail])
        xf, yf = replay_two_point(plan, tau, x, y)
        err = float(distance(xf, xt) + distance(yf, yt))
        blocks = {
            "separation": (0, n_sep),
            "align": (n_sep, n_align),
            "weyl": (n_align, len(pre)),
            "landing": (len(pre), len(pre) + LANDING_STEPS),
            "pullback": (len(pre) + LANDING_STEPS, len(plan)),
        }
        return _plan(plan, err, err < eps, log=log, weyl_steps=m, increment=inc,
                     blocks=blocks, pulled_back=(xhat, yhat), delta1=delta1)
    return _plan(phases, float("inf"), False, "landing did not converge", log=log)


__all__ = [
    "SteeringPlan",
    "ZetaPair",
    "align_projective_angle",
    "line_angle",
    "projective_distance",
    "replay_one_point",
    "replay_projective",
    "replay_two_point",
    "rigid_phase",
    "solve_zeta",
    "steer_one_point",
    "steer_projective",
    "steer_two_point",
    "weyl_search",
]
