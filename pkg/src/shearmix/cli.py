"""Command-line front end: ``shearmix <subcommand> [--config FILE] [flags]``.

Settings come from flags, then a ``key = value`` config file, then defaults.
Exit codes: 0 success, 1 failed certificate or check, 2 configuration error.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import certificates, cocycle, control, mixing, noise, spectrum
from .torus import apply_map

SUBCOMMANDS = ("simulate", "lyapunov", "spectrum", "certify", "steer", "mix", "drift")
STEER_MODES = ("one_point", "projective", "two_point")
INITIAL_DATA = ("blob", "cos")
SNAPSHOTS = 6


class ConfigError(ValueError):
    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


def _floats(text):
    if isinstance(text, (list, tuple)):
        return [float(t) for t in text]
    parts = [t for t in str(text).replace(",", " ").split() if t]
    return [float(t) for t in parts]


def _point(text):
    vals = _floats(text)
    if len(vals) != 2:
        raise ValueError("expected two comma-separated numbers")
    return vals


def _seed(text):
    return int(str(text), 0)


# key -> (converter, default, help)
KEYS = {
    "tau": (float, 1.0, "shear amplitude"),
    "seed": (_seed, noise.DEFAULT_SEED, "master seed"),
    "grid": (int, 256, "scalar grid size (power of two >= 32)"),
    "steps": (int, 60, "map applications"),
    "s": (float, 1.0, "Sobolev index of the mixing norm"),
    "q_list": (_floats, [-0.1, -0.05, 0.0, 0.05, 0.1], "moment parameters q"),
    "p": (float, 0.1, "drift exponent"),
    "s_star": (float, 0.5, "drift neighbourhood radius"),
    "output_dir": (str, None, "output directory (default $MIXER_OUTPUT_DIR or .)"),
    "lyapunov_steps": (int, 100_000, "steps per Lyapunov trajectory"),
    "ensemble": (int, 32, "Lyapunov trajectories"),
    "spectral_nx": (int, 32, "spectrum grid in x1"),
    "spectral_ny": (int, 32, "spectrum grid in x2"),
    "spectral_nv": (int, 64, "spectrum grid in angle"),
    "mc_samples": (int, 64, "phase draws per spectrum node"),
    "max_iter": (int, 200, "power iteration cap"),
    "tol": (float, 1e-3, "power iteration tolerance"),
    "pairs": (int, 500, "drift pairs"),
    "mc_per_pair": (int, 256, "drift draws per pair"),
    "mode": (str, "one_point", "steer mode: " + ", ".join(STEER_MODES)),
    "eps": (float, 0.05, "steering tolerance"),
    "x": (_point, [0.5, 0.5], "start point"),
    "y": (_point, [1.0, 2.0], "second start point or one-point target"),
    "v": (_point, [1.0, 0.0], "start direction"),
    "xt": (_point, [3.0, 4.0], "target point"),
    "yt": (_point, [5.0, 1.0], "second target point"),
    "vt": (_point, [0.0, 1.0], "target direction"),
    "initial": (str, "blob", "initial scalar: " + ", ".join(INITIAL_DATA)),
}


@dataclass
class RunConfig:
    command: str
    values: dict = field(default_factory=dict)

    def __getattr__(self, name):
        try:
            return self.__dict__["values"][name]
        except KeyError:
            raise AttributeError(name) from None


def read_config_file(path) -> dict:
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    for num, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("config", f"line {num}: expected 'key = value'")
        key, value = (t.strip() for t in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(key, f"unknown key (line {num})")
        out[key] = value
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value settings file")
    for key, (_, _, text) in KEYS.items():
        common.add_argument("--" + key.replace("_", "-"), dest=key, default=None, help=text)
    parser = argparse.ArgumentParser(prog="shearmix", description="Random alternating-shear maps on the torus.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def _validate(values):
    def need(key, ok, message):
        if not ok:
            raise ConfigError(key, message)

    need("tau", math.isfinite(values["tau"]) and values["tau"] >= 0, "must be finite and >= 0")
    g = values["grid"]
    need("grid", g >= 32 and g & (g - 1) == 0, "must be a power of two >= 32")
    need("steps", values["steps"] >= 1, "must be >= 1")
    need("seed", 0 <= values["seed"] <= noise.MAX_SEED, "must fit in 64 unsigned bits")
    need("s", values["s"] > 0, "must be positive")
    need("p", 0 < values["p"] <= 0.5, "must lie in (0, 0.5]")
    need("s_star", 0 < values["s_star"] < math.pi, "must lie in (0, pi)")
    need("eps", values["eps"] > 0, "must be positive")
    need("ensemble", values["ensemble"] >= 1, "must be >= 1")
    ls = values["lyapunov_steps"]
    need("lyapunov_steps", ls >= cocycle.MIN_STEPS and ls % 10 == 0,
         f"must be >= {cocycle.MIN_STEPS} and a multiple of 10")
    for key in ("spectral_nx", "spectral_ny", "spectral_nv"):
        need(key, values[key] >= 16, "must be >= 16")
    for key in ("mc_samples", "max_iter", "pairs", "mc_per_pair"):
        need(key, values[key] >= 1, "must be >= 1")
    need("tol", values["tol"] > 0, "must be positive")
    need("q_list", len(values["q_list"]) > 0, "must not be empty")
    need("mode", values["mode"] in STEER_MODES, "must be one of " + ", ".join(STEER_MODES))
    need("initial", values["initial"] in INITIAL_DATA, "must be one of " + ", ".join(INITIAL_DATA))


def parse_config(argv=None) -> RunConfig:
    args = build_parser().parse_args(argv)
    raw = {k: v for k, v in read_config_file(args.config).items()} if args.config else {}
    for key in KEYS:
        flag = getattr(args, key)
        if flag is not None:
            raw[key] = flag
    values = {}
    for key, (conv, default, _) in KEYS.items():
        if key in raw:
            try:
                values[key] = conv(raw[key])
            except (TypeError, ValueError):
                raise ConfigError(key, f"invalid value {raw[key]!r}") from None
        else:
            values[key] = list(default) if isinstance(default, list) else default
    if values["output_dir"] is None:
        values["output_dir"] = os.environ.get("MIXER_OUTPUT_DIR", ".")
    _validate(values)
    return RunConfig(args.command, values)


# ------------------------------------------------------------------ output

def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


class OutputSet:
    """Collects written files so a failed run can remove them."""

    def __init__(self, directory):
        self.dir = Path(directory)
        self.written: list[Path] = []

    def _write(self, name, data: bytes):
        self.dir.mkdir(parents=True, exist_ok=True)
        target = self.dir / name
        fd, tmp = tempfile.mkstemp(dir=self.dir, prefix=".tmp-")
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, target)
        self.written.append(target)
        return target

    def csv(self, name, header, rows):
        lines = [",".join(header)]
        lines += [",".join(fmt(v) for v in row) for row in rows]
        return self._write(name, ("\n".join(lines) + "\n").encode("ascii"))

    def binary(self, name, data):
        return self._write(name, data)

    def discard(self):
        for path in self.written:
            path.unlink(missing_ok=True)
        self.written.clear()


# ------------------------------------------------------------- subcommands

def cmd_simulate(cfg, out):
    phases = mixing.mixing_phases(cfg.seed, cfg.steps)
    x = np.asarray(cfg.x, dtype=float)
    rows = [(0, x[0], x[1], "", "")]
    for n, w in enumerate(phases, 1):
        x = apply_map(w, cfg.tau, x)
        rows.append((n, x[0], x[1], w[0], w[1]))
    out.csv("trajectory.csv", ["step", "x1", "x2", "w1", "w2"], rows)
    return 0


def cmd_lyapunov(cfg, out):
    est = cocycle.lyapunov_estimate(cfg.tau, cfg.lyapunov_steps, cfg.seed, cfg.ensemble)
    out.csv("lyapunov.csv", ["tau", "steps", "ensemble", "lambda1", "lambda2", "ci_halfwidth", "lambda1_frame"],
            [(cfg.tau, est.steps, cfg.ensemble, est.lambda1, est.lambda2, est.ci_halfwidth, est.lambda1_frame)])
    print(f"lambda1 = {est.lambda1:.6f} +- {est.ci_halfwidth:.2e}")
    return 0


def cmd_spectrum(cfg, out):
    rep = spectrum.moment_spectrum(cfg.q_list, cfg.tau, cfg.spectral_nx, cfg.spectral_ny, cfg.spectral_nv,
                                   cfg.mc_samples, cfg.max_iter, cfg.tol, cfg.seed)
    out.csv("moment_spectrum.csv", ["q", "r_q", "iterations", "residual", "converged"], rep.rows())
    for q, r, *_ in rep.rows():
        print(f"r({q:+.3f}) = {r:.7f}")
    return 0


def cmd_certify(cfg, out):
    reports = certificates.all_certificates()
    rows = [(r.name, r.expected_rank, r.rank, r.min_kept_sigma, r.max_dropped_sigma,
             r.oracle_discrepancy, r.passed) for r in reports]
    out.csv("certificates.csv", ["name", "expected_rank", "rank", "min_kept_sigma", "max_dropped_sigma",
                                 "oracle_discrepancy", "passed"], rows)
    for r in reports:
        print(f"{r.name}: rank {r.rank}/{r.expected_rank} {'PASS' if r.passed else 'FAIL'}")
    return 0 if all(r.passed for r in reports) else 1


def cmd_steer(cfg, out):
    if cfg.mode == "one_point":
        plan = control.steer_one_point(cfg.x, cfg.y, cfg.tau)
    elif cfg.mode == "projective":
        plan = control.steer_projective(cfg.x, cfg.v, cfg.xt, cfg.vt, cfg.eps, cfg.tau)
    else:
        plan = control.steer_two_point(cfg.x, cfg.y, cfg.xt, cfg.yt, cfg.eps, cfg.tau)
    rows = [(k, w[0], w[1]) for k, w in enumerate(plan.phases, 1)]
    rows.append(("achieved_error", plan.achieved_error, ""))
    out.csv("steer.csv", ["step", "w1", "w2"], rows)
    print(f"{cfg.mode}: {plan.steps} steps, error {plan.achieved_error:.3e}")
    if not plan.success:
        print(f"steering failed: {plan.message}", file=sys.stderr)
        return 1
    return 0


def snapshot_steps(steps: int) -> list[int]:
    every = math.ceil(steps / SNAPSHOTS)
    return [k * every for k in range(SNAPSHOTS) if k * every <= steps]


def cmd_mix(cfg, out):
    rho0 = mixing.von_mises_blob() if cfg.initial == "blob" else mixing.cos_mode(1, 0)
    phases = mixing.mixing_phases(cfg.seed, cfg.steps)
    wanted = set(snapshot_steps(cfg.steps))

    def keep(n, fieldvals):
        if n in wanted:
            out.binary(f"snap_{n:04d}.pgm", mixing.snapshot(fieldvals))

    norms = mixing.norm_series(rho0, phases, cfg.tau, cfg.grid, cfg.s, callback=keep)
    out.csv("mixing.csv", ["step", "hs_norm"], list(enumerate(norms)))
    if cfg.steps >= 20:
        floor = mixing.resolution_floor(mixing.l2_norm(rho0(mixing.grid_points(cfg.grid))), cfg.grid, cfg.s)
        fit = mixing.fit_decay(norms, floor, cfg.s)
        print(f"alpha = {fit.fitted_alpha:.5f}, r^2 = {fit.r_squared:.4f}, window {fit.fit_window}")
    return 0


def cmd_drift(cfg, out):
    psi = spectrum.twisted_power_iteration(cfg.p, cfg.tau, cfg.spectral_nx, cfg.spectral_ny, cfg.spectral_nv,
                                           cfg.mc_samples, cfg.max_iter, cfg.tol, cfg.seed).psi
    rep = mixing.two_point_drift_check(cfg.p, cfg.s_star, cfg.tau, cfg.pairs, cfg.mc_per_pair, psi, cfg.seed)
    rows = [(i, a, b, c) for i, (a, b, c) in enumerate(zip(rep.v_before, rep.ev_after, rep.log_ratio))]
    out.csv("drift.csv", ["pair_id", "V_before", "EV_after", "log_ratio"], rows)
    print(f"mean log ratio = {rep.mean_log_ratio:.5f} +- {rep.ci:.1e}, gamma = {rep.gamma_hat:.5f}")
    return 0 if rep.mean_log_ratio + rep.ci < 0 else 1


COMMANDS = {
    "simulate": cmd_simulate,
    "lyapunov": cmd_lyapunov,
    "spectrum": cmd_spectrum,
    "certify": cmd_certify,
    "steer": cmd_steer,
    "mix": cmd_mix,
    "drift": cmd_drift,
}


def run(cfg: RunConfig) -> int:
    out = OutputSet(cfg.output_dir)
    try:
        return COMMANDS[cfg.command](cfg, out)
    except (ValueError, RuntimeError) as exc:
        out.discard()
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except BaseException:
        out.discard()
        raise


def main(argv=None) -> int:
    try:
        cfg = parse_config(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
