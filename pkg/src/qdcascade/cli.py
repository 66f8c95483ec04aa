"""Command-line front end.

``qdcascade <command> [--config FILE] [--out DIR] [--threads N] [--override section.key=value]...``

Curves are written as CSV files and every run writes ``summary.json`` with
the resolved configuration, fitted constants, invariant maxima and wall time.
Exit status is 0 on success, 2 for configuration errors, 3 for numerical
failures and 1 for I/O errors.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from typing import Sequence

import numpy as np

from . import __version__
from ._backend import NAME as BACKEND
from .config import ConfigError, RunConfig, load
from .errors import InvalidArgument, NumericalError
from .experiments import (default_phase_grid, echo_scan, efficiency_report, fit_decay,
                          rabi_sweep, ramsey_scan)
from .model import Drive
from .pulses import calibrate_pi, single
from .qcore import DensityMatrix, Level
from .solver import InvariantMonitor, emission_probability, eventual_emission, evolve, lifetime_fit

__all__ = ["main", "COMMANDS", "write_csv"]

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3


def _fmt(v) -> str:
    return format(float(v), ".12g")


def write_csv(path: str, columns: Sequence[tuple[str, str]], rows, meta: Sequence[tuple[str, object]] = ()):
    """Write ``#``-prefixed metadata, a ``name[unit]`` header and ``.12g`` rows."""
    lines = [f"# {k}: {v}" for k, v in meta]
    lines.append(",".join(f"{name}[{unit}]" for name, unit in columns))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _ghz(omega: float) -> float:
    """Angular frequency in rad/ps to the frequency in GHz."""
    return omega / (2.0 * math.pi) * 1e3


def _workers(args) -> int:
    return max(1, int(args.threads or 1))


def _omega_half(cfg: RunConfig, section: str, params, solver):
    given = cfg[section]["omega_half"]
    if given is not None:
        return given, None
    cal = calibrate_pi(params, cfg["pulse"]["delta_b"], sigma=cfg["pulse"]["sigma"], config=solver)
    return cal.omega_half, cal.omega_pi


def _fits(curve) -> dict:
    out = {}
    for shape in ("gaussian", "exponential"):
        try:
            f = fit_decay(curve, shape)
            out[shape] = {"amplitude": f.amplitude, "time_constant_ps": f.time_constant,
                          "residual_rms": f.residual_rms}
        except (NumericalError, InvalidArgument) as exc:
            out[shape] = {"error": str(exc)}
    return out


def cmd_trajectory(cfg, args, solver, out):
    params = cfg.params()
    t = cfg["trajectory"]
    pulse = cfg["pulse"]
    omega = t["omega_peak"]
    omega_pi = None
    if omega is None:
        omega_pi = calibrate_pi(params, pulse["delta_b"], sigma=pulse["sigma"], config=solver).omega_pi
        omega = omega_pi
    seq = single(omega, 0.0, t["phase"], pulse["delta_b"], pulse["sigma"])
    rho0 = DensityMatrix.pure(Level.parse(t["initial"]))
    traj = evolve(rho0, t["t_start"], t["t_end"], seq, params, solver, sample_times=t["samples"])
    pops = traj.populations()
    rows = [(tt, p[0], p[1], p[2], s[0, 2].real, s[0, 2].imag)
            for tt, p, s in zip(traj.times, pops, traj.states)]
    write_csv(os.path.join(out, "trajectory.csv"),
              [("t", "ps"), ("P_g", "probability"), ("P_x", "probability"), ("P_b", "probability"),
               ("re_rho_gb", "dimensionless"), ("im_rho_gb", "dimensionless")], rows,
              [("command", "trajectory"), ("omega_peak[rad/ps]", _fmt(omega)),
               ("initial", t["initial"])])
    try:
        pxx, px = emission_probability(traj)
        complete = True
    except NumericalError:
        pxx, px = eventual_emission(traj)
        complete = False
    res = {"omega_peak_rad_per_ps": omega, "P_xx": pxx, "P_x": px, "window_complete": complete,
           "integrated_b": traj.integrated_b, "integrated_x": traj.integrated_x,
           "steps": traj.stats["accepted_steps"]}
    if omega_pi is not None:
        res["omega_pi_rad_per_ps"] = omega_pi
    return res, ["trajectory.csv"]


def cmd_rabi(cfg, args, solver, out):
    params = cfg.params()
    r = cfg["rabi"]
    sigma = cfg["pulse"]["sigma"]
    grid = np.linspace(r["omega_min"], r["omega_max"], r["points"])
    curves = rabi_sweep(grid, r["detunings"], params, sigma=sigma, config=solver,
                        workers=_workers(args))
    ref = calibrate_pi(params, 0.0, (min(grid[0], 0.1), grid[-1]), sigma=sigma, config=solver).omega_pi
    files, res = [], {"omega_pi_rad_per_ps": ref, "curves": []}
    for c in curves:
        name = f"rabi_{_ghz(c.delta_b):g}GHz.csv"
        rows = [(w * w, w * w / (ref * ref), a, b) for w, a, b in zip(c.omega, c.p_xx, c.p_x)]
        write_csv(os.path.join(out, name),
                  [("omega_sq", "rad2/ps2"), ("power_rel", "dimensionless"),
                   ("P_xx", "probability"), ("P_x", "probability")], rows,
                  [("command", "rabi"), ("delta_b[rad/ps]", _fmt(c.delta_b)),
                   ("delta_b[GHz]", _fmt(_ghz(c.delta_b))),
                   ("power_rel", "omega_sq / omega_pi^2 at delta_b = 0"),
                   ("omega_pi[rad/ps]", _fmt(ref))])
        files.append(name)
        res["curves"].append({"delta_b_rad_per_ps": c.delta_b, "file": name,
                              "maxima": [{"omega": w, "P_xx": p} for w, p in c.maxima()]})
    return res, files


def _scan(cfg, args, solver, out, section):
    params = cfg.params()
    s = cfg[section]
    pulse = cfg["pulse"]
    omega_half, omega_pi = _omega_half(cfg, section, params, solver)
    noise = cfg.noise(section)
    taus = np.linspace(s["tau_min"], s["tau_max"], s["points"])
    phases = default_phase_grid(s["phases"])
    kw = dict(delta_b=pulse["delta_b"], sigma=pulse["sigma"], allow_overlap=s["allow_overlap"],
              observable=s["observable"], config=solver, workers=_workers(args))
    if section == "ramsey":
        curve = ramsey_scan(taus, phases, omega_half, noise, params, **kw)
    else:
        curve = echo_scan(taus, phases, omega_half, noise, params, phase_on=s["phase_on"], **kw)
    name = f"{section}.csv"
    write_csv(os.path.join(out, name),
              [("tau", "ps"), ("visibility", "dimensionless"), ("fringe_mean", "probability")],
              zip(curve.tau, curve.visibility, curve.fringe_mean),
              [("command", section), ("omega_half[rad/ps]", _fmt(omega_half)),
               ("sigma_inh[rad/ps]", _fmt(noise.sigma_inh)),
               ("quadrature_order", noise.quadrature_order), ("observable", s["observable"])])
    res = {"omega_half_rad_per_ps": omega_half, "sigma_inh_rad_per_ps": noise.sigma_inh,
           "fits": _fits(curve)}
    if omega_pi is not None:
        res["omega_pi_rad_per_ps"] = omega_pi
    return res, [name]


def cmd_ramsey(cfg, args, solver, out):
    return _scan(cfg, args, solver, out, "ramsey")


def cmd_echo(cfg, args, solver, out):
    return _scan(cfg, args, solver, out, "echo")


def cmd_lifetime(cfg, args, solver, out):
    params = cfg.params()
    lt = cfg["lifetime"]
    res, files = {}, []
    for level in (Level.B, Level.X):
        traj = evolve(DensityMatrix.pure(level), 0.0, lt["duration"], [], params, solver,
                      sample_times=lt["samples"])
        name = f"lifetime_{level.name.lower()}.csv"
        pops = traj.populations()
        write_csv(os.path.join(out, name),
                  [("t", "ps"), ("P_g", "probability"), ("P_x", "probability"), ("P_b", "probability")],
                  [(t, *p) for t, p in zip(traj.times, pops)],
                  [("command", "lifetime"), ("initial", level.name.lower())])
        files.append(name)
        res[f"tau_{level.name.lower()}_ps"] = lifetime_fit(traj, level)
    return res, files


def cmd_efficiency(cfg, args, solver, out):
    e = cfg["efficiency"]
    rep = efficiency_report(e["singles_xx"], e["singles_x"], e["coincidences"], e["rep_rate"],
                            suppression_factor=e["suppression_factor"])
    return {"eta": rep.eta, "pair_rate_hz": rep.pair_rate,
            "excitation_fraction": rep.excitation_fraction}, []


COMMANDS = {
    "trajectory": cmd_trajectory,
    "rabi": cmd_rabi,
    "ramsey": cmd_ramsey,
    "echo": cmd_echo,
    "lifetime": cmd_lifetime,
    "efficiency": cmd_efficiency,
}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qdcascade", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in list(COMMANDS) + ["validate"]:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="YAML or JSON configuration file")
        sp.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help="set section.key, e.g. physics.gamma_b='405 ps' (repeatable)")
        if name != "validate":
            sp.add_argument("--out", default=".", help="output directory (default: .)")
            sp.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
    return p


def _validate(cfg: RunConfig) -> int:
    for key, value, unit, prov in cfg.report():
        shown = "null" if value is None else (
            "[" + ", ".join(_fmt(v) for v in value) + "]" if isinstance(value, list)
            else value if isinstance(value, (str, bool)) else _fmt(value))
        print(f"{key} = {shown}{' ' + unit if unit else ''}  ({prov})")
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load(args.config, args.override)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "validate":
        return _validate(cfg)
    if args.threads is not None and args.threads < 1:
        print("config error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG

    out = args.out
    try:
        os.makedirs(out, exist_ok=True)
        if not os.access(out, os.W_OK):
            raise PermissionError(f"output directory {out!r} is not writable")
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO

    monitor = InvariantMonitor()
    start = time.perf_counter()
    try:
        solver = cfg.solver_config(monitor=monitor)
        results, files = COMMANDS[args.command](cfg, args, solver, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except InvalidArgument as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO

    summary = {
        "command": args.command,
        "version": __version__,
        "backend": BACKEND,
        "resolved_config": cfg.resolved(),
        "provenance": cfg.provenance,
        "results": results,
        "files": files,
        "invariants": monitor.as_dict(),
        "threads": _workers(args),
        "wall_time_s": time.perf_counter() - start,
    }
    try:
        with open(os.path.join(out, "summary.json"), "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2, allow_nan=True)
            fh.write("\n")
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(json.dumps({"command": args.command, "results": results}, indent=2))
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
