"""
Command-line interface.

    spinamp [--out DIR] [--jobs N] [--precision DIGITS] <command> ...

Commands: ``gain``, ``spectrum``, ``pulse-profile``, ``exact``, ``protocol``,
``sweep``, ``eta``.  Every command reads an optional INI config (see
``spinamp.config``); command-line flags and ``--set section.key=value``
override config entries.  Exit status: 0 success, 2 configuration error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import itertools
import os
import re
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import dynamics as dyn
from . import mixing
from .config import (ConfigError, RunConfig, build_pulse, build_settings, build_system,
                     build_t1, build_timeline_cfg, grid_strings, parse_grid, parse_segments)
from .field_cycle import ProtocolConfig, cycle_survival, run_protocol
from .output import DEFAULT_PRECISION, atomic_write, to_json, write_csv
from .pulse import CalibrationError, excitation_profile
from .spin_system import SpinSystemError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


# --- shared helpers -----------------------------------------------------------

def _load(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if getattr(args, "config", None) else RunConfig()
    for item in getattr(args, "set", None) or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        cfg.override(key.strip(), value.strip())
    return cfg


def _apply_flags(cfg: RunConfig, args, mapping):
    for attr, dotted in mapping:
        value = getattr(args, attr, None)
        if value is not None:
            cfg.override(dotted, value)


def _precision(args, cfg: RunConfig) -> int:
    if getattr(args, "precision", None) is not None:
        return args.precision
    return cfg.get("output", "precision", int, DEFAULT_PRECISION)


def _out_path(args, cfg: RunConfig, default_name: str) -> str:
    name = cfg.get("output", "file", default=default_name)
    return os.path.join(getattr(args, "out", None) or ".", name)


def _emit(path: str, text: str):
    atomic_write(path, text)
    print(path)


def _n_steps(cfg: RunConfig, m) -> int:
    raw = cfg.require("protocol", "n_steps").strip()
    match = re.fullmatch(r"m\s*/\s*(\d+)", raw)
    if match:
        if m is None:
            raise ConfigError(f"{cfg.where('protocol', 'n_steps')}: 'm/k' needs protocol.m")
        return int(m) // int(match.group(1))
    return cfg.require("protocol", "n_steps", int)


def _positive_int(cfg, section, key):
    value = cfg.require(section, key, int)
    if value < 1:
        raise ConfigError(f"{cfg.where(section, key)}: {section}.{key} must be >= 1, got {value}")
    return value


# --- commands -------------------------------------------------------------------

def cmd_gain(args) -> int:
    cfg = _load(args)
    _apply_flags(cfg, args, [("m", "protocol.m"), ("n_max", "protocol.n_max"),
                             ("mode", "protocol.mode"), ("eta", "protocol.eta"),
                             ("eps0", "protocol.eps0")])
    m = _positive_int(cfg, "protocol", "m")
    n_max = cfg.require("protocol", "n_max", int)
    if n_max < 0:
        raise ConfigError("protocol.n_max must be >= 0")
    mode = cfg.get("protocol", "mode", default="closed")
    prec = _precision(args, cfg)
    if mode == "closed":
        curve = mixing.gain_curve(m, n_max)
        text = write_csv(("N", "G"), curve.rows(), prec)
    elif mode == "iterate":
        eta = cfg.get("protocol", "eta", float, 1.0)
        eps0 = cfg.get("protocol", "eps0", float, 0.12)
        start = mixing.PoolState.initial(m, eps0)
        with_not = mixing.iterate(start, mixing.StepParams(-1.0, eta), n_max)
        without = mixing.iterate(start, mixing.StepParams(1.0, eta), n_max)
        dP = np.array([a.eps_I - b.eps_I for a, b in zip(without, with_not)])
        rel = dP / dP[1] if n_max >= 1 else np.zeros_like(dP)
        text = write_csv(("N", "delta_P", "relative_gain"),
                         zip(range(n_max + 1), dP, rel), prec)
    else:
        raise ConfigError(f"protocol.mode must be 'closed' or 'iterate', got {mode!r}")
    _emit(_out_path(args, cfg, f"gain_m{m}_{mode}.csv"), text)
    return EXIT_OK


def _offsets(cfg: RunConfig) -> np.ndarray:
    return parse_grid(cfg.get("pulse", "offsets_khz", default="-500:500:5"))


def cmd_pulse_profile(args) -> int:
    cfg = _load(args)
    _apply_flags(cfg, args, _PULSE_FLAGS)
    pulse, duration = build_pulse(cfg)
    prec = _precision(args, cfg)
    profile = excitation_profile(pulse, _offsets(cfg))
    out = getattr(args, "out", None) or "."
    _emit(os.path.join(out, "pulse.csv"), write_csv(("t_s", "amp_khz", "phase_rad"), pulse.rows(), prec))
    _emit(_out_path(args, cfg, "profile.csv"),
          write_csv(("offset_khz", "residual_mz"), profile.rows(), prec))
    return EXIT_OK


def cmd_spectrum(args) -> int:
    cfg = _load(args)
    _apply_flags(cfg, args, _PULSE_FLAGS + [("m", "protocol.m"), ("n", "protocol.n_steps"),
                                            ("eps0", "protocol.eps0"), ("eta", "protocol.eta")])
    m = _positive_int(cfg, "protocol", "m")
    n = _n_steps(cfg, m)
    eps0 = cfg.get("protocol", "eps0", float, 0.12)
    eta = cfg.get("protocol", "eta", float, 1.0)
    pulse, _ = build_pulse(cfg)
    profile = excitation_profile(pulse, _offsets(cfg))
    result = mixing.response_spectrum(profile.offsets, profile.residual_mz, m, n, eps0, eta)
    rows = ((off * 1e3, pol) for off, pol in result.rows())
    _emit(_out_path(args, cfg, "spectrum.csv"),
          write_csv(("offset_hz", "pool_polarization"), rows, _precision(args, cfg)))
    return EXIT_OK


def _initial_state(cfg: RunConfig, system) -> np.ndarray:
    if cfg.has("protocol", "polarization"):
        raw = cfg.get("protocol", "polarization").replace(",", " ").split()
        try:
            pol = [float(x) for x in raw]
        except ValueError:
            raise ConfigError(f"{cfg.where('protocol', 'polarization')}: polarizations must be numbers") from None
        if len(pol) == 1:
            pol = pol * system.n_spins
        if len(pol) != system.n_spins:
            raise ConfigError(f"{cfg.where('protocol', 'polarization')}: need 1 or "
                              f"{system.n_spins} values, got {len(pol)}")
    else:
        p_s = cfg.get("protocol", "polarization_s", float, 1.0)
        p_i = cfg.get("protocol", "polarization_i", float, 0.0)
        pol = [p_s if s.role == "S" else p_i for s in system.sites]
    try:
        return dyn.product_state(pol)
    except ValueError as exc:
        raise ConfigError(f"{cfg.source}[protocol]: {exc}") from None


def cmd_exact(args) -> int:
    cfg = _load(args)
    system = build_system(cfg)
    max_spins = cfg.get("protocol", "max_spins", int, dyn.MAX_SPINS)
    segments = parse_segments(cfg)
    interval = cfg.require("protocol", "sample_interval_s", float)
    if interval <= 0:
        raise ConfigError(f"{cfg.where('protocol', 'sample_interval_s')}: must be positive")
    schedule = []
    if cfg.has("pulse"):
        pulse, _ = build_pulse(cfg)
        settings = build_settings(cfg, cfg.get("pulse", "field_g", float, segments[0].settings.field.strength))
        s_sp = system.s_species
        carrier = ((s_sp.larmor(settings.field) - settings.frame_hz(system)) * 1e-3
                   - cfg.get("protocol", "offset_khz", float, 0.0))
        schedule.append(dyn.PulseSegment(pulse.with_carrier(carrier), s_sp.label, settings))
    schedule.extend(segments)
    rho0 = _initial_state(cfg, system)
    traj = dyn.run_trajectory(system, rho0, schedule, interval, max_spins=max_spins)
    _emit(_out_path(args, cfg, "trajectory.csv"), traj.to_csv(_precision(args, cfg)))
    return EXIT_OK


def protocol_from_config(cfg: RunConfig) -> ProtocolConfig:
    backend = cfg.get("protocol", "backend", default="mixing")
    system = build_system(cfg) if cfg.has("system") else None
    m = cfg.get("protocol", "m", int)
    if m is None and system is not None:
        m = system.m
    if backend == "mixing" and m is None:
        raise ConfigError(f"{cfg.source}: missing key 'm' in [protocol]")
    timeline = build_timeline_cfg(cfg)
    t1 = build_t1(cfg)
    pulse = build_pulse(cfg)[0] if cfg.has("pulse") else None
    high = cfg.get("protocol", "high_field_g", float, cfg.get("timeline", "high_field_g", float, 4000.0))
    try:
        return ProtocolConfig(
            backend=backend, n_steps=_n_steps(cfg, m), m=m,
            eps0=cfg.get("protocol", "eps0", float, 0.12), system=system, pulse=pulse,
            offset=cfg.get("protocol", "offset_khz", float, 0.0),
            f=cfg.get("protocol", "f", float, -1.0), timeline=timeline, t1=t1,
            eta=cfg.get("protocol", "eta", float), q=cfg.get("protocol", "q", float, 1.0),
            high_settings=build_settings(cfg, high),
            max_spins=cfg.get("protocol", "max_spins", int, dyn.MAX_SPINS))
    except ValueError as exc:
        raise ConfigError(f"{cfg.source}: {exc}") from None


def _summary(result, precision):
    summary = result.summary()
    if not np.isfinite(summary["relative_gain"]):
        summary["relative_gain"] = None
    return to_json(summary, precision)


def cmd_protocol(args) -> int:
    cfg = _load(args)
    result = run_protocol(protocol_from_config(cfg))
    prec = _precision(args, cfg)
    path = _out_path(args, cfg, "protocol.csv")
    _emit(path, result.to_csv(prec))
    _emit(os.path.splitext(path)[0] + "_summary.json", _summary(result, prec))
    return EXIT_OK


def _point_name(coords) -> str:
    parts = [f"{key.split('.', 1)[1]}={value}" for key, value in coords]
    return "protocol__" + "__".join(re.sub(r"[^A-Za-z0-9_.=+-]", "_", p) for p in parts)


def _sweep_point(cfg: RunConfig, coords, out_dir: str, precision: int):
    cfg = cfg.copy()
    for key, value in coords:
        cfg.override(key, value)
    result = run_protocol(protocol_from_config(cfg))
    stem = os.path.join(out_dir, _point_name(coords))
    atomic_write(stem + ".csv", result.to_csv(precision))
    atomic_write(stem + ".json", _summary(result, precision))
    return stem, result.summary()


def cmd_sweep(args) -> int:
    cfg = _load(args)
    if not args.param:
        raise ConfigError("empty sweep: give at least one --param section.key=GRID")
    if len(args.param) > 2:
        raise ConfigError("sweeps nest at most two parameters")
    axes = []
    for item in args.param:
        key, sep, grid = item.partition("=")
        if not sep:
            raise ConfigError(f"--param expects section.key=GRID, got {item!r}")
        key = key.strip()
        cfg.copy().override(key, "0")  # validates the key name
        axes.append([(key, v) for v in grid_strings(grid)])
    points = list(itertools.product(*axes))
    prec = _precision(args, cfg)
    out_dir = getattr(args, "out", None) or "."
    os.makedirs(out_dir, exist_ok=True)
    jobs = max(1, getattr(args, "jobs", None) or 1)
    if jobs == 1 or len(points) == 1:
        results = [_sweep_point(cfg, p, out_dir, prec) for p in points]
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, len(points))) as pool:
            results = list(pool.map(_sweep_point, itertools.repeat(cfg), points,
                                    itertools.repeat(out_dir), itertools.repeat(prec)))
    keys = [k for k, _ in points[0]]
    rows = []
    for coords, (stem, summary) in zip(points, results):
        rows.append([v for _, v in coords] + [os.path.basename(stem) + ".csv",
                     summary["final_delta_P"], summary["relative_gain"], summary["gain"]])
        print(stem + ".csv")
    header = [k.split(".", 1)[1] for k in keys] + ["file", "final_delta_P", "relative_gain", "gain"]
    _emit(os.path.join(out_dir, "sweep_index.csv"), write_csv(header, rows, prec))
    return EXIT_OK


def cmd_eta(args) -> int:
    cfg = _load(args)
    _apply_flags(cfg, args, [("shuttle_up", "timeline.shuttle_up_s"), ("dwell", "timeline.dwell_s"),
                             ("shuttle_down", "timeline.shuttle_down_s"),
                             ("high_dwell", "timeline.high_dwell_s"),
                             ("low_field", "timeline.low_field_g"),
                             ("high_field", "timeline.high_field_g"), ("t1", "timeline.t1"),
                             ("t1_interp", "timeline.t1_interp")])
    try:
        timeline = build_timeline_cfg(cfg)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    t1 = build_t1(cfg)
    eta = cycle_survival(timeline, t1)
    prec = _precision(args, cfg)
    report = {
        "eta": eta,
        "segments": [{"label": s.label, "duration_s": s.duration, "field_g": s.field,
                      "t1_s": t1(s.field)} for s in timeline.segments],
    }
    print(f"eta = {eta:.{prec}g}")
    _emit(_out_path(args, cfg, "eta.json"), to_json(report, prec))
    return EXIT_OK


# --- parser -----------------------------------------------------------------------

_PULSE_FLAGS = [("family", "pulse.family"), ("peak", "pulse.peak_khz"),
                ("duration", "pulse.duration_s"), ("n_samples", "pulse.n_samples"),
                ("offsets", "pulse.offsets_khz")]


def _global_flags(parser, suppress: bool):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--out", default=default, help="output directory (default: .)")
    parser.add_argument("--jobs", type=int, default=default, help="parallel sweep jobs")
    parser.add_argument("--precision", type=int, default=default,
                        help="significant digits for floats (default 9)")


def _pulse_args(p):
    p.add_argument("--family", choices=["hermite", "constant"])
    p.add_argument("--peak", type=float, help="peak amplitude, kHz")
    p.add_argument("--duration", type=float, help="pulse length, s (calibrated if omitted)")
    p.add_argument("--n-samples", type=int)
    p.add_argument("--offsets", help="offset grid in kHz, start:stop:step or a,b,c")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spinamp", description=__doc__.split("\n\n")[0].strip())
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, func, help_text, config="optional"):
        p = sub.add_parser(name, help=help_text)
        _global_flags(p, suppress=True)
        if config == "required":
            p.add_argument("config", help="INI config file")
        else:
            p.add_argument("--config", help="INI config file")
        p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                       help="override a config entry (repeatable)")
        p.set_defaults(func=func)
        return p

    p = command("gain", cmd_gain, "gain versus number of steps")
    p.add_argument("--m", type=int)
    p.add_argument("--n-max", type=int)
    p.add_argument("--mode", choices=["closed", "iterate"])
    p.add_argument("--eta", type=float)
    p.add_argument("--eps0", type=float)

    p = command("spectrum", cmd_spectrum, "spin-amplified frequency-response spectrum")
    _pulse_args(p)
    p.add_argument("--m", type=int)
    p.add_argument("--n", type=int, help="number of amplification steps")
    p.add_argument("--eps0", type=float)
    p.add_argument("--eta", type=float)

    p = command("pulse-profile", cmd_pulse_profile, "pulse shape and excitation profile")
    _pulse_args(p)

    command("exact", cmd_exact, "exact density-matrix trajectory", config="required")
    command("protocol", cmd_protocol, "full amplification protocol", config="required")

    p = command("sweep", cmd_sweep, "protocol over a parameter grid", config="required")
    p.add_argument("--param", action="append", metavar="SECTION.KEY=GRID",
                   help="grid start:stop:step or a,b,c; give twice for a 2-D sweep")

    p = command("eta", cmd_eta, "per-cycle survival from a field-cycling timeline")
    p.add_argument("--shuttle-up", type=float)
    p.add_argument("--dwell", type=float)
    p.add_argument("--shuttle-down", type=float)
    p.add_argument("--high-dwell", type=float)
    p.add_argument("--low-field", type=float)
    p.add_argument("--high-field", type=float)
    p.add_argument("--t1", help="'field_g t1_s; field_g t1_s ...'")
    p.add_argument("--t1-interp", choices=["nearest", "log-linear"])
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, SpinSystemError, dyn.SystemTooLarge) as exc:
        print(f"spinamp: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (dyn.DynamicsError, CalibrationError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"spinamp: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, KeyError) as exc:
        print(f"spinamp: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
