"""
INI-style run configuration.

Sections: ``[system] [pulse] [timeline] [protocol] [output]``.  Unknown
sections and keys are rejected with the offending line number.  Values are
kept as strings until a consumer asks for a typed value, so command-line
overrides (``section.key=value``) go through exactly the same parsing as
file entries.

Grid syntax (offset grids, sweep grids): ``start:stop:step`` with ``stop``
included when it lands on the grid, or an explicit comma-separated list.
"""

from __future__ import annotations

import configparser
import os
import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import dynamics as dyn
from .field_cycle import MEASURED_T1, T1Map, build_timeline
from .pulse import calibrate_duration, make_pulse
from .spin_system import FieldPoint, SpinSystemError, load_system, parse_system_text

KEYS = {
    "system": {"file", "species", "sites", "couplings", "field_axis"},
    "pulse": {"family", "peak_khz", "duration_s", "n_samples", "beta", "tau_max",
              "offsets_khz", "field_g"},
    "timeline": {"shuttle_up_s", "dwell_s", "shuttle_down_s", "high_dwell_s",
                 "low_field_g", "high_field_g", "t1", "t1_interp"},
    "protocol": {"backend", "n_steps", "n_max", "mode", "m", "eps0", "f", "offset_khz",
                 "eta", "q", "high_field_g", "frame_mhz", "flip_flop", "threshold_ratio",
                 "segments", "sample_interval_s", "polarization", "polarization_s",
                 "polarization_i", "max_spins"},
    "output": {"file", "precision"},
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    values: dict = field(default_factory=dict)   # section -> key -> str
    lines: dict = field(default_factory=dict)    # (section, key) -> line number
    source: str = "<config>"
    base_dir: str = "."

    # --- construction -------------------------------------------------

    @classmethod
    def from_text(cls, text: str, source: str = "<config>", base_dir: str = ".") -> "RunConfig":
        parser = configparser.ConfigParser(interpolation=None, strict=True,
                                           inline_comment_prefixes=("#",))
        parser.optionxform = str
        try:
            parser.read_string(text, source=source)
        except configparser.Error as exc:
            raise ConfigError(f"{source}: {exc}".replace("\n", " ")) from None
        lines = _locate_keys(text)
        values = {}
        for section in parser.sections():
            if section not in KEYS:
                ln = lines.get((section, None), "?")
                raise ConfigError(f"{source}:{ln}: unknown section [{section}]")
            for key, value in parser.items(section):
                if key not in KEYS[section]:
                    ln = lines.get((section, key), "?")
                    raise ConfigError(f"{source}:{ln}: unknown key '{key}' in [{section}]")
                values.setdefault(section, {})[key] = value
        return cls(values, lines, source, base_dir)

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = os.fspath(path)
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        return cls.from_text(text, path, os.path.dirname(os.path.abspath(path)))

    def override(self, dotted: str, value) -> None:
        section, _, key = dotted.partition(".")
        if section not in KEYS or key not in KEYS[section]:
            raise ConfigError(f"unknown config key {dotted!r}")
        self.values.setdefault(section, {})[key] = str(value)
        self.lines[(section, key)] = "override"

    def copy(self) -> "RunConfig":
        return RunConfig({s: dict(kv) for s, kv in self.values.items()}, dict(self.lines),
                         self.source, self.base_dir)

    # --- typed access --------------------------------------------------

    def has(self, section: str, key: Optional[str] = None) -> bool:
        if key is None:
            return section in self.values
        return key in self.values.get(section, {})

    def where(self, section, key) -> str:
        return f"{self.source}:{self.lines.get((section, key), '?')}"

    def get(self, section: str, key: str, kind=str, default=None, required: bool = False):
        raw = self.values.get(section, {}).get(key)
        if raw is None:
            if required:
                raise ConfigError(f"{self.source}: missing key '{key}' in [{section}]")
            return default
        try:
            if kind is bool:
                return _parse_bool(raw)
            if kind is int:
                return int(raw)
            return kind(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{self.where(section, key)}: bad value for {section}.{key}: {exc}") from None

    def require(self, section: str, key: str, kind=str):
        return self.get(section, key, kind, required=True)


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")
_KEY_RE = re.compile(r"^([^\s=:#;][^=:]*?)\s*[=:]")


def _locate_keys(text: str) -> dict:
    out = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), 1):
        m = _SECTION_RE.match(line)
        if m:
            section = m.group(1).strip()
            out.setdefault((section, None), lineno)
            continue
        m = _KEY_RE.match(line)
        if m and section is not None:
            out.setdefault((section, m.group(1).strip()), lineno)
    return out


# --- grids ------------------------------------------------------------------

def parse_grid(text: str) -> np.ndarray:
    """``start:stop:step`` (stop inclusive when on-grid) or ``a, b, c``."""
    text = text.strip()
    if not text:
        raise ConfigError("empty sweep")
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"range {text!r} must be start:stop:step")
        try:
            start, stop, stepv = (float(p) for p in parts)
        except ValueError:
            raise ConfigError(f"range {text!r} must be numeric") from None
        if stepv == 0 or (stop - start) * stepv < 0:
            raise ConfigError(f"range {text!r} is not monotone toward its stop value")
        count = int(np.floor((stop - start) / stepv + 1e-9)) + 1
        grid = start + stepv * np.arange(count)
    else:
        items = [p.strip() for p in text.split(",") if p.strip()]
        if not items:
            raise ConfigError("empty sweep")
        try:
            grid = np.array([float(p) for p in items])
        except ValueError:
            raise ConfigError(f"grid {text!r} must be numeric") from None
    if grid.size == 0:
        raise ConfigError("empty sweep")
    return grid


def grid_strings(text: str) -> list:
    """Grid values as the strings that go into config overrides and file names."""
    text = text.strip()
    if ":" in text:
        return [_short(v) for v in parse_grid(text)]
    parse_grid(text)
    return [p.strip() for p in text.split(",") if p.strip()]


def _short(v: float) -> str:
    return f"{float(v):.12g}"


# --- builders ---------------------------------------------------------------

def build_system(cfg: RunConfig):
    if not cfg.has("system"):
        raise ConfigError(f"{cfg.source}: missing section [system]")
    try:
        if cfg.has("system", "file"):
            path = cfg.get("system", "file")
            if not os.path.isabs(path):
                path = os.path.join(cfg.base_dir, path)
            return load_system(path)
        lines = ["species " + ln.strip()
                 for ln in cfg.require("system", "species").splitlines() if ln.strip()]
        lines += cfg.require("system", "sites").splitlines()
        lines += ["coupling " + ln.strip()
                  for ln in cfg.get("system", "couplings", default="").splitlines() if ln.strip()]
        if cfg.has("system", "field_axis"):
            lines.append("field_axis " + cfg.get("system", "field_axis"))
        text = "\n".join(lines)
        return parse_system_text(text, f"{cfg.source}[system]")
    except SpinSystemError as exc:
        raise ConfigError(str(exc)) from None


def build_timeline_cfg(cfg: RunConfig):
    g = lambda key, default: cfg.get("timeline", key, float, default)  # noqa: E731
    return build_timeline(g("shuttle_up_s", 0.67), g("dwell_s", 0.01), g("shuttle_down_s", 0.67),
                          g("high_dwell_s", 3.0), g("low_field_g", 100.0), g("high_field_g", 4000.0))


def build_t1(cfg: RunConfig) -> T1Map:
    interp = cfg.get("timeline", "t1_interp", default="nearest")
    if not cfg.has("timeline", "t1"):
        return T1Map(MEASURED_T1.entries, interp)
    entries = []
    for chunk in re.split(r"[;\n]", cfg.get("timeline", "t1")):
        if not chunk.strip():
            continue
        parts = chunk.split()
        if len(parts) != 2:
            raise ConfigError(f"{cfg.where('timeline', 't1')}: t1 entries are '<field_g> <t1_s>'")
        entries.append((float(parts[0]), float(parts[1])))
    try:
        return T1Map(tuple(entries), interp)
    except ValueError as exc:
        raise ConfigError(f"{cfg.where('timeline', 't1')}: {exc}") from None


def build_pulse(cfg: RunConfig, duration_override: Optional[float] = None):
    """(pulse, duration) from [pulse]; the duration is calibrated when not given."""
    family = cfg.get("pulse", "family", default="hermite")
    peak = cfg.require("pulse", "peak_khz", float)
    kw = {}
    if cfg.has("pulse", "n_samples"):
        kw["n_samples"] = cfg.get("pulse", "n_samples", int)
    if family == "hermite":
        for key in ("beta", "tau_max"):
            if cfg.has("pulse", key):
                kw[key] = cfg.get("pulse", key, float)
    duration = duration_override or cfg.get("pulse", "duration_s", float)
    try:
        if duration is None:
            duration = calibrate_duration(family, peak, **kw)
        return make_pulse(family, peak, duration, **kw), duration
    except ValueError as exc:
        raise ConfigError(f"{cfg.source}[pulse]: {exc}") from None


def build_settings(cfg: RunConfig, field_g: float) -> dyn.HamiltonianSettings:
    try:
        return dyn.HamiltonianSettings(
            FieldPoint(field_g),
            cfg.get("protocol", "frame_mhz", float),
            cfg.get("protocol", "flip_flop", default="auto"),
            cfg.get("protocol", "threshold_ratio", float, 1.0))
    except ValueError as exc:
        raise ConfigError(f"{cfg.source}[protocol]: {exc}") from None


def parse_segments(cfg: RunConfig):
    """[protocol] segments: one '<duration_s> <field_g> [flip_flop_mode]' per line."""
    raw = cfg.require("protocol", "segments")
    out = []
    for chunk in re.split(r"[;\n]", raw):
        parts = chunk.split()
        if not parts:
            continue
        if len(parts) not in (2, 3):
            raise ConfigError(f"{cfg.where('protocol', 'segments')}: segment must be "
                              "'<duration_s> <field_g> [mode]'")
        settings = build_settings(cfg, float(parts[1]))
        if len(parts) == 3:
            try:
                settings = dyn.HamiltonianSettings(settings.field, settings.frame_frequency,
                                                   parts[2], settings.threshold_ratio)
            except ValueError as exc:
                raise ConfigError(f"{cfg.where('protocol', 'segments')}: {exc}") from None
        out.append(dyn.FreeSegment(float(parts[0]), settings))
    if not out:
        raise ConfigError(f"{cfg.where('protocol', 'segments')}: no segments")
    return out
