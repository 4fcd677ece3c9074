"""Run configuration: INI sections with unit-suffixed keys.

Values are resolved in three layers, later ones winning: built-in defaults
(optionally replaced by a preset), the ``--config`` file, command-line flags.
Every value is kept as text so the resolved configuration can be echoed
into a manifest and parsed back unchanged.
"""
from __future__ import annotations

import configparser
import json
import re
from pathlib import Path

import numpy as np

from .exceptions import ConfigError
from .presets import ExperimentPreset, get_preset

DEFAULTS = {
    "geometry": {"wavelength_nm": "671", "theta_deg": "90", "phi_deg": "0"},
    "packet": {"species": "Li7", "mass_amu": "", "omega_khz": "256", "nbar": "0", "time_us": "0"},
    "corrections": {"saturation": "0", "branching": "1"},
    "state": {"epsilon": "0.05", "r1_nm": "0,0,0", "r2_nm": "0,0,0"},
    "lattice": {"shape": "sphere", "radius_sites": "19.3", "edge_sites": "20", "jitter": "true",
                "spacing_nm": "532", "hole_probability": "0", "shells": "", "seed": "0"},
    "scan": {"grid": "fibonacci", "n_directions": "1000", "theta_deg": "", "phi_deg": "",
             "k_in": "0,0,1", "ensemble_size": "1", "bragg_margin": "5"},
    "timeseries": {"t_min_us": "-0.5", "t_max_us": "3", "n_points": "401", "structure_factor": "0.1",
                   "pulse_fwhm_us": "0.1"},
    "mc": {"n_samples": "1000000", "seed": "0"},
}


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def preset_layer(preset: ExperimentPreset) -> dict:
    shape = preset.lattice_shape
    omega = ",".join(_fmt(f / 1e3) for f in preset.trap_frequency)
    decoherence_scale = 1e6 / min(preset.trap_frequency)  # us per 1/f
    return {
        "geometry": {"wavelength_nm": _fmt(preset.wavelength * 1e9),
                     "theta_deg": _fmt(np.degrees(preset.theta))},
        "packet": {"species": preset.species, "omega_khz": omega},
        "corrections": {"saturation": _fmt(preset.corrections.saturation),
                        "branching": _fmt(preset.corrections.branching)},
        "lattice": {"shape": "sphere", "radius_sites": _fmt(shape.radius),
                    "jitter": "true" if shape.jitter else "false",
                    "spacing_nm": _fmt(preset.spacing * 1e9),
                    "hole_probability": _fmt(preset.defects.hole_probability),
                    "shells": ",".join(f"{_fmt(r)}:{n}" for r, n in preset.defects.shells)},
        "timeseries": {"structure_factor": _fmt(preset.structure_factor),
                       "t_max_us": _fmt(round(0.8 * decoherence_scale, 1)),
                       "pulse_fwhm_us": _fmt(preset.pulse_fwhm * 1e6)},
    }


class RunConfig:
    """Resolved configuration with typed, location-aware accessors."""

    def __init__(self, values: dict, origins: dict | None = None):
        self.values = values
        self.origins = origins or {}

    def as_dict(self) -> dict:
        return {s: dict(kv) for s, kv in self.values.items()}

    def to_ini(self) -> str:
        lines = []
        for section, kv in self.values.items():
            lines.append(f"[{section}]")
            lines.extend(f"{k} = {v}" for k, v in kv.items())
            lines.append("")
        return "\n".join(lines)

    def _error(self, section, key, message):
        path, lineno = self.origins.get((section, key), (None, None))
        if path is None:
            raise ConfigError(f"[{section}] {key}: {message}")
        raise ConfigError(f"[{section}] {key}: {message}", path, lineno)

    def raw(self, section, key) -> str:
        return self.values[section][key]

    def text(self, section, key) -> str:
        return self.raw(section, key).strip()

    def float(self, section, key) -> float:
        try:
            return float(self.raw(section, key))
        except ValueError:
            self._error(section, key, f"expected a number, got {self.raw(section, key)!r}")

    def int(self, section, key) -> int:
        raw = self.raw(section, key)
        try:
            value = float(raw)
        except ValueError:
            self._error(section, key, f"expected an integer, got {raw!r}")
        if value != int(value):
            self._error(section, key, f"expected an integer, got {raw!r}")
        return int(value)

    def bool(self, section, key) -> bool:
        raw = self.text(section, key).lower()
        if raw in ("1", "true", "yes", "on"):
            return True
        if raw in ("0", "false", "no", "off"):
            return False
        self._error(section, key, f"expected a boolean, got {raw!r}")

    def floats(self, section, key) -> list[float]:
        raw = self.text(section, key)
        if not raw:
            return []
        try:
            return [float(v) for v in raw.split(",")]
        except ValueError:
            self._error(section, key, f"expected comma-separated numbers, got {raw!r}")

    def vector(self, section, key, n=3) -> np.ndarray:
        vals = self.floats(section, key)
        if len(vals) == 1 and n == 3:
            vals = vals * 3
        if len(vals) != n:
            self._error(section, key, f"expected {n} comma-separated numbers")
        return np.array(vals)

    def complex(self, section, key) -> complex:
        raw = self.text(section, key).replace(" ", "")
        try:
            return complex(raw)
        except ValueError:
            self._error(section, key, f"expected a complex number like 0.05+0.01j, got {raw!r}")

    def choice(self, section, key, options) -> str:
        raw = self.text(section, key)
        if raw not in options:
            self._error(section, key, f"must be one of {', '.join(options)}, got {raw!r}")
        return raw

    def shells(self) -> tuple:
        raw = self.text("lattice", "shells")
        out = []
        for item in filter(None, (s.strip() for s in raw.split(","))):
            r, sep, n = item.partition(":")
            try:
                if not sep:
                    raise ValueError
                out.append((float(r), int(n)))
            except ValueError:
                self._error("lattice", "shells", f"expected 'radius:occupation' pairs, got {item!r}")
        return tuple(out)


_KEY_RE = re.compile(r"^\s*([A-Za-z0-9_]+)\s*[=:]")
_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")


def _locate_keys(text: str, path) -> dict:
    origins = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        m = _SECTION_RE.match(line)
        if m:
            section = m.group(1).strip()
            origins.setdefault((section, None), (str(path), lineno))
            continue
        m = _KEY_RE.match(line)
        if m and section is not None:
            origins[(section, m.group(1).lower())] = (str(path), lineno)
    return origins


def read_config_file(path) -> tuple[dict, dict]:
    """Parse an INI file or a run manifest into ``(values, origins)``."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", path) from None
    if path.suffix == ".json":
        try:
            values = json.loads(text)["config"]
        except (ValueError, KeyError):
            raise ConfigError("not a run manifest (expected a JSON object with 'config')", path) from None
        return {s: {k: str(v) for k, v in kv.items()} for s, kv in values.items()}, {}

    parser = configparser.ConfigParser(interpolation=None, strict=True, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=str(path))
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section [{exc.section}]", path, exc.lineno) from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"duplicate key {exc.option!r} in [{exc.section}]", path, exc.lineno) from None
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("key outside of any [section]", path, exc.lineno) from None
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else None
        raise ConfigError("malformed line", path, lineno) from None
    origins = _locate_keys(text, path)
    values = {}
    for section in parser.sections():
        if section not in DEFAULTS:
            _, lineno = origins.get((section, None), (None, None))
            raise ConfigError(f"unknown section [{section}]", path, lineno)
        for key, value in parser.items(section):
            if key not in DEFAULTS[section]:
                _, lineno = origins.get((section, key), (None, None))
                raise ConfigError(f"unknown key {key!r} in [{section}]", path, lineno)
            values.setdefault(section, {})[key] = value
    return values, origins


def resolve(preset: str | None = None, config_path=None, overrides: dict | None = None) -> RunConfig:
    """Merge defaults, preset, config file and ``overrides`` (``{(section, key): text}``)."""
    values = {s: dict(kv) for s, kv in DEFAULTS.items()}
    origins = {}
    layers = []
    if preset:
        try:
            layers.append(preset_layer(get_preset(preset)))
        except KeyError as exc:
            raise ConfigError(exc.args[0]) from None
    if config_path is not None:
        file_values, origins = read_config_file(config_path)
        layers.append(file_values)
    for layer in layers:
        for section, kv in layer.items():
            if section not in values:
                raise ConfigError(f"unknown section [{section}]", config_path)
            for key, value in kv.items():
                if key not in values[section]:
                    raise ConfigError(f"unknown key {key!r} in [{section}]", config_path)
                values[section][key] = value
    for (section, key), value in (overrides or {}).items():
        values[section][key] = value
        origins.pop((section, key), None)
    return RunConfig(values, origins)
