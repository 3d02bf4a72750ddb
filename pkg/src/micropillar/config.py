"""INI-style run configuration with unit-suffixed values.

Example::

    [material]
    young_modulus = 102.7 GPa
    density = 2648 kg/m^3

    [geometry]
    length = 1.0 mm
    width = 240 um

Every value missing from the file is filled from the defaults below (the
published device), and each fill is recorded in ``RunConfig.defaults_applied``.
"""

from __future__ import annotations

import configparser
import math
import os
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

from .physmodel import (
    CrossSection, Frame, Material, OscillatorParams, PillarGeometry, SHAPES, ValidationError,
)
from .bench import InterferometerParams
from .units import SI_UNIT, UnitError, parse_quantity

CONFIG_DIR_ENV = "MICROPILLAR_CONFIG_DIR"


class ConfigError(ValueError):
    """Bad key, unit or value in a configuration document."""


# section -> key -> (kind, default, note); kind is a dimension name, "int",
# "bool" or "choice:a|b".
SCHEMA = {
    "material": {
        "young_modulus": ("pressure", 102.7e9, "quartz bulk Young modulus"),
        "density": ("density", 2648.0, "quartz density"),
        "intrinsic_q": ("dimensionless", 5e6, "room-temperature intrinsic Q of quartz"),
    },
    "geometry": {
        "length": ("length", 1e-3, "pillar length"),
        "shape": ("choice:" + "|".join(SHAPES), "equilateral-triangle",
                  "cross-section assumed equilateral; the published '240 um wide' is read as the triangle side"),
        "width": ("length", 240e-6, "pillar width (triangle side / square side / circle diameter)"),
        "membrane_thickness": ("length", 20e-6, "central membrane thickness"),
        "membrane_stiffness": ("stiffness", None, "lumped membrane stiffness derived as E x thickness"),
        "membrane_offset": ("length", 0.0, "membrane on the pillar mid-plane (perfectly symmetric etch)"),
        "membrane_mass": ("mass", 0.0, "membrane mass neglected"),
    },
    "frame": {
        "enabled": ("bool", False, "no dynamical frame modelled"),
        "length": ("length", 0.5e-3, "frame length is an assumption (not published)"),
        "shape": ("choice:" + "|".join(SHAPES), "square", "frame cross-section is an assumption"),
        "width": ("length", 0.5e-3, "frame width is an assumption (not published)"),
        "outer_membrane_stiffness": ("stiffness", None, "outer membrane stiffness derived as E x membrane thickness"),
    },
    "coating": {
        "n_high": ("dimensionless", 2.07, "Ta2O5 index assumed"),
        "n_low": ("dimensionless", 1.45, "SiO2 index assumed"),
        "doublets": ("int", 15, "15 quarter-wave doublets"),
        "wavelength": ("length", 1064e-9, "Nd:YAG design wavelength"),
        "incident_index": ("dimensionless", 1.0, "vacuum on the incidence side"),
        "substrate_index": ("dimensionless", 1.54, "quartz substrate index assumed"),
        "round_trip_loss": ("dimensionless", 0.0, "absorption and scatter neglected"),
        "partner_transmission": ("dimensionless", 100e-6, "second cavity mirror at the 100 ppm design value"),
    },
    "oscillator": {
        "frequency": ("frequency", 4e6, "reference frequency of the noise scaling law"),
        "effective_mass": ("mass", 25e-9, "design effective mass"),
        "quality_factor": ("dimensionless", 1e6, "target intrinsic Q"),
        "temperature": ("temperature", 100e-3, "cryostat temperature"),
        "cooled_temperature": ("temperature", 100e-6, "target effective temperature after laser cooling"),
    },
    "bench": {
        "wavelength": ("length", 1064e-9, "Nd:YAG probe"),
        "mean_intensity": ("dimensionless", 1.0, "detector units are arbitrary"),
        "visibility": ("dimensionless", 1.0, "perfect fringe contrast"),
        "operating_phase": ("angle", math.pi / 2, "mid-fringe lock"),
        "additive_noise_rms": ("dimensionless", 0.0, "no detector noise"),
        "jitter_rms": ("angle", 0.1, "interferometer jitter rms is an assumption"),
        "jitter_correlation_time": ("time", 10e-3, "jitter correlation time is an assumption"),
        "seed": ("int", 0, "random seed"),
        "drive_force": ("force", 1e-12, "drive force amplitude"),
        "amplitude": ("length", 5e-9, "initial ring-down amplitude (order of the observed 5 nm)"),
        "duration": ("time", 0.2, "ring-down record length"),
        "sample_rate": ("frequency", 16e6, "digitizer rate"),
        "snr": ("dimensionless", 100.0, "initial amplitude over noise rms"),
        "mode": ("choice:full|envelope", "full", "full carrier waveform recorded"),
        "span_linewidths": ("dimensionless", 10.0, "sweep half-span in linewidths"),
        "n_points": ("int", 401, "sweep points"),
        "dwell_time": ("time", 0.1, "network-analyzer dwell per point"),
    },
    "modal": {
        "n_elements": ("int", 200, "elements per member"),
        "n_modes": ("int", 8, "modes reported"),
    },
    "sweep": {
        "parameter": ("choice:length|width|membrane_thickness|membrane_offset|frame_length|frame_width",
                      "membrane_offset", "swept geometry parameter"),
        "start": ("raw", "0 um", "sweep start"),
        "stop": ("raw", "20 um", "sweep stop"),
        "steps": ("int", 11, "sweep points"),
    },
}

SWEEP_DIMENSION = {p: "length" for p in
                   ("length", "width", "membrane_thickness", "membrane_offset", "frame_length", "frame_width")}


@dataclass
class RunConfig:
    material: Material
    geometry: PillarGeometry
    coating: dict
    oscillator: OscillatorParams
    cooled_temperature: float
    interferometer: InterferometerParams
    bench: dict
    modal: dict
    sweep: dict
    values: dict
    defaults_applied: list = field(default_factory=list)
    source: str = "<defaults>"


def _line_of(text: str, section: str, key: Optional[str] = None) -> int:
    current = None
    for i, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        m = re.match(r"^\[([^\]]+)\]", s)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return i
            continue
        if key is not None and current == section and re.match(rf"^{re.escape(key)}\s*[=:]", s):
            return i
    return 0


def _where(text: str, source: str, section: str, key: Optional[str] = None) -> str:
    line = _line_of(text, section, key)
    name = f"{section}.{key}" if key else f"[{section}]"
    return f"{source}:{line}: {name}" if line else f"{source}: {name}"


def _convert(kind: str, raw: str):
    raw = raw.strip().strip('"').strip("'")
    if kind == "int":
        try:
            return int(raw)
        except ValueError:
            raise UnitError(f"expected an integer, got {raw!r}") from None
    if kind == "bool":
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise UnitError(f"expected a boolean, got {raw!r}")
    if kind.startswith("choice:"):
        choices = kind[len("choice:"):].split("|")
        if raw not in choices:
            raise UnitError(f"expected one of {', '.join(choices)}, got {raw!r}")
        return raw
    if kind == "raw":
        return raw
    return parse_quantity(raw, kind)


def parse_config(text: str = "", source: str = "<string>") -> RunConfig:
    """Parse, SI-normalise and validate a configuration document."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None

    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{_where(text, source, section)}: unknown section")
        for key in parser[section]:
            if key not in SCHEMA[section]:
                raise ConfigError(f"{_where(text, source, section, key)}: unknown key")

    values: dict = {}
    defaults: list = []
    for section, keys in SCHEMA.items():
        values[section] = {}
        for key, (kind, default, note) in keys.items():
            if parser.has_option(section, key):
                try:
                    values[section][key] = _convert(kind, parser[section][key])
                except UnitError as exc:
                    raise ConfigError(f"{_where(text, source, section, key)}: {exc}") from None
            else:
                values[section][key] = default
                if section == "frame" and not parser.has_section("frame") and key != "enabled":
                    continue
                if section == "sweep":
                    continue
                shown = "derived" if default is None else _fmt_default(kind, default)
                defaults.append(f"{section}.{key} = {shown} ({note})")
    if parser.has_section("frame") and not parser.has_option("frame", "enabled"):
        values["frame"]["enabled"] = True
        defaults = [d for d in defaults if not d.startswith("frame.enabled")]

    def build(section, key, fn):
        try:
            return fn()
        except ValidationError as exc:
            raise ConfigError(f"{_where(text, source, section, key)}: {exc}") from None

    m, g, f, o, b = (values[s] for s in ("material", "geometry", "frame", "oscillator", "bench"))
    material = build("material", None, lambda: Material(m["young_modulus"], m["density"], m["intrinsic_q"]))
    frame = None
    if f["enabled"]:
        outer = f["outer_membrane_stiffness"]
        if outer is None:
            outer = material.young_modulus * g["membrane_thickness"]
        frame = build("frame", None, lambda: Frame(f["length"], CrossSection(f["shape"], f["width"]), outer))

    def make_geometry():
        # name the offending field, in declaration order
        for key in ("length", "width", "membrane_thickness"):
            if not g[key] > 0:
                raise ConfigError(f"{_where(text, source, 'geometry', key)}: {key} must be positive")
        return PillarGeometry(
            length=g["length"],
            cross_section=CrossSection(g["shape"], g["width"]),
            membrane_thickness=g["membrane_thickness"],
            membrane_stiffness_scale=g["membrane_stiffness"],
            frame=frame,
            membrane_offset=g["membrane_offset"],
            membrane_mass=g["membrane_mass"],
        )

    geometry = build("geometry", None, make_geometry)
    oscillator = build("oscillator", None, lambda: OscillatorParams(
        o["frequency"], o["effective_mass"], o["quality_factor"], o["temperature"]))
    if not 0 < o["cooled_temperature"] <= o["temperature"]:
        raise ConfigError(f"{_where(text, source, 'oscillator', 'cooled_temperature')}: "
                          "cooled_temperature must be positive and not above temperature")
    interferometer = build("bench", None, lambda: InterferometerParams(
        wavelength=b["wavelength"], mean_intensity=b["mean_intensity"], visibility=b["visibility"],
        operating_phase=b["operating_phase"], additive_noise_rms=b["additive_noise_rms"],
        jitter_rms=b["jitter_rms"], jitter_correlation_time=b["jitter_correlation_time"], seed=b["seed"]))
    for key in ("duration", "sample_rate", "snr", "n_points", "dwell_time", "span_linewidths"):
        if not b[key] > 0:
            raise ConfigError(f"{_where(text, source, 'bench', key)}: {key} must be positive")
    c = values["coating"]
    for key in ("n_high", "n_low", "incident_index", "substrate_index"):
        if not c[key] >= 1:
            raise ConfigError(f"{_where(text, source, 'coating', key)}: {key} must be >= 1")
    if c["doublets"] < 0:
        raise ConfigError(f"{_where(text, source, 'coating', 'doublets')}: doublets must be >= 0")
    if values["modal"]["n_elements"] < 4:
        raise ConfigError(f"{_where(text, source, 'modal', 'n_elements')}: n_elements must be >= 4")

    sw = values["sweep"]
    dim = SWEEP_DIMENSION[sw["parameter"]]
    for key in ("start", "stop"):
        try:
            sw[key] = parse_quantity(sw[key], dim)
        except UnitError as exc:
            raise ConfigError(f"{_where(text, source, 'sweep', key)}: {exc}") from None

    return RunConfig(
        material=material,
        geometry=geometry,
        coating=dict(c),
        oscillator=oscillator,
        cooled_temperature=o["cooled_temperature"],
        interferometer=interferometer,
        bench=dict(b),
        modal=dict(values["modal"]),
        sweep=dict(sw),
        values=values,
        defaults_applied=defaults,
        source=source,
    )


def _fmt_default(kind: str, value) -> str:
    if kind in SI_UNIT:
        unit = SI_UNIT[kind]
        return f"{value:.6g}" + ("" if unit == "1" else f" {unit}")
    return str(value)


def resolve_config_path(name: str) -> Path:
    """Find a config file: as given, then in $MICROPILLAR_CONFIG_DIR, then bundled."""
    path = Path(name)
    if path.is_file():
        return path
    if not path.is_absolute():
        env_dir = os.environ.get(CONFIG_DIR_ENV)
        if env_dir and (Path(env_dir) / name).is_file():
            return Path(env_dir) / name
        bundled = resources.files("micropillar") / "data" / path.name
        if bundled.is_file():
            return Path(str(bundled))
    raise FileNotFoundError(f"config file not found: {name}")


def load_config(name: str) -> RunConfig:
    path = resolve_config_path(name)
    return parse_config(path.read_text(encoding="utf-8"), source=str(name))
