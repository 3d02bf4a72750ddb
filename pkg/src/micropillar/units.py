"""Parse quantities such as ``"1.0 mm"`` or ``"3.66 MHz"`` into SI floats."""

from __future__ import annotations

import math
import re

_SCALES = {
    "length": {"m": 1.0, "cm": 1e-2, "mm": 1e-3, "um": 1e-6, "µm": 1e-6, "μm": 1e-6, "nm": 1e-9},
    "frequency": {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9},
    "temperature": {"K": 1.0, "mK": 1e-3, "uK": 1e-6, "µK": 1e-6, "μK": 1e-6, "nK": 1e-9},
    "pressure": {"Pa": 1.0, "kPa": 1e3, "MPa": 1e6, "GPa": 1e9},
    "density": {"kg/m^3": 1.0, "kg/m3": 1.0, "g/cm^3": 1e3, "g/cm3": 1e3},
    "mass": {"kg": 1.0, "g": 1e-3, "mg": 1e-6, "ug": 1e-9, "µg": 1e-9, "μg": 1e-9, "ng": 1e-12},
    "stiffness": {"N/m": 1.0, "kN/m": 1e3, "MN/m": 1e6},
    "force": {"N": 1.0, "mN": 1e-3, "uN": 1e-6, "µN": 1e-6, "μN": 1e-6, "nN": 1e-9, "pN": 1e-12},
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6, "μs": 1e-6, "ns": 1e-9},
    "angle": {"rad": 1.0, "mrad": 1e-3, "deg": math.pi / 180},
    "dimensionless": {"": 1.0, "ppm": 1e-6, "%": 1e-2},
}

SI_UNIT = {
    "length": "m", "frequency": "Hz", "temperature": "K", "pressure": "Pa",
    "density": "kg/m^3", "mass": "kg", "stiffness": "N/m", "force": "N", "time": "s",
    "angle": "rad", "dimensionless": "1",
}

_NUMBER = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?|[-+]?inf)\s*(.*?)\s*$")


class UnitError(ValueError):
    pass


def parse_quantity(text: str, dimension: str) -> float:
    """Convert ``text`` to SI for ``dimension``; a bare number is taken as SI."""
    m = _NUMBER.match(str(text))
    if m is None:
        raise UnitError(f"cannot read a number from {text!r}")
    value, unit = float(m.group(1)), m.group(2)
    scales = _SCALES[dimension]
    if unit == "" or unit == SI_UNIT[dimension]:
        return value
    if unit not in scales:
        known = ", ".join(u for u in scales if u) or "none"
        raise UnitError(f"unit {unit!r} is not a {dimension} unit (expected one of: {known})")
    return value * scales[unit]
