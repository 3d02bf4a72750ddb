"""Dielectric mirror on the pillar top: transfer matrices and finesse."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .physmodel import CoatingStack, Layer, validate

N_SIO2 = 1.45
N_TA2O5 = 2.07
N_QUARTZ = 1.54
ND_YAG = 1064e-9

HIGH_FINESSE_LIMIT = 0.1


class FinesseRegimeError(ValueError):
    pass


@dataclass(frozen=True)
class StackResponse:
    reflectance: float
    transmittance: float
    r: complex
    t: complex


def quarter_wave_stack(n_high: float = N_TA2O5, n_low: float = N_SIO2, doublets: int = 15,
                       wavelength: float = ND_YAG, incident_index: float = 1.0,
                       substrate_index: float = N_QUARTZ) -> CoatingStack:
    """(HL)^N stack, high index on the incidence side, each layer lambda0/(4n) thick."""
    if doublets < 0:
        raise ValueError("doublets must be >= 0")
    pair = (Layer(n_high, wavelength / (4 * n_high)), Layer(n_low, wavelength / (4 * n_low)))
    return CoatingStack(incident_index, substrate_index, pair * doublets, wavelength)


def characteristic_matrix(stack: CoatingStack, wavelength: float) -> np.ndarray:
    """Product of the 2x2 layer matrices at normal incidence."""
    m = np.eye(2, dtype=complex)
    for layer in stack.layers:
        delta = 2 * math.pi * layer.index * layer.thickness / wavelength
        c, s = math.cos(delta), math.sin(delta)
        m = m @ np.array([[c, 1j * s / layer.index], [1j * layer.index * s, c]])
    return m


def stack_transmission(stack: CoatingStack, wavelength: float) -> StackResponse:
    validate(stack)
    n0, ns = stack.incident_index, stack.substrate_index
    (m11, m12), (m21, m22) = characteristic_matrix(stack, wavelength)
    b = m11 + m12 * ns
    c = m21 + m22 * ns
    denom = n0 * b + c
    r = (n0 * b - c) / denom
    t = 2 * n0 / denom
    R = float(abs(r) ** 2)
    # lossless stack: this equals 1 - R without the cancellation near R = 1
    T = float(ns / n0 * abs(t) ** 2)
    return StackResponse(R, T, complex(r), complex(t))


def quarter_wave_admittance(n_high: float, n_low: float, doublets: int, substrate_index: float) -> float:
    """Admittance of an (HL)^N quarter-wave stack at its design wavelength."""
    return (n_high / n_low) ** (2 * doublets) * substrate_index


def quarter_wave_transmission(n_high: float, n_low: float, doublets: int,
                              incident_index: float = 1.0, substrate_index: float = N_QUARTZ) -> float:
    """Closed form T = 4 n0 Y / (n0 + Y)^2 at the design wavelength."""
    y = quarter_wave_admittance(n_high, n_low, doublets, substrate_index)
    return 4 * incident_index * y / (incident_index + y) ** 2


def cavity_finesse(t1: float, t2: float, round_trip_loss: float = 0.0) -> float:
    """F = 2 pi / (t1 + t2 + losses), valid for total loss below 10 %."""
    total = t1 + t2 + round_trip_loss
    if min(t1, t2, round_trip_loss) < 0:
        raise ValueError("transmissions and losses must be non-negative")
    if not 0 < total < HIGH_FINESSE_LIMIT:
        raise FinesseRegimeError(
            f"total round-trip loss {total!r} is outside the high-finesse regime (0, {HIGH_FINESSE_LIMIT})"
        )
    return 2 * math.pi / total
