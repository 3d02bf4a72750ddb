"""Ground-state criteria, displacement-noise scaling and thermal noise.

PSDs are one-sided with frequency argument in Hz throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .physmodel import CONSTANTS, OscillatorParams

# Reference point of the displacement-noise scaling law.
NOISE_REF_MASS = 25e-9
NOISE_REF_Q = 2e3
NOISE_REF_FREQUENCY = 4e6
NOISE_REF_PSD = 1e-38


class CoolingRatioError(ValueError):
    pass


@dataclass(frozen=True)
class GroundStateReport:
    ground_temperature: float
    occupancy: float
    in_ground_state: bool


@dataclass(frozen=True)
class CoolingResult:
    cooled_temperature: float
    cooled_quality: float
    cooling_ratio: float


@dataclass(frozen=True)
class NoiseBudget:
    s_x_at_resonance: float
    required_sensitivity: float


def ground_temperature(frequency: float) -> float:
    """h nu / k_B in kelvin."""
    return CONSTANTS.planck_h * frequency / CONSTANTS.boltzmann_kB


def occupancy(frequency: float, temperature: float) -> float:
    """Bose-Einstein mean phonon number."""
    if temperature == 0:
        return 0.0
    x = ground_temperature(frequency) / temperature
    return 1.0 / math.expm1(x)


def quantum_criteria(frequency: float, temperature: float) -> GroundStateReport:
    if not frequency > 0:
        raise ValueError("frequency must be positive")
    if not temperature >= 0:
        raise ValueError("temperature must be non-negative")
    n = occupancy(frequency, temperature)
    return GroundStateReport(ground_temperature(frequency), n, n < 1)


def zero_point_noise(effective_mass: float, cooled_q: float, frequency: float) -> NoiseBudget:
    """Displacement noise at resonance from the published scaling law.

    S_x = (25 ug / M) (Q_c / 2000) (4 MHz / nu)^2 x 1e-38 m^2/Hz
    """
    if min(effective_mass, cooled_q, frequency) <= 0:
        raise ValueError("mass, quality factor and frequency must be positive")
    s = ((NOISE_REF_MASS / effective_mass) * (cooled_q / NOISE_REF_Q)
         * (NOISE_REF_FREQUENCY / frequency) ** 2 * NOISE_REF_PSD)
    return NoiseBudget(s, math.sqrt(s))


def standard_zero_point_peak(effective_mass: float, cooled_q: float, frequency: float) -> float:
    """Two-sided textbook zero-point PSD at resonance, 2 hbar Q / (M w^2), in m^2/Hz.

    Only used to annotate reports next to the scaling law above.
    """
    w = 2 * math.pi * frequency
    return 2 * CONSTANTS.hbar * cooled_q / (effective_mass * w**2)


def cooled_quality(q: float, temperature: float, cooled_temperature: float) -> CoolingResult:
    """Optical cooling lowers Q in proportion to temperature: Q_c / T_c = Q / T."""
    if not cooled_temperature > 0:
        raise CoolingRatioError("cooled temperature must be positive")
    if cooled_temperature > temperature:
        raise CoolingRatioError(
            f"cooled temperature {cooled_temperature!r} K exceeds bath temperature {temperature!r} K"
        )
    ratio = cooled_temperature / temperature
    return CoolingResult(cooled_temperature, q * ratio, ratio)


def susceptibility(osc: OscillatorParams, frequencies) -> np.ndarray:
    """chi(w) = 1 / (M (w_m^2 - w^2 + i w w_m / Q)) on a grid in Hz."""
    w = 2 * math.pi * np.asarray(frequencies, dtype=float)
    wm = osc.angular_frequency
    return 1.0 / (osc.effective_mass * (wm**2 - w**2 + 1j * w * wm / osc.quality_factor))


def thermal_psd(osc: OscillatorParams, frequencies) -> np.ndarray:
    """One-sided thermal displacement PSD S_F |chi|^2 in m^2/Hz, S_F = 4 k_B T M w_m / Q."""
    s_force = 4 * CONSTANTS.boltzmann_kB * osc.temperature * osc.effective_mass * osc.damping_rate
    return s_force * np.abs(susceptibility(osc, frequencies)) ** 2


def thermal_peak(osc: OscillatorParams) -> float:
    """Closed form of thermal_psd at nu_m: 4 k_B T Q / (M w_m^3)."""
    return (4 * CONSTANTS.boltzmann_kB * osc.temperature * osc.quality_factor
            / (osc.effective_mass * osc.angular_frequency**3))


def thermal_variance(osc: OscillatorParams) -> float:
    """Equipartition <x^2> = k_B T / (M w_m^2)."""
    return CONSTANTS.boltzmann_kB * osc.temperature / (osc.effective_mass * osc.angular_frequency**2)
