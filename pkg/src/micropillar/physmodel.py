"""Physical domain types for the micropillar resonator.

All quantities are SI. Every type is a frozen dataclass that checks its
invariants on construction, so an instance that exists is a valid one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, is_dataclass
from typing import Literal, Optional

Shape = Literal["equilateral-triangle", "square", "circle"]
SHAPES = ("equilateral-triangle", "square", "circle")


class ValidationError(ValueError):
    """Raised when a domain value violates one of its invariants."""


def _positive(name: str, value: float) -> None:
    if not (isinstance(value, (int, float)) and value > 0 and not math.isnan(value)):
        raise ValidationError(f"{name} must be positive (got {value!r})")


def _finite_positive(name: str, value: float) -> None:
    _positive(name, value)
    if math.isinf(value):
        raise ValidationError(f"{name} must be finite (got {value!r})")


@dataclass(frozen=True)
class PhysicalConstants:
    """Exact SI values (2019 redefinition)."""

    planck_h: float = 6.62607015e-34
    boltzmann_kB: float = 1.380649e-23
    speed_of_light: float = 299792458.0

    @property
    def hbar(self) -> float:
        return self.planck_h / (2.0 * math.pi)


CONSTANTS = PhysicalConstants()


@dataclass(frozen=True)
class Material:
    young_modulus: float
    density: float
    intrinsic_q: float

    def __post_init__(self) -> None:
        validate(self)

    @property
    def sound_speed(self) -> float:
        """Longitudinal bar velocity sqrt(E/rho) in m/s."""
        return math.sqrt(self.young_modulus / self.density)


@dataclass(frozen=True)
class CrossSection:
    shape: Shape
    size: float
    """Side length for triangle and square, diameter for circle."""

    def __post_init__(self) -> None:
        validate(self)

    @property
    def area(self) -> float:
        if self.shape == "equilateral-triangle":
            return math.sqrt(3.0) / 4.0 * self.size**2
        if self.shape == "square":
            return self.size**2
        return math.pi * self.size**2 / 4.0


@dataclass(frozen=True)
class Frame:
    """Dynamical frame surrounding the pillar, held by the outer membrane."""

    frame_length: float
    frame_cross_section: CrossSection
    outer_membrane_stiffness: float

    def __post_init__(self) -> None:
        validate(self)


@dataclass(frozen=True)
class PillarGeometry:
    """Pillar clamped near mid-length by a thin membrane.

    ``membrane_stiffness_scale`` is the lumped axial stiffness of the
    central membrane (N/m); ``None`` means "derive it from the membrane
    thickness" (see :func:`micropillar.modal.membrane_stiffness`).
    ``membrane_offset`` moves the membrane plane away from L/2 and is the
    knob for studying asymmetric etching.
    """

    length: float
    cross_section: CrossSection
    membrane_thickness: float
    membrane_stiffness_scale: Optional[float] = None
    frame: Optional[Frame] = None
    membrane_offset: float = 0.0
    membrane_mass: float = 0.0

    def __post_init__(self) -> None:
        validate(self)

    def total_mass(self, material: Material) -> float:
        return material.density * self.cross_section.area * self.length


@dataclass(frozen=True)
class OscillatorParams:
    """Lumped description of one mechanical mode.

    ``quality_factor`` may be ``math.inf`` (undamped); ``temperature`` may
    be zero.
    """

    frequency: float
    effective_mass: float
    quality_factor: float
    temperature: float = 0.0

    def __post_init__(self) -> None:
        validate(self)

    @property
    def angular_frequency(self) -> float:
        return 2.0 * math.pi * self.frequency

    @property
    def damping_rate(self) -> float:
        """Energy damping rate omega_m/Q in rad/s."""
        return self.angular_frequency / self.quality_factor

    @property
    def decay_time(self) -> float:
        """Amplitude decay time Q/(pi nu_m) in s."""
        return self.quality_factor / (math.pi * self.frequency)

    @property
    def linewidth(self) -> float:
        """Full width at half maximum of |x|^2 in Hz."""
        return self.frequency / self.quality_factor


@dataclass(frozen=True)
class Layer:
    index: float
    thickness: float


@dataclass(frozen=True)
class CoatingStack:
    incident_index: float
    substrate_index: float
    layers: tuple[Layer, ...] = field(default_factory=tuple)
    design_wavelength: float = 1064e-9

    def __post_init__(self) -> None:
        object.__setattr__(self, "layers", tuple(Layer(*ly) if not isinstance(ly, Layer) else ly
                                                  for ly in self.layers))
        validate(self)


def validate(model):
    """Check every invariant of a domain value and return it unchanged.

    Raises :class:`ValidationError` naming the first violated invariant.
    """
    if isinstance(model, Material):
        _finite_positive("young_modulus", model.young_modulus)
        _finite_positive("density", model.density)
        _finite_positive("intrinsic_q", model.intrinsic_q)
    elif isinstance(model, CrossSection):
        if model.shape not in SHAPES:
            raise ValidationError(f"shape must be one of {', '.join(SHAPES)} (got {model.shape!r})")
        _finite_positive("size", model.size)
    elif isinstance(model, Frame):
        _finite_positive("frame_length", model.frame_length)
        validate(model.frame_cross_section)
        if not (model.outer_membrane_stiffness >= 0 and math.isfinite(model.outer_membrane_stiffness)):
            raise ValidationError("outer_membrane_stiffness must be non-negative and finite")
    elif isinstance(model, PillarGeometry):
        _finite_positive("length", model.length)
        validate(model.cross_section)
        _finite_positive("membrane_thickness", model.membrane_thickness)
        if model.membrane_thickness >= model.length:
            raise ValidationError("membrane_thickness must be smaller than length")
        if model.membrane_stiffness_scale is not None and not (
            model.membrane_stiffness_scale >= 0 and math.isfinite(model.membrane_stiffness_scale)
        ):
            raise ValidationError("membrane_stiffness_scale must be non-negative and finite")
        if not abs(model.membrane_offset) < model.length / 2:
            raise ValidationError("membrane_offset must lie strictly inside the pillar")
        if not (model.membrane_mass >= 0 and math.isfinite(model.membrane_mass)):
            raise ValidationError("membrane_mass must be non-negative and finite")
        if model.frame is not None:
            validate(model.frame)
    elif isinstance(model, OscillatorParams):
        _finite_positive("frequency", model.frequency)
        _finite_positive("effective_mass", model.effective_mass)
        if not (model.quality_factor >= 1):
            raise ValidationError(f"quality_factor must be >= 1 (got {model.quality_factor!r})")
        if not (model.temperature >= 0 and math.isfinite(model.temperature)):
            raise ValidationError(f"temperature must be non-negative (got {model.temperature!r})")
    elif isinstance(model, CoatingStack):
        if not model.incident_index >= 1:
            raise ValidationError("incident_index must be >= 1")
        if not model.substrate_index >= 1:
            raise ValidationError("substrate_index must be >= 1")
        _finite_positive("design_wavelength", model.design_wavelength)
        for i, layer in enumerate(model.layers):
            if not layer.index >= 1:
                raise ValidationError(f"layers[{i}].index must be >= 1")
            _finite_positive(f"layers[{i}].thickness", layer.thickness)
    elif is_dataclass(model):
        for f in fields(model):
            value = getattr(model, f.name)
            if is_dataclass(value):
                validate(value)
    else:
        raise TypeError(f"cannot validate object of type {type(model).__name__}")
    return model


# Values quoted for the fabricated quartz device.
QUARTZ = Material(young_modulus=102.7e9, density=2648.0, intrinsic_q=5e6)
PAPER_LENGTH = 1e-3
PAPER_WIDTH = 240e-6
PAPER_MEMBRANE = 20e-6


def published_geometry(frame: Optional[Frame] = None, **overrides) -> PillarGeometry:
    """The 1 mm x 240 um triangular pillar with a 20 um membrane."""
    kwargs = dict(
        length=PAPER_LENGTH,
        cross_section=CrossSection("equilateral-triangle", PAPER_WIDTH),
        membrane_thickness=PAPER_MEMBRANE,
        frame=frame,
    )
    kwargs.update(overrides)
    return PillarGeometry(**kwargs)
