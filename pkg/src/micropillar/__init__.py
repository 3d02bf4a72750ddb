"""Quartz micropillar resonator: modes, mirror, noise budget and bench fits."""

from .physmodel import (
    CONSTANTS, QUARTZ, CoatingStack, CrossSection, Frame, Material, OscillatorParams,
    PillarGeometry, ValidationError, published_geometry, validate,
)

__version__ = "0.1.0"

__all__ = [
    "CONSTANTS", "QUARTZ", "CoatingStack", "CrossSection", "Frame", "Material",
    "OscillatorParams", "PillarGeometry", "ValidationError", "published_geometry", "validate",
]
