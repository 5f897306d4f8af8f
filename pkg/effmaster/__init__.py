# SPDX-License-Identifier: MIT

"""effmaster - effective Hamiltonians and master equations from small nonlinear rotations."""

__version__ = "0.1.0"

from .core import (
    DeformedAlgebra,
    EffectiveSystem,
    MasterEquation,
    ModelSystem,
    derive_effective_system,
    presets_registry,
)

__all__ = [
    "DeformedAlgebra",
    "EffectiveSystem",
    "MasterEquation",
    "ModelSystem",
    "derive_effective_system",
    "presets_registry",
]
