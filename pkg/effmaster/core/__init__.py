# SPDX-License-Identifier: MIT

"""Numerical core: spaces, operators, deformed algebras, effective systems."""

from .algebra import Operator
from .core_basics import EngineError, OrderTag, TermKind
from .deformed_su2 import DeformedAlgebra, extract_polynomial, verify_algebra
from .effective import EffectiveSystem, derive_effective_system, small_rotation
from .hilbert import CompositeSpace, mode_space, spin_space, tensor
from .lindblad import DensityState, MasterEquation, integrate
from .models import ModelSystem, coupled_oscillators, dicke, second_harmonic

__all__ = [
    "Operator",
    "EngineError",
    "OrderTag",
    "TermKind",
    "DeformedAlgebra",
    "extract_polynomial",
    "verify_algebra",
    "EffectiveSystem",
    "derive_effective_system",
    "small_rotation",
    "CompositeSpace",
    "mode_space",
    "spin_space",
    "tensor",
    "DensityState",
    "MasterEquation",
    "integrate",
    "ModelSystem",
    "coupled_oscillators",
    "dicke",
    "second_harmonic",
]

presets_registry = {
    "coupled_oscillators": coupled_oscillators,
    "second_harmonic": second_harmonic,
    "dicke": dicke,
}
