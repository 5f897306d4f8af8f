# SPDX-License-Identifier: MIT

"""Preset microscopic models: coupled oscillators, second-harmonic generation, Dicke."""

import math
import warnings
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from .algebra import (
    Operator,
    annihilation,
    commutator,
    identity,
    number,
    spin_ops,
)
from .core_basics import DegenerateDetuningError, DispersiveGuardWarning, InvalidDimensionError
from .deformed_su2 import DeformedAlgebra
from .hilbert import CompositeSpace, mode_space, spin_space, tensor
from .lindblad import DensityState, expectation, sandwich_superop

DEFAULT_GUARD_THRESHOLD: float = 0.1


@dataclass(frozen=True)
class DispersiveGuard:
    """Dispersive-limit condition, evaluated as a ratio against |Delta|."""

    description: str
    ratio_fn: Callable[[DensityState], float]
    threshold: float = DEFAULT_GUARD_THRESHOLD

    def evaluate(self, state: DensityState) -> float:
        return float(self.ratio_fn(state))

    def check(self, state: DensityState) -> float:
        ratio = self.evaluate(state)
        if ratio >= self.threshold:
            warnings.warn(
                f"dispersive condition {self.description} not satisfied with margin: "
                f"ratio {ratio:.4g} >= {self.threshold:g}",
                DispersiveGuardWarning,
                stacklevel=2,
            )
        return ratio


@dataclass(frozen=True, eq=False)
class ModelSystem:
    name: str
    space: CompositeSpace
    h0: Operator
    hint: Operator
    dissipators: list[tuple[float, Operator]]
    n: Operator
    delta: float
    g: float
    guard: DispersiveGuard
    labels: dict[str, Operator] = field(default_factory=dict)
    factor_names: dict[str, int] = field(default_factory=dict)
    vacuum_factor: int | None = None
    printed_h_eff: Operator | None = None
    printed_rates: dict[str, float] = field(default_factory=dict)
    parameters: dict[str, float] = field(default_factory=dict)

    @property
    def epsilon(self) -> float:
        return self.g / self.delta


def _require_detuning(delta: float) -> None:
    if delta == 0:
        raise DegenerateDetuningError("detuning Delta is zero; epsilon = g/Delta undefined")


def _relative_norm(op: Operator, reference: Operator) -> float:
    return op.norm() / max(reference.norm(), 1e-300)


def eigenoperator_frequency(h0: Operator, c: Operator) -> tuple[float, float]:
    """Best real omega with [H0, C] = omega C and the relative residual."""
    comm = commutator(h0, c).matrix
    cm = c.matrix
    omega = float(np.real(np.vdot(cm, comm) / np.vdot(cm, cm)))
    residual = float(np.linalg.norm(comm - omega * cm) / max(np.linalg.norm(cm), 1e-300))
    return omega, residual


def check_model(model: ModelSystem) -> dict[str, float]:
    """Relative residuals of the model invariants."""
    residuals = {
        "h0_hint": _relative_norm(commutator(model.h0, model.hint), model.hint),
        "n_hint": _relative_norm(commutator(model.n, model.hint), model.hint),
    }
    for k, (_, c) in enumerate(model.dissipators):
        _, residual = eigenoperator_frequency(model.h0, c)
        residuals[f"eigenoperator_{k}"] = residual
    return residuals


def _occupation(op: Operator) -> Callable[[DensityState], float]:
    return lambda state: max(expectation(op, state), 0.0)


def coupled_oscillators(
    omega_a: float,
    omega_b: float,
    g: float,
    gamma: float,
    cutoff_a: int,
    cutoff_b: int,
    guard_threshold: float = DEFAULT_GUARD_THRESHOLD,
) -> tuple[ModelSystem, DeformedAlgebra]:
    """Two detuned modes exchanging single quanta; only b is lossy."""
    delta = omega_b - omega_a
    _require_detuning(delta)
    space = tensor([mode_space(cutoff_a), mode_space(cutoff_b)])
    a = annihilation(space, 0)
    b = annihilation(space, 1)
    na = number(space, 0)
    nb = number(space, 1)
    n_total = na + nb

    hint = (nb - na) * (delta / 2) + (a.dag() @ b + b.dag() @ a) * g
    xp = b.dag() @ a
    x3 = (nb - na) * 0.5
    occ_a, occ_b = _occupation(na), _occupation(nb)
    guard = DispersiveGuard(
        "g sqrt((n_a+1)(n_b+1)) << |Delta|",
        lambda s: g * math.sqrt((occ_a(s) + 1) * (occ_b(s) + 1)) / abs(delta),
        guard_threshold,
    )
    eps = g / delta
    model = ModelSystem(
        name="coupled_oscillators",
        space=space,
        h0=n_total * ((omega_a + omega_b) / 2),
        hint=hint,
        dissipators=[(gamma / 2, b)],
        n=n_total,
        delta=delta,
        g=g,
        guard=guard,
        labels={"a": a, "b": b},
        factor_names={"a": 0, "b": 1},
        vacuum_factor=1,
        printed_h_eff=nb * delta + (nb - na) * (g**2 / delta),
        printed_rates={"b": gamma / 2 * (1 - eps**2 / 2), "a": gamma / 2 * eps**2},
        parameters={
            "omega_a": omega_a, "omega_b": omega_b, "g": g, "gamma": gamma,
            "cutoff_a": cutoff_a, "cutoff_b": cutoff_b,
        },
    )
    return model, DeformedAlgebra(xp=xp, xm=xp.dag(), x3=x3, n=n_total)


def second_harmonic(
    omega_a: float,
    omega_b: float,
    g: float,
    gamma: float,
    cutoff_a: int,
    cutoff_b: int,
    guard_threshold: float = DEFAULT_GUARD_THRESHOLD,
) -> tuple[ModelSystem, DeformedAlgebra]:
    """Pairs of a-photons converting into one b-photon, detuned from 2 omega_a = omega_b."""
    if cutoff_a < 3:
        raise InvalidDimensionError(f"second harmonic needs cutoff_a >= 3, got {cutoff_a}")
    delta = omega_b - 2 * omega_a
    _require_detuning(delta)
    space = tensor([mode_space(cutoff_a), mode_space(cutoff_b)])
    a = annihilation(space, 0)
    b = annihilation(space, 1)
    na = number(space, 0)
    nb = number(space, 1)
    a2 = a @ a
    n_total = na + nb * 2

    xp = b.dag() @ a2
    hint = (nb - na) * (delta / 3) + (a2 @ b.dag() + a2.dag() @ b) * g
    occ_a, occ_b = _occupation(na), _occupation(nb)
    guard = DispersiveGuard(
        "g (n_a+1) sqrt(n_b+1) << |Delta|",
        lambda s: g * (occ_a(s) + 1) * math.sqrt(occ_b(s) + 1) / abs(delta),
        guard_threshold,
    )
    eps = g / delta
    model = ModelSystem(
        name="second_harmonic",
        space=space,
        h0=n_total * ((omega_b + omega_a) / 3),
        hint=hint,
        dissipators=[(gamma / 2, b)],
        n=n_total,
        delta=delta,
        g=g,
        guard=guard,
        labels={"a": a, "b": b, "a^2": a2},
        factor_names={"a": 0, "b": 1},
        vacuum_factor=1,
        printed_h_eff=(nb - na) * (delta / 3) + (nb @ na * 4 - na @ na) * (g**2 / delta),
        printed_rates={"a^2": gamma / 2 * eps**2},
        parameters={
            "omega_a": omega_a, "omega_b": omega_b, "g": g, "gamma": gamma,
            "cutoff_a": cutoff_a, "cutoff_b": cutoff_b,
        },
    )
    return model, DeformedAlgebra(xp=xp, xm=xp.dag(), x3=(nb - na) / 3, n=n_total)


def dicke(
    omega_f: float,
    omega_0: float,
    g: float,
    gamma: float,
    atoms: int,
    cutoff: int,
    guard_threshold: float = DEFAULT_GUARD_THRESHOLD,
) -> tuple[ModelSystem, DeformedAlgebra]:
    """A two-level atoms collectively coupled to one lossy field mode.

    The excitation number N is shifted by j so that the lowest block sits at N = 0.
    """
    delta = omega_0 - omega_f
    _require_detuning(delta)
    space = tensor([mode_space(cutoff), spin_space(atoms)])
    a = annihilation(space, 0)
    na = number(space, 0)
    s_plus, s_minus, s3 = spin_ops(space, 1)
    j = atoms / 2
    c2 = j * (j + 1)
    excitations = na + s3
    # shifted by j so block labels start at zero
    n_blocks = excitations + identity(space) * j

    xp = a @ s_plus
    hint = s3 * delta + (a @ s_plus + a.dag() @ s_minus) * g
    occ = _occupation(na)
    guard = DispersiveGuard(
        "A g sqrt(n+1) << |Delta|",
        lambda s: atoms * g * math.sqrt(occ(s) + 1) / abs(delta),
        guard_threshold,
    )
    eps = g / delta
    printed = s3 * delta + (
        s3 @ s3 - (na + identity(space)) @ s3 * 2 - identity(space) * c2
    ) * (g**2 / delta)
    model = ModelSystem(
        name="dicke",
        space=space,
        h0=excitations * omega_f,
        hint=hint,
        dissipators=[(gamma / 2, a)],
        n=n_blocks,
        delta=delta,
        g=g,
        guard=guard,
        labels={"a": a, "S-": s_minus, "S+": s_plus, "S3": s3, "a*S3": a @ s3},
        factor_names={"field": 0, "a": 0, "atoms": 1},
        vacuum_factor=0,
        printed_h_eff=printed,
        printed_rates={"S-": 2 * eps**2 / gamma if gamma > 0 else math.inf},
        parameters={
            "omega_f": omega_f, "omega_0": omega_0, "g": g, "gamma": gamma,
            "atoms": atoms, "cutoff": cutoff,
        },
    )
    return model, DeformedAlgebra(xp=xp, xm=xp.dag(), x3=s3, n=n_blocks)


def printed_dicke_l1(model: ModelSystem) -> np.ndarray:
    """First-order dissipator correction written out term by term."""
    a = model.labels["a"].matrix
    sm = model.labels["S-"].matrix
    spl = model.labels["S+"].matrix
    ad = a.conj().T
    eye = np.eye(model.space.total_dim)
    return (
        2 * sandwich_superop(sm, ad)
        + 2 * sandwich_superop(a, spl)
        - sandwich_superop(ad @ sm, eye)
        - sandwich_superop(spl @ a, eye)
        - sandwich_superop(eye, ad @ sm)
        - sandwich_superop(eye, a @ spl)
    )


def printed_dicke_l2(model: ModelSystem) -> np.ndarray:
    """Second-order dissipator correction written out term by term."""
    a = model.labels["a"].matrix
    sm = model.labels["S-"].matrix
    spl = model.labels["S+"].matrix
    s3 = model.labels["S3"].matrix
    ad = a.conj().T
    eye = np.eye(model.space.total_dim)
    return (
        2 * sandwich_superop(sm, spl)
        - sandwich_superop(spl @ sm, eye)
        - sandwich_superop(eye, spl @ sm)
        + 2 * sandwich_superop(s3 @ a, ad)
        + 2 * sandwich_superop(a, ad @ s3)
        - 2 * sandwich_superop(ad @ a @ s3, eye)
        - 2 * sandwich_superop(eye, s3 @ ad @ a)
    )
