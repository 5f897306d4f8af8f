# SPDX-License-Identifier: MIT

"""Small nonlinear rotations and the effective systems they produce."""

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .algebra import (
    Operator,
    adjoint_terms,
    from_diagonal,
    matrix_exp,
    unitarity_residual,
)
from .core_basics import (
    DegenerateDetuningError,
    EngineError,
    EngineWarning,
    ExtractionRequiredError,
    NonFiniteError,
    NonUnitaryError,
    OrderTag,
    TermKind,
)
from .deformed_su2 import DeformedAlgebra, structure_polynomial
from .hilbert import CompositeSpace, ModeSpace
from .lindblad import (
    DensityState,
    MasterEquation,
    SandwichTerm,
    cross_terms,
    dissipator_terms,
    fit_superop_coefficients,
    reduce_operator,
    reduce_terms,
    scale_terms,
    superop_from_terms,
    terms_norm_bound,
)
from .models import ModelSystem

UNITARY_TOL: float = 1e-8
EPSILON_WARN: float = 0.3
DEFAULT_KEEP_TOL: float = 1e-6
MATCH_TOL: float = 1e-10


@dataclass(frozen=True, eq=False)
class SmallRotation:
    """U = exp[eps (X+ - X-)] together with its generator."""

    unitary: Operator
    generator: Operator
    epsilon: float


@dataclass(frozen=True, eq=False)
class EffectiveDissipator:
    """One retained dissipator group.

    Lindblad groups read rate * L[operator]; cross-term groups read
    rate * (2 A rho B^dag + 2 B rho A^dag - {A^dag B + B^dag A, rho})
    with A = operator, B = partner. When that operator form no longer
    reproduces the group (only part of it survived the rotating-wave filter,
    or the vacuum reduction mixes levels), `liouvillian_terms` carries the
    exact sandwich terms and the operators are kept for labelling.
    """

    rate: float
    operator: Operator
    order_tag: OrderTag
    label: str
    kind: TermKind = TermKind.LINDBLAD
    partner: Operator | None = None
    partially_resonant: bool = False
    liouvillian_terms: tuple[SandwichTerm, ...] | None = None

    @property
    def operator_form(self) -> bool:
        return self.liouvillian_terms is None

    def terms(self) -> list[SandwichTerm]:
        if self.liouvillian_terms is not None:
            return list(self.liouvillian_terms)
        if self.kind is TermKind.LINDBLAD:
            return scale_terms(dissipator_terms(self.operator), self.rate)
        assert self.partner is not None
        return scale_terms(cross_terms(self.operator, self.partner), self.rate)

    def superop(self, indices: np.ndarray | None = None) -> np.ndarray:
        return superop_from_terms(self.terms(), indices)


@dataclass(frozen=True, eq=False)
class EffectiveSystem:
    epsilon: float
    delta: float
    g: float
    h_eff: Operator
    dissipators: list[EffectiveDissipator]
    frame: Operator
    frame_name: str
    truncation_order: int
    constant_shift: float | None = None
    block_constants: list[tuple[float, float]] = field(default_factory=list)
    vacuum_factor: int | None = None
    rwa_applied: bool = False

    @property
    def space(self) -> CompositeSpace:
        return self.h_eff.space

    def lindblad_dissipators(self) -> list[EffectiveDissipator]:
        return [d for d in self.dissipators if d.kind is TermKind.LINDBLAD]

    def transferred(self) -> list[EffectiveDissipator]:
        """Dissipators that first appear at order eps or eps^2."""
        return [d for d in self.dissipators if d.order_tag is not OrderTag.ZEROTH]


def small_rotation(alg: DeformedAlgebra, epsilon: float) -> SmallRotation:
    if not math.isfinite(epsilon):
        raise NonFiniteError(f"epsilon must be finite, got {epsilon}")
    if abs(epsilon) >= 1:
        raise EngineError(f"small rotation needs |epsilon| < 1, got {epsilon}")
    if abs(epsilon) > EPSILON_WARN:
        warnings.warn(
            f"epsilon = {epsilon:.3g} is large; order-2 truncation may be inaccurate",
            EngineWarning,
            stacklevel=2,
        )
    generator = alg.generator * epsilon
    unitary = matrix_exp(generator)
    residual = unitarity_residual(unitary)
    if residual > 1e-10 * max(unitary.space.total_dim, 1):
        raise NonUnitaryError(f"rotation is not unitary (residual {residual:.3e})")
    return SmallRotation(unitary=unitary, generator=generator, epsilon=epsilon)


def _unitary(u: Operator | SmallRotation) -> Operator:
    return u.unitary if isinstance(u, SmallRotation) else u


def conjugate_exact(u: Operator | SmallRotation, op: Operator) -> Operator:
    """U O U^dag, the oracle for every truncated formula."""
    um = _unitary(u)
    residual = unitarity_residual(um)
    if residual > UNITARY_TOL:
        raise NonUnitaryError(f"conjugation needs a unitary (residual {residual:.3e})")
    return um @ op @ um.dag()


def effective_hamiltonian_order2(delta: float, g: float, alg: DeformedAlgebra) -> Operator:
    """Delta X3 + (g^2 / Delta) P(X3) from the extracted block polynomials."""
    if delta == 0:
        raise DegenerateDetuningError("cannot divide by a zero detuning")
    if not alg.extracted:
        raise ExtractionRequiredError("extract the structure polynomial before deriving H_eff")
    return alg.x3 * delta + structure_polynomial(alg) * (g**2 / delta)


def transform_dissipator(
    rotation: SmallRotation, c: Operator, order: int
) -> list[tuple[Operator, OrderTag]]:
    """U C U^dag = C + [eps T, C] + [eps T, [eps T, C]] / 2 + ..., tagged by order."""
    if order not in (0, 1, 2):
        raise EngineError(f"dissipator expansion order must be 0, 1 or 2, got {order}")
    terms = adjoint_terms(rotation.generator, c, order)
    return [(term, OrderTag(k)) for k, term in enumerate(terms)]


def frame_generator(
    frame: str, alg: DeformedAlgebra, delta: float, h_eff: Operator
) -> Operator:
    match frame:
        case "detuning":
            return alg.x3 * delta
        case "full":
            return from_diagonal(h_eff.space, h_eff.diagonal())
        case _:
            raise EngineError(f"unknown rotating frame '{frame}' (use 'detuning' or 'full')")


def rwa_mask(frame: Operator, keep_tol: float, delta: float) -> np.ndarray:
    """Superoperator entries connecting density-matrix elements of equal frame frequency."""
    if not frame.is_diagonal():
        raise EngineError("rotating-frame generator must be diagonal")
    w = frame.diagonal().real
    freq = (w[:, None] - w[None, :]).flatten(order="F")
    return np.abs(freq[:, None] - freq[None, :]) <= keep_tol * abs(delta)


def rwa_filter_superop(
    superop: np.ndarray, frame: Operator, keep_tol: float, delta: float
) -> np.ndarray:
    return np.where(rwa_mask(frame, keep_tol, delta), superop, 0.0)


def _frequency_split(m: np.ndarray, freq: np.ndarray, tol: float) -> list[tuple[float, np.ndarray]]:
    """Pieces of `m` whose entries share a frame frequency freq[i, k] within tol."""
    nonzero = m != 0
    values = np.sort(freq[nonzero])
    if values.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(values) > tol)
    lows = np.concatenate([values[:1], values[breaks + 1]])
    highs = np.concatenate([values[breaks], values[-1:]])
    return [
        (0.5 * (lo + hi), np.where(nonzero & (freq >= lo) & (freq <= hi), m, 0.0))
        for lo, hi in zip(lows, highs, strict=True)
    ]


def rwa_terms(
    terms: list[SandwichTerm],
    frame: Operator,
    keep_tol: float = DEFAULT_KEEP_TOL,
    delta: float = 1.0,
) -> tuple[list[SandwichTerm], float]:
    """Resonant part of sum coeff L rho R in the frame's eigenbasis.

    An entry L_ik R_lj oscillates at (w_i - w_k) + (w_l - w_j); it is kept when
    that frequency is within keep_tol * |delta| of zero, which is the entry-wise
    `rwa_mask` applied without building the superoperator. Returns the kept
    terms and the norm bound of the dropped ones.
    """
    if not frame.is_diagonal():
        raise EngineError("rotating-frame generator must be diagonal")
    w = frame.diagonal().real
    freq = w[:, None] - w[None, :]
    tol = keep_tol * abs(delta)
    kept: list[SandwichTerm] = []
    dropped = 0.0
    for coeff, left, right in terms:
        right_pieces = _frequency_split(right, freq, tol)
        for omega, lp in _frequency_split(left, freq, tol):
            matched = np.zeros_like(right, dtype=complex)
            for nu, rp in right_pieces:
                if abs(omega + nu) <= tol:
                    matched += rp
                else:
                    dropped += abs(coeff) * float(np.linalg.norm(lp, 2) * np.linalg.norm(rp, 2))
            if np.any(matched):
                kept.append((coeff, lp, matched))
    return kept, dropped


def rwa_filter(
    groups: list[EffectiveDissipator],
    frame: Operator,
    keep_tol: float = DEFAULT_KEEP_TOL,
    delta: float = 1.0,
) -> list[EffectiveDissipator]:
    """Drop groups with no resonant component; partly resonant groups keep only that part."""
    kept: list[EffectiveDissipator] = []
    for group in groups:
        terms = group.terms()
        total = terms_norm_bound(terms)
        resonant, dropped = rwa_terms(terms, frame, keep_tol, delta)
        if total == 0 or terms_norm_bound(resonant) <= 1e-12 * total:
            continue
        if dropped > 1e-12 * total:
            group = replace(group, partially_resonant=True, liouvillian_terms=tuple(resonant))
        kept.append(group)
    return kept


def transform_state(rotation: Operator | SmallRotation, state: DensityState) -> DensityState:
    state.validate(support_tol=None)
    um = _unitary(rotation)
    return DensityState(state.space, um.matrix @ state.rho @ um.matrix.conj().T, state.time)


def _proportional(x: np.ndarray, y: np.ndarray) -> complex | None:
    """c with x = c y, or None."""
    yy = np.vdot(y, y)
    if abs(yy) == 0 or not np.any(x):
        return None
    c = np.vdot(y, x) / yy
    if np.linalg.norm(x - c * y) <= MATCH_TOL * max(np.linalg.norm(x), 1e-300):
        return complex(c)
    return None


class _Labeller:
    """Matches transformed operators with the model's named operators."""

    def __init__(self, model: ModelSystem, trusted: np.ndarray):
        self.model: ModelSystem = model
        self.trusted: np.ndarray = trusted

    def _restrict(self, op: Operator) -> np.ndarray:
        return op.matrix[np.ix_(self.trusted, self.trusted)]

    def match(self, op: Operator) -> tuple[str, Operator, complex] | None:
        x = self._restrict(op)
        for name, candidate in self.model.labels.items():
            c = _proportional(x, self._restrict(candidate))
            if c is not None:
                return name, candidate, c
        return None

    def describe(self, op: Operator, fallback: str) -> tuple[str, Operator, complex]:
        return self.match(op) or (fallback, op, 1.0)

    def scalar_of(self, op: Operator, reference: Operator) -> complex | None:
        return _proportional(self._restrict(op), self._restrict(reference))


def _collect_dissipators(
    model: ModelSystem,
    rotation: SmallRotation,
    order: int,
    labeller: _Labeller,
) -> list[EffectiveDissipator]:
    groups: list[EffectiveDissipator] = []
    for m, (rate, c) in enumerate(model.dissipators):
        terms = transform_dissipator(rotation, c, order)
        base_label, base_op, base_scale = labeller.describe(c, f"C{m}")
        base_rate = rate * abs(base_scale) ** 2
        extra: list[EffectiveDissipator] = []

        for term, tag in terms[1:]:
            if term.norm() <= MATCH_TOL * c.norm():
                continue
            # cross(C, K) with K = s C folds into the rate of L[C]
            s = labeller.scalar_of(term, c)
            if s is not None:
                base_rate += rate * 2 * s.real
                if tag is OrderTag.FIRST and order >= 2:
                    base_rate += rate * abs(s) ** 2
                continue
            if tag is OrderTag.FIRST or tag is OrderTag.SECOND:
                label, op, scale = labeller.describe(term, f"ad{tag.value}({base_label})")
                extra.append(
                    EffectiveDissipator(
                        rate=rate,
                        operator=c,
                        partner=op * scale,
                        order_tag=tag,
                        label=f"{base_label}|{label}",
                        kind=TermKind.CROSS_TERM,
                    )
                )
            if tag is OrderTag.FIRST and order >= 2:
                label, op, scale = labeller.describe(term, f"ad1({base_label})")
                extra.append(
                    EffectiveDissipator(
                        rate=rate * abs(scale) ** 2,
                        operator=op,
                        order_tag=OrderTag.SECOND,
                        label=label,
                    )
                )
        groups.append(
            EffectiveDissipator(
                rate=base_rate, operator=base_op, order_tag=OrderTag.ZEROTH, label=base_label
            )
        )
        groups.extend(extra)
    return groups


def _block_constants(alg: DeformedAlgebra, g: float, delta: float) -> tuple[float | None, list[tuple[float, float]]]:
    per_block = [
        (b.n_value, b.poly_coeffs[0] * g**2 / delta) for b in alg.blocks if b.fitted
    ]
    values = [v for _, v in per_block]
    common = None
    if values and max(values) - min(values) <= 1e-9 * max(1.0, max(abs(v) for v in values)):
        common = float(np.mean(values))
    return common, per_block


def derive_effective_system(
    model: ModelSystem,
    alg: DeformedAlgebra,
    order: int = 2,
    apply_rwa: bool = False,
    vacuum_reduction: int | None = None,
    frame: str = "detuning",
    keep_tol: float = DEFAULT_KEEP_TOL,
) -> EffectiveSystem:
    if order not in (1, 2):
        raise EngineError(f"truncation order must be 1 or 2, got {order}")
    if not alg.extracted:
        raise ExtractionRequiredError("extract the structure polynomial before deriving")
    rotation = small_rotation(alg, model.epsilon)

    h_eff = alg.x3 * model.delta
    if order == 2:
        h_eff = effective_hamiltonian_order2(model.delta, model.g, alg)
    frame_op = frame_generator(frame, alg, model.delta, h_eff)

    labeller = _Labeller(model, alg.trusted_indices())
    dissipators = _collect_dissipators(model, rotation, order, labeller)
    if apply_rwa:
        dissipators = rwa_filter(dissipators, frame_op, keep_tol, model.delta)

    constant, per_block = _block_constants(alg, model.g, model.delta) if order == 2 else (None, [])

    if vacuum_reduction is not None:
        h_eff = reduce_hamiltonian(h_eff, vacuum_reduction)
        frame_op = reduce_operator(frame_op, vacuum_reduction)
        dissipators = _reduce_dissipators(dissipators, model.space, vacuum_reduction)

    return EffectiveSystem(
        epsilon=model.epsilon,
        delta=model.delta,
        g=model.g,
        h_eff=h_eff,
        dissipators=dissipators,
        frame=frame_op,
        frame_name=frame,
        truncation_order=order,
        constant_shift=constant,
        block_constants=per_block,
        vacuum_factor=vacuum_reduction,
        rwa_applied=apply_rwa,
    )


def _reduce_dissipators(
    dissipators: list[EffectiveDissipator], space: CompositeSpace, vacuum_factor: int
) -> list[EffectiveDissipator]:
    """Trace out the vacuum factor group by group, dropping groups that vanish."""
    reduced: list[EffectiveDissipator] = []
    for term in dissipators:
        terms = term.terms()
        scale = max(terms_norm_bound(terms), 1e-300)
        small, _ = reduce_terms(terms, space, vacuum_factor)
        if not small:
            continue
        target = superop_from_terms(small)
        if np.linalg.norm(target) <= 1e-12 * scale:
            continue
        partner = None if term.partner is None else reduce_operator(term.partner, vacuum_factor)
        candidate = replace(
            term,
            operator=reduce_operator(term.operator, vacuum_factor),
            partner=partner,
            liouvillian_terms=None,
        )
        if not term.operator_form or np.linalg.norm(candidate.superop() - target) > 1e-10 * scale:
            candidate = replace(candidate, liouvillian_terms=tuple(small))
        reduced.append(candidate)
    return reduced


def effective_master_equation(eff: EffectiveSystem) -> MasterEquation:
    h = (eff.h_eff + eff.h_eff.dag()) * 0.5
    in_form = [d for d in eff.dissipators if d.operator_form]
    return MasterEquation(
        h=h,
        dissipators=[(d.rate, d.operator) for d in in_form if d.kind is TermKind.LINDBLAD],
        cross_terms=[
            (d.rate, d.operator, d.partner)
            for d in in_form
            if d.kind is TermKind.CROSS_TERM and d.partner is not None
        ],
        extra_terms=[t for d in eff.dissipators if not d.operator_form for t in d.terms()],
    )


# Oracles


def effective_hamiltonian_exact(model: ModelSystem, alg: DeformedAlgebra) -> Operator:
    return conjugate_exact(small_rotation(alg, model.epsilon), model.hint)


def hamiltonian_oracle_residual(model: ModelSystem, alg: DeformedAlgebra) -> float:
    """||U H_int U^dag - H_eff(order 2)|| / ||H_int|| on untainted blocks."""
    exact = effective_hamiltonian_exact(model, alg).matrix
    approx = effective_hamiltonian_order2(model.delta, model.g, alg).matrix
    idx = np.ix_(alg.trusted_indices(), alg.trusted_indices())
    return float(np.linalg.norm(exact[idx] - approx[idx]) / np.linalg.norm(model.hint.matrix[idx]))


def spectral_residual(model: ModelSystem, alg: DeformedAlgebra) -> float:
    """Largest per-block gap between sorted spectra of H_int and H_eff(order 2), over |Delta|."""
    approx = effective_hamiltonian_order2(model.delta, model.g, alg).matrix
    worst = 0.0
    for block in alg.blocks:
        if block.truncation_tainted:
            continue
        idx = np.ix_(block.indices, block.indices)
        exact_vals = np.linalg.eigvalsh(model.hint.matrix[idx])
        approx_vals = np.sort(np.linalg.eigvalsh((approx[idx] + approx[idx].conj().T) / 2))
        worst = max(worst, float(np.max(np.abs(exact_vals - approx_vals))))
    return worst / abs(model.delta)


def dissipator_components(
    rotation: SmallRotation, rate: float, c: Operator, indices: np.ndarray | None = None
) -> list[np.ndarray]:
    """eps^0, eps^1, eps^2 components of rate * L[U C U^dag], each divided by its eps power."""
    eps = rotation.epsilon
    if eps == 0:
        raise EngineError("components need a nonzero epsilon")
    c0, c1, c2 = (op.matrix for op, _ in transform_dissipator(rotation, c, 2))
    c1 = c1 / eps
    c2 = c2 / eps**2
    return [
        rate * superop_from_terms(dissipator_terms(c0), indices),
        rate * superop_from_terms(cross_terms(c0, c1), indices),
        rate * superop_from_terms(dissipator_terms(c1) + cross_terms(c0, c2), indices),
    ]


def exact_dissipator_terms(rotation: SmallRotation, rate: float, c: Operator) -> list[SandwichTerm]:
    return scale_terms(dissipator_terms(conjugate_exact(rotation, c)), rate)


def exact_dissipator_superop(
    rotation: SmallRotation, rate: float, c: Operator, indices: np.ndarray | None = None
) -> np.ndarray:
    return superop_from_terms(exact_dissipator_terms(rotation, rate, c), indices)


@dataclass(frozen=True)
class RateFit:
    label: str
    derived_rate: float
    closed_form_rate: float
    printed_rate: float | None = None

    @property
    def relative_error(self) -> float:
        return abs(self.derived_rate - self.closed_form_rate) / max(abs(self.closed_form_rate), 1e-300)


def derived_rates(
    model: ModelSystem,
    alg: DeformedAlgebra,
    eff: EffectiveSystem,
    keep_tol: float = DEFAULT_KEEP_TOL,
) -> tuple[list[RateFit], float]:
    """Fit the exactly transformed dissipator onto the effective dissipator groups.

    The exact generator goes through the same RWA filter and vacuum reduction
    as `eff`; without reduction the fit runs on the untainted blocks only.
    """
    if not eff.dissipators:
        return [], 0.0
    rotation = small_rotation(alg, model.epsilon)
    exact: list[SandwichTerm] = []
    for rate, c in model.dissipators:
        exact += exact_dissipator_terms(rotation, rate, c)
    if eff.rwa_applied:
        h = alg.x3 * model.delta
        if eff.truncation_order == 2:
            h = effective_hamiltonian_order2(model.delta, model.g, alg)
        full_frame = frame_generator(eff.frame_name, alg, model.delta, h)
        exact, _ = rwa_terms(exact, full_frame, keep_tol, model.delta)

    indices = None
    if eff.vacuum_factor is not None:
        exact, _ = reduce_terms(exact, model.space, eff.vacuum_factor)
    else:
        indices = alg.trusted_indices()
    columns = [d.superop(indices) / (d.rate if d.rate != 0 else 1.0) for d in eff.dissipators]
    target = superop_from_terms(exact, indices) if exact else np.zeros_like(columns[0])
    coeffs, residual = fit_superop_coefficients(target, columns, eff.space.total_dim)
    fits = [
        RateFit(
            label=d.label,
            derived_rate=float(x),
            closed_form_rate=d.rate,
            printed_rate=model.printed_rates.get(d.label),
        )
        for d, x in zip(eff.dissipators, coeffs, strict=True)
    ]
    return fits, residual


def reduce_hamiltonian(h: Operator, vacuum_factor: int) -> Operator:
    """<0|_k H |0>_k; the Kerr and Stark terms survive, the traced mode does not."""
    return reduce_operator(h, vacuum_factor)


def number_polynomial(h: Operator, degree: int = 2) -> np.ndarray:
    """Coefficients of a diagonal single-mode H in powers of a^dag a, ascending.

    The top two Fock levels are left out of the fit.
    """
    factor = h.space.factors[0]
    if len(h.space.factors) != 1 or not isinstance(factor, ModeSpace):
        raise EngineError("number polynomial needs an operator on a single bosonic mode")
    if not h.is_diagonal(1e-10):
        raise EngineError("number polynomial needs a diagonal operator")
    n = factor.labels[: factor.cutoff - 2]
    if n.size <= degree:
        raise EngineError(f"cutoff {factor.cutoff} too small for a degree-{degree} fit")
    vander = np.polynomial.polynomial.polyvander(n, degree)
    coeffs, *_ = np.linalg.lstsq(vander, h.diagonal().real[: n.size], rcond=None)
    return coeffs
