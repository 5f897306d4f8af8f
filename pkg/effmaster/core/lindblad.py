# SPDX-License-Identifier: MIT

"""Lindblad generators, fixed-step integration and state metrics.

Superoperators use column-major vectorization: vec(rho)[i + j*d] = rho[i, j],
so that vec(A rho B) = kron(B.T, A) vec(rho).
"""

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg
import scipy.special

from .algebra import Operator, expm_matrix
from .core_basics import (
    DimensionMismatchError,
    EngineError,
    FactorTypeError,
    InvalidStateError,
    InvariantViolationError,
    StabilityGuardError,
    SuperoperatorSizeError,
)
from .hilbert import CompositeSpace, ModeSpace, SpinSpace, tensor

TRACE_TOL: float = 1e-9
HERMITIAN_TOL: float = 1e-10
POSITIVITY_TOL: float = 1e-8
DEFAULT_SUPPORT_TOL: float = 1e-6
STABILITY_BOUND: float = 0.1
MAX_SUPEROP_DIM: int = 10_000

# (coeff, L, R) stands for rho -> coeff * L @ rho @ R.
SandwichTerm = tuple[complex, np.ndarray, np.ndarray]


@dataclass(frozen=True, eq=False)
class DensityState:
    space: CompositeSpace
    rho: np.ndarray
    time: float = 0.0

    def trace_error(self) -> float:
        return float(abs(np.trace(self.rho) - 1.0))

    def hermiticity_error(self) -> float:
        scale = max(float(np.linalg.norm(self.rho)), 1e-300)
        return float(np.linalg.norm(self.rho - self.rho.conj().T)) / scale

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh((self.rho + self.rho.conj().T) / 2)[0])

    def top_level_population(self) -> float:
        """Largest population held in the top two Fock levels of any mode."""
        pops = np.diag(self.rho).real
        worst = 0.0
        for k in self.space.mode_factors():
            factor = self.space.factors[k]
            assert isinstance(factor, ModeSpace)
            mask = self.space.basis_labels(k) >= factor.cutoff - 2
            worst = max(worst, float(pops[mask].sum()))
        return worst

    def validate(self, support_tol: float | None = DEFAULT_SUPPORT_TOL) -> "DensityState":
        d = self.space.total_dim
        if self.rho.shape != (d, d):
            raise InvalidStateError(f"density matrix shape {self.rho.shape} != ({d}, {d})")
        if not np.all(np.isfinite(self.rho)):
            raise InvalidStateError("density matrix has non-finite entries")
        if self.trace_error() > TRACE_TOL:
            raise InvalidStateError(f"trace deviates from 1 by {self.trace_error():.3e}")
        if self.hermiticity_error() > HERMITIAN_TOL:
            raise InvalidStateError(f"density matrix not Hermitian ({self.hermiticity_error():.3e})")
        if self.min_eigenvalue() < -POSITIVITY_TOL:
            raise InvalidStateError(f"negative eigenvalue {self.min_eigenvalue():.3e}")
        if support_tol is not None and self.top_level_population() >= support_tol:
            raise InvalidStateError(
                f"population {self.top_level_population():.3e} in the top two Fock levels "
                f"exceeds the support guard {support_tol:g}; raise the cutoff"
            )
        return self


def purity(state: DensityState) -> float:
    return float(np.real(np.trace(state.rho @ state.rho)))


def expectation(op: Operator, state: DensityState) -> float:
    return float(np.real(np.trace(op.matrix @ state.rho)))


# Initial-state builders


def fock_ket(mode: ModeSpace, n: int) -> np.ndarray:
    if not 0 <= n < mode.cutoff:
        raise InvalidStateError(f"Fock state |{n}> outside cutoff {mode.cutoff}")
    ket = np.zeros(mode.cutoff, dtype=complex)
    ket[n] = 1.0
    return ket


def coherent_ket(mode: ModeSpace, alpha: complex) -> np.ndarray:
    """Truncated and renormalized coherent state."""
    n = np.arange(mode.cutoff)
    log_mag = -abs(alpha) ** 2 / 2 - 0.5 * scipy.special.gammaln(n + 1)
    with np.errstate(divide="ignore"):
        amps = np.exp(log_mag) * np.power(complex(alpha), n)
    if alpha == 0:
        amps = fock_ket(mode, 0)
    return amps / np.linalg.norm(amps)


def spin_ket(spin: SpinSpace, m: float) -> np.ndarray:
    idx = np.flatnonzero(np.isclose(spin.labels, m))
    if idx.size != 1:
        raise InvalidStateError(f"m = {m} is not a label of {spin}")
    ket = np.zeros(spin.dim, dtype=complex)
    ket[idx[0]] = 1.0
    return ket


def spin_coherent_ket(spin: SpinSpace, theta: float, phi: float) -> np.ndarray:
    """Rotation of |j, -j> by polar angle theta about the axis at azimuth phi."""
    j = spin.j
    m = spin.labels[:-1]
    s_plus = np.diag(np.sqrt(j * (j + 1) - m * (m + 1)), -1).astype(complex)
    gen = (theta / 2) * (np.exp(1j * phi) * s_plus - np.exp(-1j * phi) * s_plus.conj().T)
    ground = np.zeros(spin.dim, dtype=complex)
    ground[0] = 1.0
    return expm_matrix(gen) @ ground


def product_state(space: CompositeSpace, kets: list[np.ndarray]) -> DensityState:
    if len(kets) != len(space.factors):
        raise DimensionMismatchError(f"need {len(space.factors)} factor kets, got {len(kets)}")
    psi = np.ones(1, dtype=complex)
    for ket in kets:
        psi = np.kron(psi, ket)
    return DensityState(space, np.outer(psi, psi.conj()))


# Master equation


@dataclass(frozen=True, eq=False)
class MasterEquation:
    """drho/dt = -i[H, rho] + sum_m rate_m (2 C rho C^dag - {C^dag C, rho}).

    `cross_terms` holds (coeff, A, B) groups
    coeff (2 A rho B^dag + 2 B rho A^dag - {A^dag B + B^dag A, rho}); they keep
    trace and Hermiticity but are not of Lindblad form on their own.
    `extra_terms` holds raw (coeff, L, R) pieces coeff L rho R, used for
    rotating-wave filtered or vacuum-reduced groups without an operator form.
    """

    h: Operator
    dissipators: list[tuple[float, Operator]] = field(default_factory=list)
    cross_terms: list[tuple[float, Operator, Operator]] = field(default_factory=list)
    extra_terms: list[SandwichTerm] = field(default_factory=list)

    def __post_init__(self):
        if not self.h.is_hermitian(1e-10):
            raise EngineError("master-equation Hamiltonian must be Hermitian")
        for rate, c in self.dissipators:
            if rate < 0:
                raise EngineError(f"dissipator rate must be nonnegative, got {rate}")
            if c.space != self.h.space:
                raise DimensionMismatchError("collapse operator on a different space")
        for _, a, b in self.cross_terms:
            if a.space != self.h.space or b.space != self.h.space:
                raise DimensionMismatchError("cross-term operator on a different space")
        d = self.h.space.total_dim
        for _, left, right in self.extra_terms:
            if left.shape != (d, d) or right.shape != (d, d):
                raise DimensionMismatchError("Liouvillian term on a different space")

    @property
    def space(self) -> CompositeSpace:
        return self.h.space

    def generator_norm(self) -> float:
        """||H|| + sum_m rate_m ||C_m||^2 in the spectral norm."""
        total = float(np.linalg.norm(self.h.matrix, 2))
        for rate, c in self.dissipators:
            total += rate * float(np.linalg.norm(c.matrix, 2)) ** 2
        for coeff, a, b in self.cross_terms:
            total += 2 * abs(coeff) * float(
                np.linalg.norm(a.matrix, 2) * np.linalg.norm(b.matrix, 2)
            )
        for coeff, left, right in self.extra_terms:
            total += abs(coeff) * float(np.linalg.norm(left, 2) * np.linalg.norm(right, 2))
        return total


def lindblad_rhs(me: MasterEquation, rho: np.ndarray) -> np.ndarray:
    h = me.h.matrix
    if rho.shape != h.shape:
        raise DimensionMismatchError(f"state shape {rho.shape} does not match {h.shape}")
    out = -1j * (h @ rho - rho @ h)
    for rate, c in me.dissipators:
        cm = c.matrix
        cd = cm.conj().T
        cdc = cd @ cm
        out += rate * (2 * cm @ rho @ cd - cdc @ rho - rho @ cdc)
    for coeff, a, b in me.cross_terms:
        am, bm = a.matrix, b.matrix
        anti = am.conj().T @ bm + bm.conj().T @ am
        out += coeff * (
            2 * am @ rho @ bm.conj().T + 2 * bm @ rho @ am.conj().T - anti @ rho - rho @ anti
        )
    if me.extra_terms:
        out += apply_terms(me.extra_terms, rho)
    return out


@dataclass
class Trajectory:
    """Sampled states of one integration run."""

    states: list[DensityState]
    dt: float

    @property
    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.states])

    @property
    def final(self) -> DensityState:
        return self.states[-1]


def _check_sample(state: DensityState, support_tol: float | None) -> None:
    checks = [
        ("trace", state.trace_error(), TRACE_TOL),
        ("hermiticity", state.hermiticity_error(), HERMITIAN_TOL),
        ("positivity", -state.min_eigenvalue(), POSITIVITY_TOL),
    ]
    if support_tol is not None:
        checks.append(("support", state.top_level_population(), support_tol))
    for name, residual, tol in checks:
        if residual > tol:
            raise InvariantViolationError(
                f"{name} invariant violated at t={state.time:.6g} (residual {residual:.3e})",
                time=state.time,
                residual=residual,
            )


def integrate(
    me: MasterEquation,
    rho0: DensityState,
    t_final: float,
    dt: float,
    samples: int = 101,
    support_tol: float | None = None,
) -> Trajectory:
    """Classical fixed-step RK4; the step is shrunk to divide t_final evenly."""
    if dt <= 0 or t_final < 0:
        raise EngineError(f"need dt > 0 and t_final >= 0, got dt={dt}, t_final={t_final}")
    gen = me.generator_norm()
    if dt * gen > STABILITY_BOUND:
        suggested = STABILITY_BOUND / gen
        raise StabilityGuardError(
            f"dt={dt:g} violates the stability guard dt*||L|| <= {STABILITY_BOUND}; "
            f"use dt <= {suggested:.6g}",
            suggested_dt=suggested,
        )
    if rho0.space != me.space:
        raise DimensionMismatchError("initial state and master equation differ in space")

    n_steps = max(int(np.ceil(t_final / dt - 1e-12)), 1) if t_final > 0 else 0
    step = t_final / n_steps if n_steps else dt
    samples = max(samples, 2)
    sample_steps = sorted({int(round(i * n_steps / (samples - 1))) for i in range(samples)})

    rho = rho0.rho.astype(complex)
    t0 = rho0.time
    first = replace(rho0, rho=rho.copy())
    _check_sample(first, support_tol)
    states = [first]
    next_sample = 1
    for k in range(1, n_steps + 1):
        k1 = lindblad_rhs(me, rho)
        k2 = lindblad_rhs(me, rho + 0.5 * step * k1)
        k3 = lindblad_rhs(me, rho + 0.5 * step * k2)
        k4 = lindblad_rhs(me, rho + step * k3)
        rho = rho + (step / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if next_sample < len(sample_steps) and k == sample_steps[next_sample]:
            state = DensityState(me.space, rho.copy(), t0 + k * step)
            _check_sample(state, support_tol)
            states.append(state)
            next_sample += 1
    return Trajectory(states=states, dt=step)


# Superoperators


def _guard(d: int) -> None:
    if d * d > MAX_SUPEROP_DIM:
        raise SuperoperatorSizeError(
            f"superoperator of dimension {d * d} exceeds the guard {MAX_SUPEROP_DIM}"
        )


def _mat(op: Operator | np.ndarray) -> np.ndarray:
    return op.matrix if isinstance(op, Operator) else op


def vec(rho: np.ndarray) -> np.ndarray:
    return rho.flatten(order="F")


def unvec(v: np.ndarray, d: int) -> np.ndarray:
    return v.reshape((d, d), order="F")


def hamiltonian_terms(h: Operator | np.ndarray) -> list[SandwichTerm]:
    hm = _mat(h)
    eye = np.eye(hm.shape[0])
    return [(-1j, hm, eye), (1j, eye, hm)]


def cross_terms(a: Operator | np.ndarray, b: Operator | np.ndarray) -> list[SandwichTerm]:
    """rho -> 2 A rho B^dag + 2 B rho A^dag - {A^dag B + B^dag A, rho}."""
    am, bm = _mat(a), _mat(b)
    eye = np.eye(am.shape[0])
    anti = am.conj().T @ bm + bm.conj().T @ am
    return [
        (2.0, am, bm.conj().T),
        (2.0, bm, am.conj().T),
        (-1.0, anti, eye),
        (-1.0, eye, anti),
    ]


def dissipator_terms(c: Operator | np.ndarray) -> list[SandwichTerm]:
    """L[C] rho = 2 C rho C^dag - {C^dag C, rho}."""
    cm = _mat(c)
    eye = np.eye(cm.shape[0])
    cdc = cm.conj().T @ cm
    return [(2.0, cm, cm.conj().T), (-1.0, cdc, eye), (-1.0, eye, cdc)]


def scale_terms(terms: list[SandwichTerm], factor: complex) -> list[SandwichTerm]:
    return [(factor * coeff, left, right) for coeff, left, right in terms]


def apply_terms(terms: list[SandwichTerm], rho: np.ndarray) -> np.ndarray:
    out = np.zeros_like(rho, dtype=complex)
    for coeff, left, right in terms:
        out += coeff * (left @ rho @ right)
    return out


def terms_norm_bound(terms: list[SandwichTerm]) -> float:
    """Upper bound sum |coeff| ||L||_2 ||R||_2 on the generator norm."""
    return float(
        sum(abs(c) * np.linalg.norm(left, 2) * np.linalg.norm(right, 2) for c, left, right in terms)
    )


def superop_from_terms(
    terms: list[SandwichTerm], indices: np.ndarray | None = None
) -> np.ndarray:
    """Matrix of the summed terms, optionally on the operators |i><j| with i, j in `indices`.

    Restricting L and R before the Kronecker product equals restricting the full
    superoperator, so large spaces never need the full matrix.
    """
    if not terms:
        raise EngineError("no terms to build a superoperator from")
    if indices is not None:
        idx = np.asarray(indices, dtype=int)
        terms = [(c, left[np.ix_(idx, idx)], right[np.ix_(idx, idx)]) for c, left, right in terms]
    d = terms[0][1].shape[0]
    _guard(d)
    out = np.zeros((d * d, d * d), dtype=complex)
    for coeff, left, right in terms:
        out += coeff * np.kron(right.T, left)
    return out


def sandwich_superop(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Matrix of rho -> left @ rho @ right."""
    return superop_from_terms([(1.0, left, right)])


def hamiltonian_superop(h: Operator) -> np.ndarray:
    return superop_from_terms(hamiltonian_terms(h))


def cross_superop(a: Operator | np.ndarray, b: Operator | np.ndarray) -> np.ndarray:
    return superop_from_terms(cross_terms(a, b))


def dissipator_superop(c: Operator | np.ndarray) -> np.ndarray:
    """L[C]; half the self cross term."""
    return superop_from_terms(dissipator_terms(c))


def liouvillian_terms(me: MasterEquation) -> list[SandwichTerm]:
    terms = hamiltonian_terms(me.h)
    for rate, c in me.dissipators:
        terms += scale_terms(dissipator_terms(c), rate)
    for coeff, a, b in me.cross_terms:
        terms += scale_terms(cross_terms(a, b), coeff)
    return terms + list(me.extra_terms)


def liouvillian_matrix(me: MasterEquation) -> np.ndarray:
    return superop_from_terms(liouvillian_terms(me))


def restrict_superop(superop: np.ndarray, d: int, indices: np.ndarray) -> np.ndarray:
    """Sub-block acting on operators |i><j| with i, j in `indices`."""
    idx = np.asarray(indices, dtype=int)
    pairs = (idx[:, None] + d * idx[None, :]).flatten(order="F")
    return superop[np.ix_(pairs, pairs)]


def fit_dissipator_rates(
    superop: np.ndarray,
    candidates: list[Operator],
    indices: np.ndarray | None = None,
) -> tuple[np.ndarray, float]:
    """Real least-squares rates r_k with superop ~ sum_k r_k L[C_k].

    Returns the rates and the relative residual of the fit.
    """
    if not candidates:
        return np.zeros(0), 1.0
    return fit_superop_coefficients(
        superop,
        [dissipator_superop(c) for c in candidates],
        candidates[0].space.total_dim,
        indices,
    )


def fit_superop_coefficients(
    superop: np.ndarray,
    columns: list[np.ndarray],
    d: int,
    indices: np.ndarray | None = None,
) -> tuple[np.ndarray, float]:
    """Real coefficients x_k minimizing ||superop - sum_k x_k columns_k||."""
    if not columns:
        return np.zeros(0), 1.0
    target = superop
    if indices is not None:
        target = restrict_superop(superop, d, indices)
        columns = [restrict_superop(col, d, indices) for col in columns]
    design = np.stack([col.ravel() for col in columns], axis=1)
    design_real = np.concatenate([design.real, design.imag])
    target_real = np.concatenate([target.ravel().real, target.ravel().imag])
    rates, *_ = np.linalg.lstsq(design_real, target_real, rcond=None)
    scale = max(float(np.linalg.norm(target_real)), 1e-300)
    residual = float(np.linalg.norm(design_real @ rates - target_real)) / scale
    return rates, residual


# Reductions and metrics


def _factor_isometry(space: CompositeSpace, factor_index: int, level: int) -> np.ndarray:
    """|level>_k (x) identity on the remaining factors, as a d x d_rest matrix."""
    rest = space.without(factor_index)
    iso = np.zeros((space.total_dim, rest.total_dim), dtype=complex)
    for r in range(rest.total_dim):
        multi = list(rest.multi_index(r))
        multi.insert(factor_index, level)
        iso[space.flat_index(multi), r] = 1.0
    return iso


def reduce_operator(op: Operator, vacuum_factor: int) -> Operator:
    """<0|_k O |0>_k on the remaining factors."""
    iso = _factor_isometry(op.space, vacuum_factor, 0)
    return Operator(op.space.without(vacuum_factor), iso.conj().T @ op.matrix @ iso)


def reduce_terms(
    terms: list[SandwichTerm], space: CompositeSpace, vacuum_factor: int
) -> tuple[list[SandwichTerm], CompositeSpace]:
    """Exact vacuum reduction of sandwich terms.

    sigma -> Tr_k[L (|0><0|_k (x) sigma) R] = sum_n (W_n^dag L V) sigma (V^dag R W_n),
    with V = |0>_k and W_n = |n>_k embedded on the remaining factors.
    """
    if not isinstance(space.factors[vacuum_factor], ModeSpace):
        raise FactorTypeError(f"factor {vacuum_factor} is not a bosonic mode")
    rest = space.without(vacuum_factor)
    vac = _factor_isometry(space, vacuum_factor, 0)
    levels = [
        _factor_isometry(space, vacuum_factor, n)
        for n in range(space.factors[vacuum_factor].dim)
    ]
    reduced: list[SandwichTerm] = []
    for coeff, left, right in terms:
        for w in levels:
            lw = w.conj().T @ left @ vac
            rw = vac.conj().T @ right @ w
            if np.any(lw) and np.any(rw):
                reduced.append((coeff, lw, rw))
    return reduced, rest


def vacuum_reduce_superop(
    superop: np.ndarray, space: CompositeSpace, vacuum_factor: int
) -> tuple[np.ndarray, CompositeSpace]:
    """sigma -> Tr_k L(|0><0|_k (x) sigma): input projected on vacuum, factor traced out."""
    if not isinstance(space.factors[vacuum_factor], ModeSpace):
        raise FactorTypeError(f"factor {vacuum_factor} is not a bosonic mode")
    rest = space.without(vacuum_factor)
    embed_vac = _factor_isometry(space, vacuum_factor, 0)
    inject = np.kron(embed_vac.conj(), embed_vac)
    trace_out = sum(
        np.kron(w.T, w.conj().T)
        for w in (
            _factor_isometry(space, vacuum_factor, n)
            for n in range(space.factors[vacuum_factor].dim)
        )
    )
    return trace_out @ superop @ inject, rest


def partial_trace(state: DensityState, keep_factor: int | list[int]) -> DensityState:
    keep = [keep_factor] if isinstance(keep_factor, int) else sorted(keep_factor)
    n = len(state.space.factors)
    if any(not 0 <= k < n for k in keep):
        raise FactorTypeError(f"invalid factor index in {keep} for {n} factors")
    dims = state.space.dims
    rho = state.rho.reshape(dims + dims)
    letters = "abcdefghijklmnopqrstuvwxyz"
    row = [letters[i] for i in range(n)]
    col = [letters[i] if i not in keep else letters[n + i] for i in range(n)]
    out = "".join(letters[i] for i in keep) + "".join(letters[n + i] for i in keep)
    reduced = np.einsum("".join(row) + "".join(col) + "->" + out, rho)
    kept_space = tensor([state.space.factors[k] for k in keep])
    d = kept_space.total_dim
    return DensityState(kept_space, reduced.reshape(d, d), state.time)


def trace_distance(rho1: DensityState, rho2: DensityState) -> float:
    if rho1.rho.shape != rho2.rho.shape:
        raise DimensionMismatchError("states live on spaces of different dimension")
    return 0.5 * float(np.sum(scipy.linalg.svdvals(rho1.rho - rho2.rho)))


def transform_density(u: np.ndarray, state: DensityState) -> DensityState:
    return DensityState(state.space, u @ state.rho @ u.conj().T, state.time)
