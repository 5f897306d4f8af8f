# SPDX-License-Identifier: MIT

"""Config-driven derivation and evolution runs shared by the CLI and the sweep runner."""

import inspect
import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import presets_registry
from .core.algebra import Operator, number, spin_ops
from .core.core_basics import (
    ConfigError,
    EngineError,
    EngineWarning,
    ExtractionError,
    InvariantViolationError,
    NonFiniteError,
    NonUnitaryError,
)
from .core.deformed_su2 import (
    AlgebraResiduals,
    DeformedAlgebra,
    extract_polynomial,
    reconstruction_residual,
    verify_algebra,
)
from .core.effective import (
    EffectiveSystem,
    RateFit,
    derive_effective_system,
    derived_rates,
    effective_master_equation,
    hamiltonian_oracle_residual,
    small_rotation,
    spectral_residual,
)
from .core.hilbert import ModeSpace, SpinSpace
from .core.lindblad import (
    DensityState,
    MasterEquation,
    Trajectory,
    coherent_ket,
    expectation,
    fock_ket,
    integrate,
    partial_trace,
    product_state,
    purity,
    reduce_operator,
    spin_coherent_ket,
    spin_ket,
    trace_distance,
    transform_density,
)
from .core.models import ModelSystem
from .utils.config import Config, RunConfig, format_float, parse_state_spec
from .utils.run_recorder import RunRecorder

PRESET_DEFAULTS: dict[str, dict[str, float]] = {
    "coupled_oscillators": {
        "omega_a": 1.0, "omega_b": 2.0, "g": 0.05, "gamma": 0.01, "cutoff_a": 8, "cutoff_b": 8,
    },
    "second_harmonic": {
        "omega_a": 1.0, "omega_b": 3.0, "g": 0.05, "gamma": 0.01, "cutoff_a": 8, "cutoff_b": 8,
    },
    "dicke": {
        "omega_f": 1.0, "omega_0": 2.0, "g": 0.05, "gamma": 0.01, "atoms": 2, "cutoff": 8,
    },
}


def build_model(run: RunConfig) -> tuple[ModelSystem, DeformedAlgebra]:
    """Instantiate the configured preset, preset defaults filling unset parameters."""
    name = run.model.name
    preset = presets_registry[name]
    kwargs: dict[str, float | int] = dict(PRESET_DEFAULTS[name])
    kwargs.update(run.model.preset_kwargs())
    accepted = set(inspect.signature(preset).parameters)
    unknown = sorted(set(kwargs) - accepted)
    if unknown:
        raise ConfigError(f"preset '{name}' has no parameter(s) {', '.join(unknown)}")
    for key in ("cutoff", "cutoff_a", "cutoff_b", "atoms"):
        if key in kwargs:
            kwargs[key] = int(kwargs[key])
    return preset(guard_threshold=run.flags.guard_threshold, **kwargs)


def resolve_vacuum_factor(model: ModelSystem, value: str | int | None) -> int | None:
    """Factor index from an index or a factor name (`a`, `b`, `field`, ...)."""
    if value is None:
        return None
    text = str(value).strip()
    if text.lower() == "none":
        return None
    if text.isdigit():
        index = int(text)
    elif text in model.factor_names:
        index = model.factor_names[text]
    else:
        raise ConfigError(
            f"unknown factor '{text}' for {model.name}; use an index or one of "
            f"{sorted(model.factor_names)}"
        )
    if not 0 <= index < len(model.space.factors):
        raise ConfigError(f"factor index {index} out of range for {model.space}")
    if not isinstance(model.space.factors[index], ModeSpace):
        raise ConfigError(f"factor {index} is not a bosonic mode and cannot be put in vacuum")
    return index


def _factor_key(model: ModelSystem, k: int, states: dict[str, str]) -> str | None:
    names = [name for name, idx in model.factor_names.items() if idx == k]
    for key in [str(k), *names]:
        if key in states:
            return key
    return None


def build_initial_state(model: ModelSystem, run: RunConfig) -> DensityState:
    """Product state from `state.<factor>` specs; unset modes start in vacuum, spins in m = -j."""
    states = run.state.factors
    known = {str(k) for k in range(len(model.space.factors))} | set(model.factor_names)
    stray = sorted(set(states) - known)
    if stray:
        raise ConfigError(f"state given for unknown factor(s) {', '.join(stray)}")

    kets: list[np.ndarray] = []
    for k, factor in enumerate(model.space.factors):
        key = _factor_key(model, k, states)
        kind, values = parse_state_spec(states[key]) if key else ("default", [])
        match factor, kind:
            case ModeSpace(), "default":
                kets.append(fock_ket(factor, 0))
            case ModeSpace(), "fock":
                kets.append(fock_ket(factor, int(values[0])))
            case ModeSpace(), "coherent":
                kets.append(coherent_ket(factor, values[0]))
            case SpinSpace(), "default":
                kets.append(spin_ket(factor, -factor.j))
            case SpinSpace(), "spin":
                kets.append(spin_ket(factor, values[0]))
            case SpinSpace(), "spin_coherent":
                kets.append(spin_coherent_ket(factor, values[0], values[1]))
            case _:
                raise ConfigError(f"state '{kind}' does not apply to factor {k} ({factor})")
    return product_state(model.space, kets)


def observable_operators(model: ModelSystem, names: list[str]) -> dict[str, tuple[int, Operator]]:
    """`n<k>` photon number and `s3_<k>` spin inversion on factor k."""
    out: dict[str, tuple[int, Operator]] = {}
    for name in names:
        if name.startswith("s3_") and name[3:].isdigit():
            k = int(name[3:])
            if k >= len(model.space.factors) or not isinstance(model.space.factors[k], SpinSpace):
                raise ConfigError(f"observable '{name}': factor {k} is not a spin")
            out[name] = (k, spin_ops(model.space, k)[2])
        elif name.startswith("n") and name[1:].isdigit():
            k = int(name[1:])
            if k >= len(model.space.factors) or not isinstance(model.space.factors[k], ModeSpace):
                raise ConfigError(f"observable '{name}': factor {k} is not a bosonic mode")
            out[name] = (k, number(model.space, k))
        else:
            raise ConfigError(f"unknown observable '{name}'; use n<k> or s3_<k>")
    return out


@dataclass
class VerificationResult:
    passed: bool
    residuals: AlgebraResiduals
    algebra: DeformedAlgebra | None = None
    reconstruction: float = float("nan")
    error: str | None = None


def verify(alg: DeformedAlgebra, max_degree: int) -> VerificationResult:
    """Relations first, then the per-block fit; failures are reported, not raised."""
    passed, residuals = verify_algebra(alg.xp, alg.xm, alg.x3, alg.n, alg.tol)
    if not passed:
        return VerificationResult(False, residuals, error="algebra relations fail")
    try:
        fitted = extract_polynomial(alg, max_degree)
    except ExtractionError as e:
        return VerificationResult(False, residuals, error=e.message)
    return VerificationResult(True, residuals, fitted, reconstruction_residual(fitted))


@dataclass
class DerivationResult:
    model: ModelSystem
    algebra: DeformedAlgebra
    effective: EffectiveSystem
    hamiltonian_residual: float
    spectral_residual: float
    rate_fits: list[RateFit]
    rate_fit_residual: float
    guard_ratio: float = float("nan")

    def max_rate_error(self) -> float:
        errors = [f.relative_error for f in self.rate_fits if f.closed_form_rate != 0]
        return max(errors) if errors else 0.0


def derive(
    run: RunConfig,
    order: int | None = None,
    apply_rwa: bool | None = None,
    vacuum: str | int | None = None,
) -> DerivationResult:
    """Preset -> extracted algebra -> effective system, with oracle residuals and rate fits.

    The dispersive guard is checked against the configured initial state and
    only warns.
    """
    model, alg = build_model(run)
    guard_ratio = model.guard.check(build_initial_state(model, run))
    alg = extract_polynomial(alg, run.flags.max_degree)
    vacuum_factor = resolve_vacuum_factor(
        model, vacuum if vacuum is not None else run.flags.vacuum_reduction
    )
    eff = derive_effective_system(
        model,
        alg,
        order=order or run.flags.truncation_order,
        apply_rwa=run.flags.apply_rwa if apply_rwa is None else apply_rwa,
        vacuum_reduction=vacuum_factor,
        frame=run.flags.frame,
        keep_tol=run.flags.keep_tol,
    )
    fits, fit_residual = derived_rates(model, alg, eff, run.flags.keep_tol)
    return DerivationResult(
        model=model,
        algebra=alg,
        effective=eff,
        hamiltonian_residual=hamiltonian_oracle_residual(model, alg),
        spectral_residual=spectral_residual(model, alg),
        rate_fits=fits,
        rate_fit_residual=fit_residual,
        guard_ratio=guard_ratio,
    )


@dataclass
class EvolutionResult:
    exact: Trajectory
    effective: Trajectory
    exact_rows: list[list[float]]
    effective_rows: list[list[float]]
    comparison_rows: list[list[float]]
    observables: list[str] = field(default_factory=list)

    @property
    def final_trace_distance(self) -> float:
        return self.comparison_rows[-1][1]


def _sample_rows(
    trajectory: Trajectory,
    observables: dict[str, tuple[int, Operator]],
    factor_map: dict[int, int] | None = None,
) -> list[list[float]]:
    rows: list[list[float]] = []
    for state in trajectory.states:
        row = [state.time, float(np.real(np.trace(state.rho))), state.min_eigenvalue(), purity(state)]
        for k, op in observables.values():
            if factor_map is None:
                row.append(expectation(op, state))
            elif k in factor_map:
                row.append(_local_expectation(state, factor_map[k]))
            else:
                row.append(float("nan"))
        rows.append(row)
    return rows


def _local_expectation(state: DensityState, k: int) -> float:
    """<n> or <S3> of factor k; both observables are diagonal in the factor labels."""
    local = partial_trace(state, k)
    values = state.space.factors[k].labels
    return float(np.real(np.sum(values * np.diag(local.rho))))


def evolve(run: RunConfig, derivation: DerivationResult, dt: float | None = None) -> EvolutionResult:
    """Exact and effective trajectories plus their trace distance over time.

    The configured state lives in the rotated frame; the exact run starts from
    U^dag rho U and is rotated back by U at every sample before comparison.
    """
    model, eff = derivation.model, derivation.effective
    step = dt if dt is not None else run.evolve.dt
    support_tol = run.flags.support_tol

    rho_dressed = build_initial_state(model, run).validate(support_tol)
    u = small_rotation(derivation.algebra, model.epsilon).unitary.matrix
    rho_lab = transform_density(u.conj().T, rho_dressed).validate(support_tol)

    exact_me = MasterEquation(h=model.hint, dissipators=list(model.dissipators))
    effective_me = effective_master_equation(eff)

    rho_eff0 = rho_dressed
    kept: list[int] = list(range(len(model.space.factors)))
    if eff.vacuum_factor is not None:
        kept.remove(eff.vacuum_factor)
        vac = partial_trace(rho_dressed, eff.vacuum_factor)
        if vac.rho[0, 0].real < 1 - 1e-9:
            warnings.warn(
                f"factor {eff.vacuum_factor} is not in vacuum; the reduced dynamics assume it is",
                EngineWarning,
                stacklevel=2,
            )
        rho_eff0 = partial_trace(rho_dressed, kept)

    exact = integrate(exact_me, rho_lab, run.evolve.t_final, step, run.evolve.samples, support_tol)
    effective = integrate(effective_me, rho_eff0, run.evolve.t_final, step, run.evolve.samples)

    comparison: list[list[float]] = []
    for lab, approx in zip(exact.states, effective.states, strict=True):
        rotated = transform_density(u, lab)
        if eff.vacuum_factor is not None:
            rotated = partial_trace(rotated, kept)
        comparison.append([lab.time, trace_distance(rotated, approx), model.guard.evaluate(lab)])

    obs = observable_operators(model, run.evolve.observables)
    factor_map = None
    if eff.vacuum_factor is not None:
        factor_map = {k: i for i, k in enumerate(kept)}
    return EvolutionResult(
        exact=exact,
        effective=effective,
        exact_rows=_sample_rows(exact, obs),
        effective_rows=_sample_rows(effective, obs, factor_map),
        comparison_rows=comparison,
        observables=list(obs),
    )


# Artifacts


def _file_label(label: str) -> str:
    return "".join(ch if ch.isalnum() else "_" for ch in label)


def record_verification(recorder: RunRecorder, result: VerificationResult) -> None:
    rows: list[list[object]] = []
    if result.algebra is not None:
        for block in result.algebra.blocks:
            if not block.fitted:
                rows.append([block.n_value, "", "", "", True])
                continue
            for degree, coeff in enumerate(block.poly_coeffs):
                rows.append([block.n_value, degree, coeff, block.fit_residual, False])
    recorder.write_csv(
        "algebra_report.csv", ["n_value", "degree", "coeff", "fit_residual", "truncation_tainted"], rows
    )
    report: dict[str, object] = dict(result.residuals.as_dict())
    report["reconstruction_residual"] = result.reconstruction
    report["passed"] = result.passed
    recorder.write_report("algebra_residuals.csv", report)


def record_derivation(recorder: RunRecorder, result: DerivationResult) -> None:
    eff, model = result.effective, result.model
    recorder.write_matrix(
        "h_eff.txt", eff.h_eff, [f"truncation_order = {eff.truncation_order}", f"space = {eff.space}"]
    )
    if model.printed_h_eff is not None:
        printed = model.printed_h_eff
        if eff.vacuum_factor is not None:
            printed = reduce_operator(printed, eff.vacuum_factor)
        recorder.write_matrix("h_eff_printed.txt", printed, ["closed form as printed, for the record"])

    rows: list[list[object]] = []
    for i, d in enumerate(eff.dissipators):
        stem = f"operators/{i:02d}_{_file_label(d.label)}"
        op_file = recorder.write_matrix(f"{stem}.txt", d.operator)
        partner_file = ""
        if d.partner is not None:
            partner_file = str(recorder.write_matrix(f"{stem}_partner.txt", d.partner).name)
        rows.append(
            [d.order_tag.value, d.rate, d.label, op_file.name, d.kind.value, partner_file, d.partially_resonant, d.operator_form]
        )
    recorder.write_csv(
        "dissipators.csv",
        ["order_tag", "rate", "operator_label", "operator_file", "kind", "partner_file", "partially_resonant", "operator_form"],
        rows,
    )
    shift = "none" if eff.constant_shift is None else format_float(eff.constant_shift)
    recorder.write_csv(
        "constants.csv",
        ["n_value", "constant"],
        eff.block_constants,
        [f"common_shift = {shift}"],
    )
    recorder.write_csv(
        "rate_fits.csv",
        ["operator_label", "derived_rate", "closed_form_rate", "printed_rate", "relative_error"],
        [[f.label, f.derived_rate, f.closed_form_rate, f.printed_rate, f.relative_error] for f in result.rate_fits],
    )
    recorder.write_report(
        "oracle_report.csv",
        {
            "epsilon": eff.epsilon,
            "hamiltonian_residual": result.hamiltonian_residual,
            "spectral_residual": result.spectral_residual,
            "rate_fit_residual": result.rate_fit_residual,
            "max_rate_error": result.max_rate_error(),
            "guard_ratio": result.guard_ratio,
        },
    )


def record_evolution(recorder: RunRecorder, result: EvolutionResult) -> None:
    columns = ["t", "trace", "min_eig", "purity", *result.observables]
    recorder.write_csv("exact.csv", columns, result.exact_rows)
    recorder.write_csv("effective.csv", columns, result.effective_rows)
    recorder.write_csv("comparison.csv", ["t", "trace_distance", "guard_ratio"], result.comparison_rows)


NUMERICAL_ERRORS = (InvariantViolationError, NonUnitaryError, NonFiniteError)


def exit_code_for(error: EngineError) -> int:
    """2 for a numerical-invariant violation, 1 for anything rejected as invalid input."""
    return 2 if isinstance(error, NUMERICAL_ERRORS) else 1


def oracle_sweep(config: Config, couplings: list[float]) -> list[list[float]]:
    """Rows of (epsilon, hamiltonian_residual, spectral_residual), one per coupling."""
    rows: list[list[float]] = []
    for g in couplings:
        run = config.with_overrides(**{"model.g": format_float(g)}).run
        model, alg = build_model(run)
        alg = extract_polynomial(alg, run.flags.max_degree)
        rows.append(
            [model.epsilon, hamiltonian_oracle_residual(model, alg), spectral_residual(model, alg)]
        )
    return rows
