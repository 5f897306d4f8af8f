# SPDX-License-Identifier: MIT

import numpy as np
import pytest

from effmaster.core.algebra import Operator, annihilation, number, spin_ops
from effmaster.core.core_basics import (
    DimensionMismatchError,
    InvalidStateError,
    StabilityGuardError,
    SuperoperatorSizeError,
)
from effmaster.core.hilbert import mode_space, spin_space, tensor
from effmaster.core.lindblad import (
    DensityState,
    MasterEquation,
    coherent_ket,
    cross_superop,
    cross_terms,
    dissipator_superop,
    dissipator_terms,
    expectation,
    fit_dissipator_rates,
    fock_ket,
    integrate,
    lindblad_rhs,
    liouvillian_matrix,
    partial_trace,
    product_state,
    reduce_terms,
    restrict_superop,
    sandwich_superop,
    scale_terms,
    spin_coherent_ket,
    spin_ket,
    superop_from_terms,
    trace_distance,
    unvec,
    vacuum_reduce_superop,
    vec,
)
from effmaster.utils.sweep import log_log_slope

from .conftest import random_density


@pytest.fixture
def two_modes():
    return tensor([mode_space(4), mode_space(3)])


def _decay_equation(cutoff: int, rate: float) -> MasterEquation:
    space = tensor([mode_space(cutoff)])
    h = Operator(space, np.zeros((cutoff, cutoff)))
    return MasterEquation(h=h, dissipators=[(rate, annihilation(space, 0))])


class TestDensityState:
    def test_validation_errors(self):
        space = tensor([mode_space(6)])
        with pytest.raises(InvalidStateError):
            DensityState(space, 2 * np.eye(6) / 6).validate()
        with pytest.raises(InvalidStateError):
            DensityState(space, np.diag([1.5, -0.5, 0, 0, 0, 0])).validate()

    def test_support_guard_refuses_top_levels(self):
        mode = mode_space(6)
        state = product_state(tensor([mode]), [fock_ket(mode, 5)])
        with pytest.raises(InvalidStateError, match="support guard"):
            state.validate()
        state.validate(support_tol=None)

    def test_coherent_state_is_normalized(self):
        mode = mode_space(15)
        ket = coherent_ket(mode, 1.0)
        assert np.linalg.norm(ket) == pytest.approx(1.0)
        n = number(tensor([mode]), 0)
        state = product_state(tensor([mode]), [ket])
        assert expectation(n, state) == pytest.approx(1.0, rel=1e-6)

    def test_spin_kets(self):
        spin = spin_space(2)
        np.testing.assert_allclose(spin_ket(spin, -1), [1, 0, 0])
        with pytest.raises(InvalidStateError):
            spin_ket(spin, 0.5)
        # theta = pi flips |j, -j> to |j, j>
        np.testing.assert_allclose(np.abs(spin_coherent_ket(spin, np.pi, 0.0)), [0, 0, 1], atol=1e-12)

    def test_product_state_needs_one_ket_per_factor(self, two_modes):
        with pytest.raises(DimensionMismatchError):
            product_state(two_modes, [fock_ket(mode_space(4), 0)])


class TestRightHandSide:
    def test_single_photon_decay_rate(self):
        gamma = 0.2
        me = _decay_equation(4, gamma / 2)
        rho = np.diag([0, 1, 0, 0]).astype(complex)
        drho = lindblad_rhs(me, rho)
        n = np.diag(np.arange(4))
        assert np.trace(n @ drho).real == pytest.approx(-gamma)
        assert abs(np.trace(drho)) < 1e-15

    def test_superoperator_matches_rhs(self, two_modes, rng):
        a = annihilation(two_modes, 0)
        b = annihilation(two_modes, 1)
        h = number(two_modes, 0) * 0.3 + (a.dag() @ b + b.dag() @ a) * 0.1
        extra = [(0.05, b.matrix, a.matrix.conj().T)]
        me = MasterEquation(
            h=h,
            dissipators=[(0.02, b)],
            cross_terms=[(0.01, b, a * 0.3)],
            extra_terms=extra,
        )
        rho = random_density(two_modes.total_dim, rng)
        d = two_modes.total_dim
        np.testing.assert_allclose(
            unvec(liouvillian_matrix(me) @ vec(rho), d), lindblad_rhs(me, rho), atol=1e-13
        )

    def test_hermitian_input_stays_hermitian_and_traceless(self, two_modes, rng):
        a = annihilation(two_modes, 0)
        b = annihilation(two_modes, 1)
        h = number(two_modes, 1) * 0.5 + (a.dag() @ b + b.dag() @ a) * 0.2
        me = MasterEquation(h=h, dissipators=[(0.05, b), (0.01, a @ a)], cross_terms=[(0.02, b, a * 0.4)])
        d = two_modes.total_dim
        m = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        drho = lindblad_rhs(me, m + m.conj().T)
        np.testing.assert_allclose(drho, drho.conj().T, atol=1e-12)
        assert abs(np.trace(drho)) < 1e-12

    @pytest.mark.parametrize("preset", ["coupled_small", "shg_small", "dicke_small", "dicke_two_atoms"])
    def test_liouvillian_spectrum(self, preset, request):
        model, _ = request.getfixturevalue(preset)
        me = MasterEquation(h=model.hint, dissipators=list(model.dissipators))
        eigenvalues = np.linalg.eigvals(liouvillian_matrix(me))
        assert np.min(np.abs(eigenvalues)) < 1e-10
        assert np.max(eigenvalues.real) <= 1e-10

    def test_vectorization_convention(self, rng):
        left = rng.normal(size=(3, 3))
        right = rng.normal(size=(3, 3))
        rho = rng.normal(size=(3, 3))
        np.testing.assert_allclose(
            sandwich_superop(left, right) @ vec(rho), vec(left @ rho @ right), atol=1e-13
        )

    def test_cross_term_with_multiple_of_itself(self, two_modes):
        b = annihilation(two_modes, 1)
        s = 0.3 - 0.4j
        np.testing.assert_allclose(
            cross_superop(b, b * s), 2 * s.real * dissipator_superop(b), atol=1e-13
        )

    def test_rejects_negative_rates(self, two_modes):
        h = number(two_modes, 0)
        with pytest.raises(Exception, match="nonnegative"):
            MasterEquation(h=h, dissipators=[(-1.0, annihilation(two_modes, 0))])


class TestSandwichTerms:
    def test_restricted_materialization(self, two_modes):
        b = annihilation(two_modes, 1)
        a = annihilation(two_modes, 0)
        terms = dissipator_terms(b) + scale_terms(cross_terms(b, a), 0.5)
        idx = np.array([0, 1, 3, 4, 7])
        full = superop_from_terms(terms)
        np.testing.assert_allclose(
            superop_from_terms(terms, idx),
            restrict_superop(full, two_modes.total_dim, idx),
            atol=1e-14,
        )

    def test_vacuum_reduction_of_terms_matches_dense(self, two_modes):
        a = annihilation(two_modes, 0)
        b = annihilation(two_modes, 1)
        terms = dissipator_terms(a + b * 0.2) + scale_terms(cross_terms(a, b @ a), 0.3)
        dense, rest = vacuum_reduce_superop(superop_from_terms(terms), two_modes, 1)
        small, rest_terms = reduce_terms(terms, two_modes, 1)
        assert rest_terms == rest
        np.testing.assert_allclose(superop_from_terms(small), dense, atol=1e-13)

    def test_size_guard(self):
        eye = np.eye(101)
        with pytest.raises(SuperoperatorSizeError):
            sandwich_superop(eye, eye)


class TestIntegration:
    def test_exponential_decay(self):
        gamma = 0.2
        me = _decay_equation(5, gamma / 2)
        space = me.space
        rho0 = product_state(space, [fock_ket(space.factors[0], 1)])
        traj = integrate(me, rho0, t_final=5.0, dt=0.01, samples=11)
        n = number(space, 0)
        for state in traj.states:
            assert expectation(n, state) == pytest.approx(np.exp(-gamma * state.time), rel=1e-9)

    def test_invariants_along_trajectory(self, two_modes):
        a = annihilation(two_modes, 0)
        b = annihilation(two_modes, 1)
        h = number(two_modes, 1) * 0.5 + (a.dag() @ b + b.dag() @ a) * 0.2
        me = MasterEquation(h=h, dissipators=[(0.05, b)])
        rho0 = product_state(two_modes, [fock_ket(two_modes.factors[0], 1), fock_ket(two_modes.factors[1], 0)])
        traj = integrate(me, rho0, t_final=10.0, dt=0.01, samples=21)
        for state in traj.states:
            assert state.trace_error() <= 1e-9 * max(state.time, 1.0)
            assert state.hermiticity_error() <= 1e-10
            assert state.min_eigenvalue() >= -1e-8

    def test_stability_guard_suggests_a_step(self):
        me = _decay_equation(5, 1.0)
        rho0 = product_state(me.space, [fock_ket(me.space.factors[0], 1)])
        with pytest.raises(StabilityGuardError) as info:
            integrate(me, rho0, t_final=1.0, dt=0.5)
        assert info.value.suggested_dt * me.generator_norm() == pytest.approx(0.1)

    def test_self_convergence_order(self):
        space = tensor([mode_space(4), spin_space(1)])
        a = annihilation(space, 0)
        s_plus, s_minus, s3 = spin_ops(space, 1)
        h = s3 * 1.0 + (a @ s_plus + a.dag() @ s_minus) * 0.3
        me = MasterEquation(h=h, dissipators=[(0.1, a)])
        pure = product_state(space, [fock_ket(space.factors[0], 1), spin_ket(space.factors[1], -0.5)])
        # full rank, so RK4 drift cannot push a zero eigenvalue below the positivity check
        d = space.total_dim
        rho0 = DensityState(space, (1 - 1e-3) * pure.rho + 1e-3 * np.eye(d) / d)
        dt0 = 0.09 / me.generator_norm()
        t_final = 40 * dt0
        finals = [
            integrate(me, rho0, t_final, t_final / steps, samples=2).final.rho
            for steps in (40, 80, 160)
        ]
        order = np.log2(
            np.linalg.norm(finals[0] - finals[1]) / np.linalg.norm(finals[1] - finals[2])
        )
        assert 3.7 <= order <= 4.3


class TestMetrics:
    def test_partial_trace_of_product_state(self, two_modes):
        ma, mb = two_modes.factors
        state = product_state(two_modes, [fock_ket(ma, 2), coherent_ket(mb, 0.3)])
        reduced = partial_trace(state, 0)
        np.testing.assert_allclose(reduced.rho, np.diag([0, 0, 1, 0]), atol=1e-14)
        assert partial_trace(state, [0, 1]).rho.shape == (12, 12)

    def test_trace_distance(self, two_modes):
        ma, mb = two_modes.factors
        one = product_state(two_modes, [fock_ket(ma, 0), fock_ket(mb, 0)])
        two = product_state(two_modes, [fock_ket(ma, 1), fock_ket(mb, 0)])
        assert trace_distance(one, one) == pytest.approx(0.0, abs=1e-15)
        assert trace_distance(one, two) == pytest.approx(1.0)

    def test_rate_fit_recovers_rates(self, two_modes):
        a = annihilation(two_modes, 0)
        b = annihilation(two_modes, 1)
        target = 0.3 * dissipator_superop(a) + 0.05 * dissipator_superop(b)
        rates, residual = fit_dissipator_rates(target, [a, b])
        np.testing.assert_allclose(rates, [0.3, 0.05], atol=1e-12)
        assert residual < 1e-12

    def test_log_log_slope_helper(self):
        assert log_log_slope([1, 2, 4], [1, 8, 64]) == pytest.approx(3.0)
        assert np.isnan(log_log_slope([1], [1]))
