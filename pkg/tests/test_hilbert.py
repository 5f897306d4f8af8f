# SPDX-License-Identifier: MIT

import numpy as np
import pytest

from effmaster.core.algebra import annihilation, commutator, spin_ops
from effmaster.core.core_basics import InvalidDimensionError
from effmaster.core.hilbert import mode_space, spin_space, tensor


class TestSpaces:
    def test_mode_space_dimension_and_labels(self):
        mode = mode_space(2)
        assert mode.dim == 2
        np.testing.assert_array_equal(mode.labels, [0, 1])
        assert mode_space(8).dim == 8

    def test_mode_space_rejects_cutoff_below_two(self):
        with pytest.raises(InvalidDimensionError):
            mode_space(1)

    @pytest.mark.parametrize("atoms, dim, j", [(1, 2, 0.5), (2, 3, 1.0), (5, 6, 2.5)])
    def test_spin_space(self, atoms, dim, j):
        spin = spin_space(atoms)
        assert spin.dim == dim
        assert spin.j == j
        assert spin.labels[0] == -j
        assert spin.labels[-1] == j

    def test_spin_space_rejects_zero_atoms(self):
        with pytest.raises(InvalidDimensionError):
            spin_space(0)

    def test_tensor_rejects_empty_list(self):
        with pytest.raises(InvalidDimensionError):
            tensor([])


class TestCompositeSpace:
    def test_row_major_index(self):
        space = tensor([mode_space(4), mode_space(3)])
        assert space.total_dim == 12
        assert space.flat_index((1, 2)) == 5
        assert space.multi_index(5) == (1, 2)

    def test_mixed_product(self):
        assert tensor([mode_space(8), spin_space(2)]).total_dim == 24

    def test_single_factor_identity_map(self):
        space = tensor([spin_space(1)])
        assert space.total_dim == 2
        assert [space.flat_index(space.multi_index(i)) for i in range(2)] == [0, 1]

    def test_index_round_trip(self):
        space = tensor([mode_space(3), spin_space(2), mode_space(4)])
        for i in range(space.total_dim):
            assert space.flat_index(space.multi_index(i)) == i

    def test_basis_labels_follow_factor(self):
        space = tensor([mode_space(3), spin_space(1)])
        np.testing.assert_array_equal(space.basis_labels(0), [0, 0, 1, 1, 2, 2])
        np.testing.assert_array_equal(space.basis_labels(1), [-0.5, 0.5] * 3)

    def test_without_drops_a_factor(self):
        space = tensor([mode_space(3), spin_space(1)])
        assert space.without(0).dims == (2,)
        with pytest.raises(InvalidDimensionError):
            tensor([mode_space(3)]).without(0)

    def test_embeddings_on_different_factors_commute(self):
        space = tensor([mode_space(4), spin_space(2), mode_space(3)])
        a = annihilation(space, 0)
        b = annihilation(space, 2)
        s_plus, _, s3 = spin_ops(space, 1)
        for x, y in [(a, b), (a, s_plus), (b.dag(), s3)]:
            assert commutator(x, y).norm() < 1e-12
