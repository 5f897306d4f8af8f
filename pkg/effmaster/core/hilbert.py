# SPDX-License-Identifier: MIT

"""Truncated mode spaces, spin spaces and their tensor products."""

from dataclasses import dataclass
from functools import cached_property
from typing import override

import numpy as np

from .core_basics import InvalidDimensionError


@dataclass(frozen=True)
class ModeSpace:
    """Bosonic mode truncated to Fock states |0> .. |cutoff - 1>."""

    cutoff: int

    @property
    def dim(self) -> int:
        return self.cutoff

    @property
    def labels(self) -> np.ndarray:
        """Photon numbers of the basis states."""
        return np.arange(self.cutoff, dtype=float)

    @override
    def __str__(self) -> str:
        return f"Mode({self.cutoff})"


@dataclass(frozen=True)
class SpinSpace:
    """Symmetric (A + 1)-dimensional representation of A two-level atoms.

    Basis ordered by ascending S3 eigenvalue m = -j .. j.
    """

    atoms: int

    @property
    def j(self) -> float:
        return self.atoms / 2

    @property
    def dim(self) -> int:
        return self.atoms + 1

    @property
    def labels(self) -> np.ndarray:
        return np.arange(self.dim, dtype=float) - self.j

    @override
    def __str__(self) -> str:
        return f"Spin(A={self.atoms})"


Factor = ModeSpace | SpinSpace


@dataclass(frozen=True)
class CompositeSpace:
    """Ordered tensor product, row-major with the first factor slowest."""

    factors: tuple[Factor, ...]

    @cached_property
    def dims(self) -> tuple[int, ...]:
        return tuple(f.dim for f in self.factors)

    @cached_property
    def total_dim(self) -> int:
        return int(np.prod(self.dims))

    def flat_index(self, multi: tuple[int, ...] | list[int]) -> int:
        return int(np.ravel_multi_index(tuple(multi), self.dims))

    def multi_index(self, flat: int) -> tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(flat, self.dims))

    def basis_labels(self, factor_index: int) -> np.ndarray:
        """Label of factor `factor_index` for every flat basis index."""
        grids = np.unravel_index(np.arange(self.total_dim), self.dims)
        return self.factors[factor_index].labels[grids[factor_index]]

    def mode_factors(self) -> list[int]:
        return [k for k, f in enumerate(self.factors) if isinstance(f, ModeSpace)]

    def without(self, factor_index: int) -> "CompositeSpace":
        """The space with one factor removed."""
        kept = tuple(f for k, f in enumerate(self.factors) if k != factor_index)
        if not kept:
            raise InvalidDimensionError("cannot remove the only factor of a space")
        return CompositeSpace(kept)

    @override
    def __str__(self) -> str:
        return " x ".join(str(f) for f in self.factors)


def mode_space(cutoff: int) -> ModeSpace:
    if cutoff < 2:
        raise InvalidDimensionError(f"mode cutoff must be >= 2, got {cutoff}")
    return ModeSpace(int(cutoff))


def spin_space(atoms: int) -> SpinSpace:
    if atoms < 1:
        raise InvalidDimensionError(f"number of atoms must be >= 1, got {atoms}")
    return SpinSpace(int(atoms))


def tensor(factors: list[Factor] | tuple[Factor, ...]) -> CompositeSpace:
    if len(factors) == 0:
        raise InvalidDimensionError("tensor product needs at least one factor")
    return CompositeSpace(tuple(factors))
