# SPDX-License-Identifier: MIT

"""Dense complex operator arithmetic on composite spaces.

Elementary ladder and spin operators are built sparse (scipy.sparse.kron) and
stored dense; desk-scale dimensions make dense products the simplest path.
"""

import math
from dataclasses import dataclass
from pathlib import Path
from typing import override

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .core_basics import (
    DimensionMismatchError,
    EngineError,
    FactorTypeError,
    NonFiniteError,
)
from .hilbert import CompositeSpace, ModeSpace, SpinSpace

HERMITICITY_TOL: float = 1e-12


@dataclass(frozen=True, eq=False)
class Operator:
    """Square complex matrix acting on `space`."""

    space: CompositeSpace
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        d = self.space.total_dim
        if m.shape != (d, d):
            raise DimensionMismatchError(
                f"operator shape {m.shape} does not match space dimension {d}"
            )
        object.__setattr__(self, "matrix", m)

    def _check(self, other: "Operator") -> None:
        if other.space != self.space:
            raise DimensionMismatchError(
                f"operators live on different spaces: {self.space} vs {other.space}"
            )

    def __add__(self, other: "Operator") -> "Operator":
        self._check(other)
        return Operator(self.space, self.matrix + other.matrix)

    def __sub__(self, other: "Operator") -> "Operator":
        self._check(other)
        return Operator(self.space, self.matrix - other.matrix)

    def __neg__(self) -> "Operator":
        return Operator(self.space, -self.matrix)

    def __mul__(self, scalar: complex) -> "Operator":
        return Operator(self.space, self.matrix * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar: complex) -> "Operator":
        return Operator(self.space, self.matrix / scalar)

    def __matmul__(self, other: "Operator") -> "Operator":
        self._check(other)
        return Operator(self.space, self.matrix @ other.matrix)

    def dag(self) -> "Operator":
        return Operator(self.space, self.matrix.conj().T)

    def norm(self) -> float:
        """Frobenius norm."""
        return float(np.linalg.norm(self.matrix))

    def diagonal(self) -> np.ndarray:
        return np.diag(self.matrix).copy()

    def is_hermitian(self, tol: float = HERMITICITY_TOL) -> bool:
        return bool(
            np.linalg.norm(self.matrix - self.matrix.conj().T) <= tol * max(self.norm(), 1.0)
        )

    def is_skew_hermitian(self, tol: float = HERMITICITY_TOL) -> bool:
        return bool(
            np.linalg.norm(self.matrix + self.matrix.conj().T) <= tol * max(self.norm(), 1.0)
        )

    def is_diagonal(self, tol: float = 1e-12) -> bool:
        off = self.matrix - np.diag(np.diag(self.matrix))
        return bool(np.linalg.norm(off) <= tol * max(self.norm(), 1.0))

    @override
    def __repr__(self) -> str:
        return f"Operator(space={self.space}, norm={self.norm():.6g})"


def identity(space: CompositeSpace) -> Operator:
    return Operator(space, np.eye(space.total_dim, dtype=complex))


def from_diagonal(space: CompositeSpace, values: np.ndarray) -> Operator:
    return Operator(space, np.diag(np.asarray(values, dtype=complex)))


def embed(space: CompositeSpace, factor_index: int, local: sp.spmatrix | np.ndarray) -> Operator:
    """Place `local` on factor `factor_index`, identity on all other factors."""
    if not 0 <= factor_index < len(space.factors):
        raise FactorTypeError(f"factor index {factor_index} out of range for {space}")
    result = sp.identity(1, dtype=complex, format="csr")
    for k, dim in enumerate(space.dims):
        piece = sp.csr_matrix(local) if k == factor_index else sp.identity(dim, format="csr")
        result = sp.kron(result, piece, format="csr")
    return Operator(space, result.toarray())


def _mode(space: CompositeSpace, factor_index: int) -> ModeSpace:
    factor = space.factors[factor_index]
    if not isinstance(factor, ModeSpace):
        raise FactorTypeError(f"factor {factor_index} is {factor}, not a bosonic mode")
    return factor


def _spin(space: CompositeSpace, factor_index: int) -> SpinSpace:
    factor = space.factors[factor_index]
    if not isinstance(factor, SpinSpace):
        raise FactorTypeError(f"factor {factor_index} is {factor}, not a spin")
    return factor


def annihilation(space: CompositeSpace, factor_index: int) -> Operator:
    """Truncated annihilation operator with <n-1|a|n> = sqrt(n)."""
    mode = _mode(space, factor_index)
    local = sp.dia_matrix(
        (np.sqrt(np.arange(mode.cutoff, dtype=float)), [1]),
        shape=(mode.cutoff, mode.cutoff),
    )
    return embed(space, factor_index, local)


def creation(space: CompositeSpace, factor_index: int) -> Operator:
    return annihilation(space, factor_index).dag()


def number(space: CompositeSpace, factor_index: int) -> Operator:
    mode = _mode(space, factor_index)
    return embed(space, factor_index, sp.diags(np.arange(mode.cutoff, dtype=float)))


def spin_ops(space: CompositeSpace, factor_index: int) -> tuple[Operator, Operator, Operator]:
    """Collective (S+, S-, S3) in the m-ascending basis."""
    spin = _spin(space, factor_index)
    j = spin.j
    m = spin.labels
    # <m+1|S+|m> sits one row below the diagonal in ascending order
    raising = np.sqrt(j * (j + 1) - m[:-1] * (m[:-1] + 1))
    s_plus = sp.diags(raising, -1, shape=(spin.dim, spin.dim))
    s3 = sp.diags(m)
    sp_op = embed(space, factor_index, s_plus)
    return sp_op, sp_op.dag(), embed(space, factor_index, s3)


def commutator(a: Operator, b: Operator) -> Operator:
    a._check(b)
    return Operator(a.space, a.matrix @ b.matrix - b.matrix @ a.matrix)


def _require_finite(m: np.ndarray) -> None:
    if not np.all(np.isfinite(m)):
        raise NonFiniteError("matrix contains non-finite entries")


def expm_matrix(m: np.ndarray) -> np.ndarray:
    """exp(m): eigendecomposition for (skew-)Hermitian input, Pade otherwise."""
    _require_finite(m)
    scale = max(float(np.linalg.norm(m)), 1.0)
    if np.linalg.norm(m - m.conj().T) <= HERMITICITY_TOL * scale:
        w, v = scipy.linalg.eigh((m + m.conj().T) / 2)
        return (v * np.exp(w)) @ v.conj().T
    if np.linalg.norm(m + m.conj().T) <= HERMITICITY_TOL * scale:
        # m = -i h with h Hermitian
        h = 1j * m
        w, v = scipy.linalg.eigh((h + h.conj().T) / 2)
        return (v * np.exp(-1j * w)) @ v.conj().T
    return scipy.linalg.expm(m)


def matrix_exp(a: Operator) -> Operator:
    return Operator(a.space, expm_matrix(a.matrix))


def adjoint_series(a: Operator, b: Operator, order: int) -> Operator:
    """Truncated e^A B e^-A = sum_k ad_A^k(B) / k!."""
    if order < 0:
        raise EngineError(f"series order must be >= 0, got {order}")
    a._check(b)
    term = b.matrix
    total = term.copy()
    for k in range(1, order + 1):
        term = a.matrix @ term - term @ a.matrix
        total = total + term / math.factorial(k)
    return Operator(b.space, total)


def adjoint_terms(a: Operator, b: Operator, order: int) -> list[Operator]:
    """Individual series terms ad_A^k(B) / k! for k = 0..order."""
    terms = [b]
    current = b
    for k in range(1, order + 1):
        current = commutator(a, current)
        terms.append(current / math.factorial(k))
    return terms


def unitarity_residual(u: Operator) -> float:
    d = u.space.total_dim
    return float(np.linalg.norm(u.matrix.conj().T @ u.matrix - np.eye(d)))


def format_complex(z: complex) -> str:
    return f"{z.real:.17g}{z.imag:+.17g}j"


def dump_matrix(op: Operator | np.ndarray, path: str | Path, header: list[str] | None = None) -> Path:
    """Write one matrix row per line, entries as `re+imj` with 17 significant digits."""
    m = op.matrix if isinstance(op, Operator) else np.asarray(op, dtype=complex)
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# {h}" for h in header or []]
    lines.extend(" ".join(format_complex(z) for z in row) for row in m)
    target.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return target


def load_matrix(path: str | Path) -> np.ndarray:
    rows = [
        [complex(tok) for tok in line.split()]
        for line in Path(path).read_text(encoding="utf-8").splitlines()
        if line.strip() and not line.startswith("#")
    ]
    return np.array(rows, dtype=complex)
