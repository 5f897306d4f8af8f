# SPDX-License-Identifier: MIT

"""Recognition of polynomial su(2) deformations and per-block structure polynomials."""

from dataclasses import dataclass, field, replace

import numpy as np

from .algebra import Operator, commutator
from .core_basics import (
    DimensionMismatchError,
    EngineError,
    ExtractionError,
    ExtractionRequiredError,
    NonCommutingError,
)
from .hilbert import CompositeSpace, ModeSpace

N_CLUSTER_TOL: float = 1e-8
BLOCK_COMMUTE_TOL: float = 1e-10
DEFAULT_MAX_DEGREE: int = 3


@dataclass(frozen=True)
class Block:
    """One eigenspace of the integral of motion N."""

    n_value: float
    indices: tuple[int, ...]
    truncation_tainted: bool = False
    poly_coeffs: tuple[float, ...] = ()
    fit_residual: float = float("nan")

    @property
    def fitted(self) -> bool:
        return len(self.poly_coeffs) > 0

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """P(x) with the block's ascending-degree coefficients."""
        return np.polynomial.polynomial.polyval(x, np.asarray(self.poly_coeffs))


@dataclass(frozen=True)
class AlgebraResiduals:
    """Relative residuals of the defining relations."""

    adjoint: float
    raise_relation: float
    lower_relation: float
    offdiagonal: float
    n_commutes_plus: float
    n_commutes_minus: float
    n_commutes_x3: float

    def as_dict(self) -> dict[str, float]:
        return {
            "adjoint": self.adjoint,
            "raise_relation": self.raise_relation,
            "lower_relation": self.lower_relation,
            "offdiagonal": self.offdiagonal,
            "n_commutes_plus": self.n_commutes_plus,
            "n_commutes_minus": self.n_commutes_minus,
            "n_commutes_x3": self.n_commutes_x3,
        }

    def worst(self) -> float:
        return max(self.as_dict().values())


@dataclass(frozen=True)
class DeformedAlgebra:
    xp: Operator
    xm: Operator
    x3: Operator
    n: Operator
    tol: float = 1e-12
    blocks: tuple[Block, ...] = field(default_factory=tuple)

    @property
    def space(self) -> CompositeSpace:
        return self.xp.space

    @property
    def generator(self) -> Operator:
        """T = X+ - X-, the rotation generator."""
        return self.xp - self.xm

    @property
    def extracted(self) -> bool:
        return len(self.blocks) > 0 and any(b.fitted for b in self.blocks)

    def trusted_indices(self) -> np.ndarray:
        """Basis indices of all blocks untouched by the Fock cutoff."""
        blocks = self.blocks or partition_blocks(self.n, self.space)
        idx = [i for b in blocks if not b.truncation_tainted for i in b.indices]
        return np.array(sorted(idx), dtype=int)


def _relative(residual: np.ndarray, reference: np.ndarray) -> float:
    scale = float(np.linalg.norm(reference))
    value = float(np.linalg.norm(residual))
    return value / scale if scale > 0 else value


def _common_eigenbasis(x3: Operator, n: Operator) -> np.ndarray:
    if x3.is_diagonal() and n.is_diagonal():
        return np.eye(x3.space.total_dim, dtype=complex)
    # generic real combination of two commuting Hermitian operators
    mix = x3.matrix + np.sqrt(2.0) * n.matrix
    _, v = np.linalg.eigh((mix + mix.conj().T) / 2)
    return v


def verify_algebra(
    xp: Operator, xm: Operator, x3: Operator, n: Operator, tol: float = 1e-12
) -> tuple[bool, AlgebraResiduals]:
    """Check [X3, X+-] = +-X+-, X- = X+^dag, diagonal [X+, X-] and N conservation."""
    for op in (xm, x3, n):
        if op.space != xp.space:
            raise DimensionMismatchError("algebra operators must share one space")

    pm = commutator(xp, xm).matrix
    v = _common_eigenbasis(x3, n)
    rotated = v.conj().T @ pm @ v
    off = rotated - np.diag(np.diag(rotated))

    residuals = AlgebraResiduals(
        adjoint=_relative(xm.matrix - xp.matrix.conj().T, xp.matrix),
        raise_relation=_relative(commutator(x3, xp).matrix - xp.matrix, xp.matrix),
        lower_relation=_relative(commutator(x3, xm).matrix + xm.matrix, xm.matrix),
        offdiagonal=_relative(off, pm) if np.linalg.norm(pm) > 0 else 0.0,
        n_commutes_plus=_relative(commutator(n, xp).matrix, xp.matrix),
        n_commutes_minus=_relative(commutator(n, xm).matrix, xm.matrix),
        n_commutes_x3=_relative(commutator(n, x3).matrix, x3.matrix),
    )
    return residuals.worst() <= tol, residuals


def _cluster(values: np.ndarray) -> list[tuple[float, list[int]]]:
    order = np.argsort(values, kind="stable")
    clusters: list[tuple[float, list[int]]] = []
    for i in order:
        if clusters and abs(values[i] - clusters[-1][0]) <= N_CLUSTER_TOL:
            clusters[-1][1].append(int(i))
        else:
            clusters.append((float(values[i]), [int(i)]))
    return [(value, sorted(idx)) for value, idx in clusters]


def _tainted_states(space: CompositeSpace) -> np.ndarray:
    """Basis states occupying one of the top two Fock levels of any mode."""
    tainted = np.zeros(space.total_dim, dtype=bool)
    for k in space.mode_factors():
        factor = space.factors[k]
        assert isinstance(factor, ModeSpace)
        tainted |= space.basis_labels(k) >= factor.cutoff - 2
    return tainted


def partition_blocks(n: Operator, space: CompositeSpace | None = None) -> tuple[Block, ...]:
    """N-eigenspaces of a diagonal N, flagged when they touch the Fock cutoff."""
    if not n.is_diagonal():
        raise EngineError("block partition needs N diagonal in the product basis")
    space = space or n.space
    tainted = _tainted_states(space)
    return tuple(
        Block(
            n_value=value,
            indices=tuple(idx),
            truncation_tainted=bool(tainted[idx].any()),
        )
        for value, idx in _cluster(n.diagonal().real)
    )


def extract_polynomial(
    alg: DeformedAlgebra,
    max_degree: int = DEFAULT_MAX_DEGREE,
    fit_tol_factor: float = 1e-9,
) -> DeformedAlgebra:
    """Fit diag([X+, X-]) against powers of diag(X3) on every untainted N-block.

    A block can resolve at most (distinct X3 values - 1) degrees; higher
    coefficients are left out for that block. Trailing coefficients below
    the fit tolerance are trimmed.
    """
    passed, residuals = verify_algebra(alg.xp, alg.xm, alg.x3, alg.n, alg.tol)
    if not passed:
        raise ExtractionError(
            f"algebra relations fail (worst residual {residuals.worst():.3e})"
        )

    pm = commutator(alg.xp, alg.xm)
    pm_diag = pm.diagonal().real
    x3_diag = alg.x3.diagonal().real
    fit_tol = fit_tol_factor * max(pm.norm(), 1.0)

    blocks: list[Block] = []
    for block in partition_blocks(alg.n, alg.space):
        if block.truncation_tainted:
            blocks.append(block)
            continue
        idx = list(block.indices)
        x = x3_diag[idx]
        y = pm_diag[idx]
        distinct = len(np.unique(np.round(x, 10)))
        degree = min(max_degree, distinct - 1)
        vander = np.polynomial.polynomial.polyvander(x, degree)
        coeffs, *_ = np.linalg.lstsq(vander, y, rcond=None)
        residual = float(np.linalg.norm(vander @ coeffs - y))
        if residual > fit_tol:
            raise ExtractionError(
                f"polynomial of degree <= {max_degree} does not reproduce [X+, X-] "
                f"on block N={block.n_value:g} (residual {residual:.3e})",
                n_value=block.n_value,
            )
        coeffs = np.where(np.abs(coeffs) <= fit_tol, 0.0, coeffs)
        while len(coeffs) > 1 and coeffs[-1] == 0.0:
            coeffs = coeffs[:-1]
        blocks.append(
            replace(block, poly_coeffs=tuple(float(c) for c in coeffs), fit_residual=residual)
        )
    return replace(alg, blocks=tuple(blocks))


def structure_polynomial(alg: DeformedAlgebra) -> Operator:
    """P(X3) assembled blockwise; tainted blocks take the raw commutator diagonal."""
    if not alg.extracted:
        raise ExtractionRequiredError("structure polynomial has not been extracted")
    x3_diag = alg.x3.diagonal().real
    raw = commutator(alg.xp, alg.xm).diagonal().real
    values = np.zeros(alg.space.total_dim)
    for block in alg.blocks:
        idx = list(block.indices)
        values[idx] = block.evaluate(x3_diag[idx]) if block.fitted else raw[idx]
    return Operator(alg.space, np.diag(values.astype(complex)))


def reconstruction_residual(alg: DeformedAlgebra) -> float:
    """Largest per-block deviation of P(X3) from the direct [X+, X-] on fitted blocks."""
    direct = commutator(alg.xp, alg.xm).matrix
    rebuilt = structure_polynomial(alg).matrix
    worst = 0.0
    for block in alg.blocks:
        if not block.fitted:
            continue
        idx = np.ix_(block.indices, block.indices)
        worst = max(worst, float(np.linalg.norm(direct[idx] - rebuilt[idx])))
    return worst


def block_decompose(n: Operator, op: Operator) -> list[tuple[float, np.ndarray]]:
    """Restrict `op` to every eigenspace of the diagonal N."""
    comm = commutator(n, op).norm()
    if comm > BLOCK_COMMUTE_TOL * max(op.norm(), 1.0):
        raise NonCommutingError(
            f"operator does not commute with N (||[N, O]|| = {comm:.3e})", comm
        )
    return [
        (block.n_value, op.matrix[np.ix_(block.indices, block.indices)].copy())
        for block in partition_blocks(n)
    ]


def reassemble_blocks(n: Operator, pieces: list[tuple[float, np.ndarray]]) -> Operator:
    """Direct sum of block matrices back onto the full space."""
    out = np.zeros_like(n.matrix)
    for block, (_, sub) in zip(partition_blocks(n), pieces, strict=True):
        out[np.ix_(block.indices, block.indices)] = sub
    return Operator(n.space, out)


def casimir(s_plus: Operator, s_minus: Operator, s3: Operator) -> Operator:
    """su(2) Casimir S3^2 + (S+S- + S-S+)/2."""
    return s3 @ s3 + (s_plus @ s_minus + s_minus @ s_plus) * 0.5
