"""Sparse operators in a fixed-N Fock basis."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import BasisError, InvalidSizeError
from .fock import Basis
from .lattice import Convention, LatticeGraph


@dataclass(frozen=True)
class SparseOperator:
    matrix: sp.csr_matrix = field(repr=False)
    hermitian: bool = True

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def apply(self, x: np.ndarray) -> np.ndarray:
        if x.shape[0] != self.dim:
            raise BasisError(f"vector of length {x.shape[0]} for operator of dim {self.dim}")
        return self.matrix @ x

    def expectation(self, x: np.ndarray) -> float:
        if not self.hermitian:
            raise BasisError("expectation needs a Hermitian operator")
        value = np.vdot(x, self.apply(x))
        return float(value.real)

    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal()

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def norm_bound(self) -> float:
        """Cheap upper bound on the spectral norm (max absolute row sum)."""
        return float(abs(self.matrix).sum(axis=1).max()) if self.dim else 0.0

    def __add__(self, other: "SparseOperator") -> "SparseOperator":
        return SparseOperator((self.matrix + other.matrix).tocsr(), self.hermitian and other.hermitian)

    def to_coo_text(self) -> str:
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        lines = [f"{coo.row[k]} {coo.col[k]} {coo.data[k]:.17g}" for k in order]
        return "\n".join(lines) + "\n"


def _check(graph: LatticeGraph, basis: Basis):
    if graph.L != basis.L:
        raise BasisError(f"graph has {graph.L} sites, basis has {basis.L}")


def hopping_matrix(graph: LatticeGraph, basis: Basis) -> sp.csr_matrix:
    """Sum over edges of J (a_a^dag a_b + h.c.), assembled symmetrically.

    For every state and every hop, only partners of higher rank are kept; the
    transpose supplies the other triangle, so the result is exactly symmetric.
    """
    _check(graph, basis)
    occ = basis.states.astype(np.int64)
    rows, cols, vals = [], [], []
    for a, b, J in graph.edges:
        for src, dst in ((a, b), (b, a)):
            movable = np.flatnonzero(occ[:, src] > 0)
            if movable.size == 0:
                continue
            moved = occ[movable].copy()
            amp = J * np.sqrt(moved[:, src] * (moved[:, dst] + 1.0))
            moved[:, src] -= 1
            moved[:, dst] += 1
            target = basis.rank_many(moved)
            keep = target > movable
            rows.append(movable[keep])
            cols.append(target[keep])
            vals.append(amp[keep])
    dim = basis.dim
    if rows:
        r, c, v = np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
    else:
        r = c = np.zeros(0, dtype=np.int64)
        v = np.zeros(0)
    upper = sp.coo_matrix((v, (r, c)), shape=(dim, dim)).tocsr()
    return (upper + upper.T).tocsr()


def clean_diagonal(graph: LatticeGraph, basis: Basis) -> np.ndarray:
    """sum omega n - U n(n-1)/2 without deviations."""
    _check(graph, basis)
    n = basis.states.astype(float)
    return n @ graph.omega - (n * (n - 1) / 2) @ graph.U


def disorder_diagonal(graph: LatticeGraph, basis: Basis) -> np.ndarray:
    _check(graph, basis)
    n = basis.states.astype(float)
    pair = n * (n - 1)
    if graph.convention is Convention.PLAIN_POSITIVE:
        return n @ graph.delta_omega + pair @ graph.delta_U
    return n @ graph.delta_omega - (pair / 2) @ graph.delta_U


def build_hamiltonian(graph: LatticeGraph, basis: Basis, include_disorder: bool = True) -> SparseOperator:
    diag = clean_diagonal(graph, basis)
    if include_disorder:
        diag = diag + disorder_diagonal(graph, basis)
    H = hopping_matrix(graph, basis) + sp.diags(diag, format="csr")
    return SparseOperator(H.tocsr(), hermitian=True)


def diagonal_operator(values: np.ndarray) -> SparseOperator:
    return SparseOperator(sp.diags(np.asarray(values, float), format="csr"), hermitian=True)


def local_number(basis: Basis, site: int) -> SparseOperator:
    if not 0 <= site < basis.L:
        raise InvalidSizeError(f"site {site} outside 0..{basis.L - 1}")
    return diagonal_operator(basis.states[:, site])


def total_number(basis: Basis) -> SparseOperator:
    return diagonal_operator(basis.states.sum(axis=1))


def identity(dim: int) -> SparseOperator:
    return SparseOperator(sp.identity(dim, format="csr"), hermitian=True)
