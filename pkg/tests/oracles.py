"""Independent reference implementations used only by the tests.

Nothing here imports the package's basis, Hamiltonian or propagator code.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from math import factorial

import numpy as np
import scipy.linalg as sla


def brute_basis(L: int, N: int) -> list[tuple[int, ...]]:
    """All occupation tuples with total N, lexicographically descending."""
    states = [s for s in itertools.product(range(N + 1), repeat=L) if sum(s) == N]
    return sorted(states, reverse=True)


def _ladder(cut: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, cut)), 1)


def second_quantized_hamiltonian(L, N, edges, omega, U, d_omega=None, d_U=None,
                                 plain_positive=False) -> np.ndarray:
    """Dense H on the fixed-N sector built from Kronecker products of ladder operators.

    ``edges`` are (a, b, J) with 0-based sites. The sector is ordered like brute_basis.
    """
    cut = N + 1
    a = _ladder(cut)
    eye = np.eye(cut)

    def local(op, site):
        mats = [op if k == site else eye for k in range(L)]
        out = mats[0]
        for m in mats[1:]:
            out = np.kron(out, m)
        return out

    ops = [local(a, k) for k in range(L)]
    nums = [op.T @ op for op in ops]
    dim = cut ** L
    H = np.zeros((dim, dim))
    for s, t, J in edges:
        H += J * (ops[s].T @ ops[t] + ops[t].T @ ops[s])
    d_omega = np.zeros(L) if d_omega is None else np.asarray(d_omega)
    d_U = np.zeros(L) if d_U is None else np.asarray(d_U)
    for k in range(L):
        n = nums[k]
        pair = n @ (n - np.eye(dim))
        H += omega[k] * n - U[k] * pair / 2 + d_omega[k] * n
        H += (d_U[k] * pair) if plain_positive else (-d_U[k] * pair / 2)
    sector = brute_basis(L, N)
    index = [int(np.ravel_multi_index(s, (cut,) * L)) for s in sector]
    return H[np.ix_(index, index)]


def expm_propagate(H: np.ndarray, psi0: np.ndarray, times) -> np.ndarray:
    return np.array([sla.expm(-1j * H * t) @ psi0 for t in times])


def chain_edges(L, J):
    return [(k, k + 1, J) for k in range(L - 1)]


# exact rational versions of the closed-form rates, in units of J with x = J/U

def tilde_J_exact(N: int) -> tuple[Fraction, int]:
    """(coefficient, power of x): J-tilde = coeff * x**power * J."""
    return Fraction((-1) ** (N - 1) * N, factorial(N - 1)), N - 1


def tilde_J_value(N, J, U):
    c, p = tilde_J_exact(N)
    return float(c) * (J / U) ** p * J
