"""Fixed-N bosonic Fock basis: enumeration, combinatorial ranking, manifolds."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import comb
from typing import Sequence

import numpy as np

from .errors import CapacityError, InvalidSizeError, MembershipError

DEFAULT_CAPACITY = 50_000_000


def format_state(occupations: Sequence[int]) -> str:
    return "|" + " ".join(str(int(n)) for n in occupations) + ">"


def anharmonicity(state: Sequence[int]) -> int:
    n = np.asarray(state, dtype=np.int64)
    return int(-(n * (n - 1)).sum() // 2)


@lru_cache(maxsize=None)
def _block(sites: int, bosons: int) -> np.ndarray:
    """All occupation vectors of ``bosons`` over ``sites``, lexicographically descending."""
    if sites == 1:
        return np.array([[bosons]], dtype=np.int32)
    parts = []
    for first in range(bosons, -1, -1):
        rest = _block(sites - 1, bosons - first)
        head = np.full((rest.shape[0], 1), first, dtype=np.int32)
        parts.append(np.hstack([head, rest]))
    out = np.vstack(parts)
    out.setflags(write=False)
    return out


def _rank_offsets(L: int, N: int) -> np.ndarray:
    """offsets[i, r, v]: number of states ranked before any state whose site i holds v
    when r bosons remain for sites i..L-1 (given identical sites 0..i-1)."""
    off = np.zeros((L, N + 1, N + 1), dtype=np.int64)
    for i in range(L - 1):
        m = L - i - 1  # sites after i
        for r in range(N + 1):
            acc = 0
            for v in range(r, -1, -1):
                off[i, r, v] = acc
                acc += comb(r - v + m - 1, m - 1)
    return off


@dataclass(frozen=True)
class Basis:
    L: int
    N: int
    states: np.ndarray = field(repr=False)
    _offsets: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.states.shape[0]

    def __len__(self):
        return self.dim

    @property
    def anharmonicities(self) -> np.ndarray:
        n = self.states.astype(np.int64)
        return -(n * (n - 1)).sum(axis=1) // 2

    def _check(self, occ: np.ndarray):
        if occ.shape[-1] != self.L:
            raise MembershipError(f"state has {occ.shape[-1]} sites, basis has {self.L}")
        if np.any(occ < 0) or np.any(occ.sum(axis=-1) != self.N):
            raise MembershipError(f"state not in the N={self.N} sector")

    def rank(self, state: Sequence[int]) -> int:
        occ = np.asarray(state, dtype=np.int64)
        self._check(occ)
        idx, remaining = 0, self.N
        for i in range(self.L - 1):
            idx += self._offsets[i, remaining, occ[i]]
            remaining -= occ[i]
        return int(idx)

    def rank_many(self, states: np.ndarray) -> np.ndarray:
        """Vectorised rank of a (k, L) array of occupation vectors."""
        occ = np.asarray(states, dtype=np.int64)
        self._check(occ)
        idx = np.zeros(occ.shape[0], dtype=np.int64)
        remaining = np.full(occ.shape[0], self.N, dtype=np.int64)
        for i in range(self.L - 1):
            idx += self._offsets[i, remaining, occ[:, i]]
            remaining -= occ[:, i]
        return idx

    def unrank(self, index: int) -> tuple[int, ...]:
        if not 0 <= index < self.dim:
            raise MembershipError(f"index {index} outside 0..{self.dim - 1}")
        return tuple(int(n) for n in self.states[index])

    def label(self, index: int) -> str:
        return format_state(self.states[index])


def basis_dimension(L: int, N: int) -> int:
    return comb(N + L - 1, N)


def enumerate_basis(L: int, N: int, capacity: int = DEFAULT_CAPACITY) -> Basis:
    if L < 1 or N < 0:
        raise InvalidSizeError(f"need L >= 1 and N >= 0, got L={L}, N={N}")
    dim = basis_dimension(L, N)
    if dim > capacity:
        raise CapacityError(f"basis dimension {dim} exceeds cap {capacity}")
    return Basis(L, N, _block(L, N), _rank_offsets(L, N))


@dataclass(frozen=True)
class Manifold:
    A: int
    members: np.ndarray
    basis: Basis = field(repr=False)
    trivial: np.ndarray | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return len(self.members)

    def states(self) -> np.ndarray:
        return self.basis.states[self.members]

    def labels(self) -> list[str]:
        return [self.basis.label(i) for i in self.members]

    def position(self, state: Sequence[int]) -> int:
        """Position of a Fock state inside the manifold."""
        idx = self.basis.rank(state)
        pos = np.searchsorted(self.members, idx)
        if pos >= self.dim or self.members[pos] != idx:
            raise MembershipError(f"{format_state(state)} is not in manifold A={self.A}")
        return int(pos)


def manifold(basis: Basis, A: int, stacks: Sequence[int] | None = None) -> Manifold:
    """All basis states with anharmonicity A.

    When ``stacks`` is given (e.g. (N, M)), members whose nonzero occupations are
    exactly that multiset are flagged trivial.
    """
    members = np.flatnonzero(basis.anharmonicities == A)
    trivial = None
    if stacks is not None:
        want = sorted(int(s) for s in stacks if s > 0)
        occ = basis.states[members]
        trivial = np.array([sorted(int(x) for x in row if x > 0) == want for row in occ], dtype=bool)
    return Manifold(int(A), members, basis, trivial)


def stack_anharmonicity(*stacks: int) -> int:
    return -sum(n * (n - 1) // 2 for n in stacks)


@dataclass
class NontrivialReport:
    N: int
    M: int
    L: int
    members: list[tuple[int, ...]]
    nontrivial: list[tuple[int, ...]]
    min_sites_ok: bool
    max_occupation_ok: bool
    second_occupation_ok: bool
    couples_at_second_order: bool
    predicted_coupling: bool

    @property
    def consistent(self) -> bool:
        return (self.min_sites_ok and self.max_occupation_ok and self.second_occupation_ok
                and self.couples_at_second_order == self.predicted_coupling)


def _chain_hops(state: tuple[int, ...]):
    L = len(state)
    for a in range(L - 1):
        for src, dst in ((a, a + 1), (a + 1, a)):
            if state[src] > 0:
                new = list(state)
                new[src] -= 1
                new[dst] += 1
                yield tuple(new)


def nontrivial_manifold_report(N: int, M: int, L: int) -> NontrivialReport:
    """Exhaustive scan of the chain manifold holding an N stack and an M stack.

    Checks that every nontrivial member (nonzero occupations differ from {N, M})
    occupies at least three sites, has a maximum occupation >= N+1 and a second
    largest <= M-2, and whether two hops through out-of-manifold states link a
    trivial member to a nontrivial one.
    """
    if not 2 <= M <= N:
        raise InvalidSizeError(f"need 2 <= M <= N, got N={N}, M={M}")
    basis = enumerate_basis(L, N + M)
    A = stack_anharmonicity(N, M)
    man = manifold(basis, A, stacks=(N, M))
    members = [tuple(int(x) for x in s) for s in man.states()]
    nontrivial = [s for s, t in zip(members, man.trivial) if not t]
    trivial = [s for s, t in zip(members, man.trivial) if t]

    def desc(s):
        return sorted(s, reverse=True)

    min_sites = all(sum(1 for x in s if x > 0) >= 3 for s in nontrivial)
    max_occ = all(desc(s)[0] >= N + 1 for s in nontrivial)
    second = all(desc(s)[1] <= M - 2 for s in nontrivial)

    nontriv_set = set(nontrivial)
    couples = False
    for s in trivial:
        for mid in _chain_hops(s):
            if anharmonicity(mid) == A:
                continue
            if any(t in nontriv_set for t in _chain_hops(mid)):
                couples = True
                break
        if couples:
            break
    return NontrivialReport(N, M, L, members, nontrivial, min_sites, max_occ, second,
                            couples, 2 * M == N + 3)
