"""Closed-form quasiparticle rates and reduced Hamiltonians built from them.

Rates are angular frequencies (same units as J and U). Orders are counted in
powers of J/U relative to U, so a rate x^(k-1) J with x = J/U is "order k".
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .units import to_mhz


# single stack

def tilde_J(N: int, J: float, U: float) -> float:
    """Collective hopping of an N-boson stack (order N)."""
    if N < 1:
        raise DomainError("N must be >= 1")
    x = J / U
    return (-1) ** (N - 1) * N / math.factorial(N - 1) * x ** (N - 1) * J


def tilde_omega_diff(N: int, ell: int, J: float, U: float) -> float:
    """On-site offset between boundary distances ell and ell+1 (order 2 ell)."""
    if ell < 1:
        raise DomainError("ell must be >= 1")
    if N < 2:
        return 0.0
    x = J / U
    return N / (N - 1) ** (2 * ell - 1) * x ** (2 * ell - 1) * J


def delta_E2n(N: int, n: int, J: float, U: float) -> float:
    """Energy lost when one order-2n excursion is cut off by a boundary."""
    return tilde_omega_diff(N, n, J, U)


# stack plus one boson

def _require_stack(N: int):
    if N < 2:
        raise DomainError(f"stack-boson rates need N >= 2, got {N}")


def stack_boson_V(N: int, J: float, U: float) -> float:
    _require_stack(N)
    first = 2 * N / (N - 2) if N > 2 else 0.0  # vanishing-denominator term dropped at N=2
    return -(first - (N + 1) / N - N / (N - 1)) * (J / U) * J


def stack_boson_T(N: int, J: float, U: float) -> float:
    _require_stack(N)
    return -(J / U) * J / (N * (N - 1))


def stack_boson_Xi(N: int, J: float, U: float) -> float:
    _require_stack(N)
    if N == 2:
        return 2 * J
    return (-1) ** N * N * (N - 1) / math.factorial(N - 2) * (J / U) ** (N - 2) * J


# two stacks

def V_ell(N: int, ell: int, J: float, U: float) -> float:
    """Interaction of two N stacks at distance ell (order 2 ell)."""
    if N < 2 or ell < 1:
        raise DomainError("need N >= 2 and ell >= 1")
    x = J / U
    shape = 1 - ((ell - 1) / N) * (2 * N - 1) / (2 * N - 3)
    return 2 * N ** 3 / (N - 1) ** (2 * ell - 1) * shape * x ** (2 * ell - 1) * J


def Xi_ell(N: int, ell: int, J: float, U: float) -> float:
    """Exchange of an N and an (N-1) stack at distance ell (order ell)."""
    if N < 3 or ell < 1:
        raise DomainError("need N >= 3 (so that M = N-1 >= 2) and ell >= 1")
    x = J / U
    return (-1) ** (ell - 1) * N / (N - 1) ** (ell - 1) * x ** (ell - 1) * J


def Xi1(N: int, M: int, J: float, U: float) -> float:
    """Nearest-neighbour exchange of an N and an M stack (order N-M)."""
    if not 1 <= M < N:
        raise DomainError("need 1 <= M < N")
    k = N - M
    return (-1) ** (k - 1) * math.comb(N, M) * k ** 2 / math.factorial(k) * (J / U) ** (k - 1) * J


def V_n(N: int, M: int, n: int, J: float, U: float) -> float:
    """Interaction of N and M stacks at distance n for 2 <= M <= N-2 (order 2n).

    Symmetric in N and M by construction."""
    def part(a, b):
        return a * b * (a - 1) * (a - 3 * b + 1) / ((a + b - 3) * (a - b) * (a - b + 1) * (b - 1) ** (2 * n - 1))

    if min(N, M) < 2 or abs(N - M) < 2 or n < 1:
        raise DomainError("V_n needs both stacks >= 2 and |N - M| >= 2")
    x = J / U
    return (part(N, M) + part(M, N)) * x ** (2 * n) * U


def Omega_k(L: int, k: int, Xi: float) -> float | None:
    """Exchange-Rabi frequency for the mirrored pair at ell_N0 = L/2+1 (even L)."""
    if L % 2:
        return None
    half = L // 2 + 1
    return 4 * (-1) ** (k + 1) / half * math.sin(math.pi * k / half) ** 2 * Xi


@dataclass
class RateSet:
    rates: dict[str, float] = field(default_factory=dict)

    def __getitem__(self, key: str) -> float:
        return self.rates[key]

    def __contains__(self, key: str) -> bool:
        return key in self.rates

    def to_text(self) -> str:
        return "".join(f"{k}_MHz = {to_mhz(v):.10g}\n" for k, v in self.rates.items())


def stack_rates(N: int, J: float, U: float, ell_max: int = 3) -> RateSet:
    rates = {"tilde_J": tilde_J(N, J, U)}
    for ell in range(1, ell_max + 1):
        rates[f"tilde_omega_diff_{ell}"] = tilde_omega_diff(N, ell, J, U)
    for n in range(1, ell_max + 1):
        rates[f"DeltaE2n_{n}"] = delta_E2n(N, n, J, U)
    return RateSet(rates)


def stack_boson_rates(N: int, J: float, U: float) -> RateSet:
    return RateSet({"V": stack_boson_V(N, J, U), "T": stack_boson_T(N, J, U),
                    "Xi": stack_boson_Xi(N, J, U)})


def two_stack_rates(N: int, M: int, J: float, U: float, ell_max: int = 3) -> RateSet:
    if M < 2:
        raise DomainError("M < 2: use stack_boson_rates")
    if M > N:
        raise DomainError("need M <= N")
    rates: dict[str, float] = {}
    if M == N:
        for ell in range(1, ell_max + 1):
            rates[f"V_ell_{ell}"] = V_ell(N, ell, J, U)
    elif M == N - 1:
        for ell in range(1, ell_max + 1):
            rates[f"Xi_ell_{ell}"] = Xi_ell(N, ell, J, U)
        rates["Xi1"] = Xi1(N, M, J, U)
    else:
        for n in range(1, ell_max + 1):
            rates[f"V_n_{n}"] = V_n(N, M, n, J, U)
        rates["Xi1"] = Xi1(N, M, J, U)
    return RateSet(rates)


# reduced models

@dataclass
class EffectiveModel:
    """Reduced Hamiltonian on quasiparticle coordinates.

    Each coordinate is a Fock configuration, so occupations follow directly.
    """

    coordinates: list[tuple]
    matrix: np.ndarray
    states: np.ndarray  # Fock occupations per coordinate, shape (dim, L)
    rates: RateSet
    kind: str
    flags: dict[str, bool] = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return len(self.coordinates)

    def index(self, coordinate) -> int:
        return self.coordinates.index(tuple(coordinate))

    def index_of_state(self, occupations) -> int:
        target = np.asarray(occupations)
        hits = np.flatnonzero((self.states == target).all(axis=1))
        if hits.size == 0:
            raise DomainError(f"configuration {tuple(occupations)} is not a model coordinate")
        return int(hits[0])


def boundary_offsets(L: int, N: int, J: float, U: float, max_order: int | None = None) -> np.ndarray:
    """omega-tilde per site (zero deep in the bulk).

    An excursion reaching ell sites away is cut off by a wall at distance ell or
    less, raising the energy by the corresponding difference; contributions from
    both walls add. Differences of order above ``max_order`` (default N) are dropped.
    """
    max_order = N if max_order is None else max_order
    out = np.zeros(L)
    ell = 1
    while 2 * ell <= max_order:
        diff = tilde_omega_diff(N, ell, J, U)
        for site in range(1, L + 1):
            out[site - 1] += diff * ((site <= ell) + (L - site + 1 <= ell))
        ell += 1
    return out


def build_single_stack_model(L: int, N: int, J: float, U: float, omega: float = 0.0) -> EffectiveModel:
    hop = tilde_J(N, J, U)
    mat = np.diag(omega * N + boundary_offsets(L, N, J, U))
    for i in range(L - 1):
        mat[i, i + 1] = mat[i + 1, i] = hop
    states = np.zeros((L, L), dtype=int)
    states[np.arange(L), np.arange(L)] = N
    return EffectiveModel([(i + 1,) for i in range(L)], mat, states, stack_rates(N, J, U), "single_stack")


def build_stack_boson_model(L: int, N: int, J: float, U: float, ell_N0: int | None = None) -> EffectiveModel:
    """Stack of N on site a, lone boson on site b != a; coordinates are 1-based (a, b)."""
    if N < 2:
        raise DomainError("stack-boson model needs N >= 2")
    if ell_N0 is not None and not 1 <= ell_N0 <= L:
        raise DomainError(f"ell_N0={ell_N0} outside 1..{L}")
    coords = [(a, b) for a in range(1, L + 1) for b in range(1, L + 1) if a != b]
    pos = {c: i for i, c in enumerate(coords)}
    rates = stack_boson_rates(N, J, U)
    hopN = tilde_J(N, J, U)
    shift = boundary_offsets(L, N, J, U)
    V, T, Xi = rates["V"], rates["T"], rates["Xi"]
    mat = np.zeros((len(coords), len(coords)))

    def couple(c1, c2, value):
        i, j = pos[c1], pos[c2]
        mat[i, j] += value
        mat[j, i] += value

    for (a, b), i in pos.items():
        mat[i, i] += shift[a - 1] + (V if abs(a - b) == 1 else 0.0)
        if b + 1 <= L and b + 1 != a:
            couple((a, b), (a, b + 1), J)
        if a + 1 <= L and a + 1 != b:
            couple((a, b), (a + 1, b), hopN)
    for a in range(2, L):
        couple((a, a - 1), (a, a + 1), T)
    for a in range(1, L):
        couple((a + 1, a), (a, a + 1), Xi)
    states = np.zeros((len(coords), L), dtype=int)
    for i, (a, b) in enumerate(coords):
        states[i, a - 1] += N
        states[i, b - 1] += 1
    flags = {"incomplete_energies": bool(ell_N0 is not None and N > 3 and L % 2 == 0
                                         and ell_N0 == L // 2 + 1)}
    return EffectiveModel(coords, mat, states, rates, "stack_boson", flags)


def build_two_stack_model(L: int, N: int, M: int, J: float, U: float) -> EffectiveModel:
    """Two stacks on distinct sites. For M == N coordinates are unordered pairs.

    Interaction and long-range exchange terms use bulk values everywhere and keep
    only terms whose order does not exceed the slowest species' hopping order M
    (nearest-neighbour terms are always kept).
    """
    if not 2 <= M <= N:
        raise DomainError("two-stack model needs 2 <= M <= N")
    if M == N:
        coords = [(a, b) for a in range(1, L + 1) for b in range(a + 1, L + 1)]
    else:
        coords = [(a, b) for a in range(1, L + 1) for b in range(1, L + 1) if a != b]
    pos = {c: i for i, c in enumerate(coords)}
    rates = two_stack_rates(N, M, J, U)
    mat = np.zeros((len(coords), len(coords)))
    shift_N = boundary_offsets(L, N, J, U)
    shift_M = boundary_offsets(L, M, J, U)
    hop_N, hop_M = tilde_J(N, J, U), tilde_J(M, J, U)

    def key(a, b):
        return (min(a, b), max(a, b)) if M == N else (a, b)

    def couple(c1, c2, value):
        i, j = pos[key(*c1)], pos[key(*c2)]
        mat[i, j] += value
        mat[j, i] += value

    for a, b in coords:
        i = pos[(a, b)]
        dist = abs(a - b)
        mat[i, i] += shift_N[a - 1] + shift_M[b - 1]
        if M == N:
            if dist == 1 or 2 * dist <= M:
                mat[i, i] += V_ell(N, dist, J, U)
        elif M < N - 1:
            if dist == 1 or 2 * dist <= M:
                mat[i, i] += V_n(N, M, dist, J, U)
        # hopping of each stack, one step to the right (mirror added by couple)
        if a + 1 <= L and a + 1 != b:
            couple((a, b), (a + 1, b), hop_N)
        if b + 1 <= L and b + 1 != a:
            couple((a, b), (a, b + 1), hop_M)
    if M == N - 1:
        for a, b in coords:
            dist = abs(a - b)
            if a < b and (dist == 1 or dist <= M):
                couple((a, b), (b, a), Xi_ell(N, dist, J, U))
    elif M < N - 1:
        for a, b in coords:
            if b == a + 1:
                couple((a, b), (b, a), Xi1(N, M, J, U))
    states = np.zeros((len(coords), L), dtype=int)
    for i, (a, b) in enumerate(coords):
        states[i, a - 1] += N
        states[i, b - 1] += M
    return EffectiveModel(coords, mat, states, rates, "two_stack")


# analytic one-boson and first-order structure

def one_boson_solution(L: int, J: float, omega: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Energies omega + 2J cos(pi k/(L+1)), k = 1..L, and eigenvectors as columns."""
    if L < 1:
        raise DomainError("L must be >= 1")
    k = np.arange(1, L + 1)
    energies = omega + 2 * J * np.cos(np.pi * k / (L + 1))
    sites = np.arange(1, L + 1)
    states = np.sqrt(2 / (L + 1)) * np.sin(np.pi * np.outer(sites, k) / (L + 1))
    return energies, states


@dataclass
class Block:
    sites: np.ndarray          # 1-based boson sites covered by the block
    energies: np.ndarray
    states: np.ndarray         # columns over ``sites``


@dataclass
class FirstOrderBlocks:
    ell_N: int
    left: Block
    right: Block


def first_order_blocks(L: int, ell_N: int, J: float = 1.0) -> FirstOrderBlocks:
    """Boson on either side of a stack at ell_N (first order).

    The left block (length ell_N-1) carries 2J cos(pi k/ell_N); the right block
    (length L-ell_N) carries 2J cos(pi k/(L-ell_N+1)).
    """
    if not 1 <= ell_N <= L:
        raise DomainError(f"ell_N={ell_N} outside 1..{L}")

    def block(length, first_site):
        if length == 0:
            return Block(np.zeros(0, dtype=int), np.zeros(0), np.zeros((0, 0)))
        energies, states = one_boson_solution(length, J)
        return Block(np.arange(first_site, first_site + length), energies, states)

    return FirstOrderBlocks(ell_N, block(ell_N - 1, 1), block(L - ell_N, ell_N + 1))


@dataclass
class Category:
    label: str           # "i", "ii" or "iii"
    k_plus: int | None
    mixing: bool


def classify_category(k_minus: int, ell_N0: int, L: int) -> Category:
    if not 1 <= k_minus <= ell_N0 - 1:
        raise DomainError(f"k_minus={k_minus} outside 1..{ell_N0 - 1}")

    def partner(span):
        num = k_minus * span
        if num % ell_N0:
            return None
        k = num // ell_N0
        return k if 1 <= k <= L - ell_N0 + 1 else None

    k_i = partner(L - ell_N0 + 1)
    if k_i is not None:
        return Category("i", k_i, True)
    k_ii = partner(L - ell_N0 + 2)
    if k_ii is not None:
        return Category("ii", k_ii, L % 2 == 0 and ell_N0 == L // 2 + 1)
    return Category("iii", None, False)


def rabi_probability(h_minus: float, h_plus: float, h_cross: float) -> float:
    """Maximal transfer 1/(1 + ((h_minus - h_plus)/(2|h_cross|))^2); zero coupling gives 0."""
    if h_cross == 0:
        return 0.0
    return 1.0 / (1.0 + ((h_minus - h_plus) / (2 * abs(h_cross))) ** 2)


def tunneling_probability(L: int, N: int, ell_N0: int) -> float:
    if N < 3:
        raise DomainError("closed tunneling probability needs N >= 3")
    detune = math.sqrt(ell_N0 / (L - ell_N0 + 1)) - math.sqrt((L - ell_N0 + 1) / ell_N0)
    return 1.0 / (1.0 + detune ** 2 * (N ** 2 / (N - 2) + 0.5) ** 2)


def nontrivial_probability(N: int) -> float:
    """Largest occupation of the nontrivial state reached from two stacks N, (N+3)/2."""
    if N % 2 == 0 or N == 5 or N < 3:
        raise DomainError("defined for odd N >= 3, N != 5")
    h_tt = -(N * (N + 5) / (N - 5) - (N * N + 3 * N + 3) / (N - 1) + (N + 3) / (N + 1))
    h_nn = -((N + 1) / N + (5 * N + 7) / (N + 5) + 2 * (N - 1) / (N - 5) - (N + 1) / (N - 1))
    h_nt = 2 * math.sqrt(N + 3) / (N - 1)
    return rabi_probability(h_tt, h_nn, h_nt)


def rabi_quantities(L: int, N: int, ell_N0: int, k: int, J: float, U: float) -> dict:
    out = {
        "P_minus_to_plus": tunneling_probability(L, N, ell_N0),
        "Omega_k": Omega_k(L, k, stack_boson_Xi(N, J, U)),
    }
    try:
        out["P_nontrivial"] = nontrivial_probability(N)
    except DomainError:
        out["P_nontrivial"] = None
    return out
