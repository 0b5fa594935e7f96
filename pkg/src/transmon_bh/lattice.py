"""Array geometry, site parameters, disorder sampling and flux-tuning rules.

All rates are angular frequencies in rad/us (see ``units``).
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import GeometryError, InvalidRuleError, InvalidSizeError
from .units import mhz, to_mhz


class Convention(enum.Enum):
    """How the anharmonicity deviation enters the Hamiltonian.

    HALF_NEGATIVE:  + delta_omega n - delta_U n(n-1)/2   (same sign as the clean U term)
    PLAIN_POSITIVE: + delta_omega n + delta_U n(n-1)
    """

    HALF_NEGATIVE = "half_negative"
    PLAIN_POSITIVE = "plain_positive"


@dataclass(frozen=True)
class SiteParams:
    omega: float
    U: float
    delta_omega: float = 0.0
    delta_U: float = 0.0

    def __post_init__(self):
        if not self.U > 0:
            raise InvalidSizeError(f"anharmonicity must be positive, got {self.U}")


@dataclass(frozen=True)
class LatticeGraph:
    sites: tuple[SiteParams, ...]
    edges: tuple[tuple[int, int, float], ...]
    geometry: str = "custom"
    shape: tuple[int, ...] | None = None
    coords: tuple[tuple[int, ...], ...] | None = None
    convention: Convention = Convention.HALF_NEGATIVE

    def __post_init__(self):
        seen = set()
        for a, b, _ in self.edges:
            if a == b:
                raise InvalidSizeError(f"self-edge on site {a}")
            if not (0 <= a < len(self.sites) and 0 <= b < len(self.sites)):
                raise InvalidSizeError(f"edge ({a}, {b}) outside 0..{len(self.sites) - 1}")
            key = (min(a, b), max(a, b))
            if key in seen:
                raise InvalidSizeError(f"edge {key} stored twice")
            seen.add(key)

    @property
    def L(self) -> int:
        return len(self.sites)

    @property
    def omega(self) -> np.ndarray:
        return np.array([s.omega for s in self.sites])

    @property
    def U(self) -> np.ndarray:
        return np.array([s.U for s in self.sites])

    @property
    def delta_omega(self) -> np.ndarray:
        return np.array([s.delta_omega for s in self.sites])

    @property
    def delta_U(self) -> np.ndarray:
        return np.array([s.delta_U for s in self.sites])

    @property
    def has_disorder(self) -> bool:
        return bool(np.any(self.delta_omega != 0) or np.any(self.delta_U != 0))

    @property
    def max_hopping(self) -> float:
        return max((abs(J) for _, _, J in self.edges), default=0.0)

    def neighbors(self, site: int) -> list[int]:
        out = []
        for a, b, _ in self.edges:
            if a == site:
                out.append(b)
            elif b == site:
                out.append(a)
        return sorted(out)

    def degree(self) -> np.ndarray:
        deg = np.zeros(self.L, dtype=int)
        for a, b, _ in self.edges:
            deg[a] += 1
            deg[b] += 1
        return deg

    def manhattan(self, a: int, b: int) -> int:
        if self.coords is None:
            raise GeometryError(f"geometry '{self.geometry}' has no coordinate map")
        return int(sum(abs(x - y) for x, y in zip(self.coords[a], self.coords[b])))

    def site_at(self, coord: Sequence[int]) -> int:
        if self.coords is None:
            raise GeometryError(f"geometry '{self.geometry}' has no coordinate map")
        try:
            return self.coords.index(tuple(coord))
        except ValueError:
            raise InvalidSizeError(f"no site at coordinate {tuple(coord)}") from None

    def site_labels(self) -> list[str]:
        """Column labels for occupation series."""
        if self.geometry == "rectangle" and self.coords is not None:
            return [f"n_{x}_{y}" for x, y in self.coords]
        return [f"n_{i + 1}" for i in range(self.L)]

    def with_deviations(self, delta_omega=None, delta_U=None) -> "LatticeGraph":
        d_om = self.delta_omega if delta_omega is None else np.asarray(delta_omega, float)
        d_u = self.delta_U if delta_U is None else np.asarray(delta_U, float)
        if len(d_om) != self.L or len(d_u) != self.L:
            raise InvalidSizeError(f"deviation lists must have length {self.L}")
        sites = tuple(
            replace(s, delta_omega=float(w), delta_U=float(u))
            for s, w, u in zip(self.sites, d_om, d_u)
        )
        return replace(self, sites=sites)

    # serialization (MHz at the interface)

    def to_dict(self) -> dict:
        geometry = {"kind": self.geometry}
        if self.shape is not None:
            geometry["shape"] = list(self.shape)
        if self.coords is not None:
            geometry["coords"] = [list(c) for c in self.coords]
        return {
            "geometry": geometry,
            "sites": [
                {
                    "omega_MHz": to_mhz(s.omega),
                    "U_MHz": to_mhz(s.U),
                    "dOmega_MHz": to_mhz(s.delta_omega),
                    "dU_MHz": to_mhz(s.delta_U),
                }
                for s in self.sites
            ],
            "edges": [{"a": a, "b": b, "J_MHz": to_mhz(J)} for a, b, J in self.edges],
            "convention": self.convention.value,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LatticeGraph":
        geometry = data["geometry"]
        sites = tuple(
            SiteParams(
                omega=mhz(s["omega_MHz"]),
                U=mhz(s["U_MHz"]),
                delta_omega=mhz(s.get("dOmega_MHz", 0.0)),
                delta_U=mhz(s.get("dU_MHz", 0.0)),
            )
            for s in data["sites"]
        )
        edges = tuple((int(e["a"]), int(e["b"]), mhz(e["J_MHz"])) for e in data["edges"])
        shape = geometry.get("shape")
        coords = geometry.get("coords")
        return cls(
            sites=sites,
            edges=edges,
            geometry=geometry["kind"],
            shape=tuple(shape) if shape is not None else None,
            coords=tuple(tuple(c) for c in coords) if coords is not None else None,
            convention=Convention(data.get("convention", Convention.HALF_NEGATIVE.value)),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "LatticeGraph":
        return cls.from_dict(json.loads(text))


def build_chain(L: int, J: float, U: float, omega: float = 0.0,
                convention: Convention = Convention.HALF_NEGATIVE) -> LatticeGraph:
    if L < 1:
        raise InvalidSizeError(f"chain length must be >= 1, got {L}")
    sites = tuple(SiteParams(omega, U) for _ in range(L))
    edges = tuple((i, i + 1, J) for i in range(L - 1))
    coords = tuple((1, i + 1) for i in range(L))
    return LatticeGraph(sites, edges, "chain", (L,), coords, convention)


def build_rectangle(Lx: int, Ly: int, J: float, U: float, omega: float = 0.0,
                    convention: Convention = Convention.HALF_NEGATIVE) -> LatticeGraph:
    """Lx x Ly grid. Site (i, j), 1-based, has index (i-1)*Ly + (j-1)."""
    if Lx < 1 or Ly < 1:
        raise InvalidSizeError(f"rectangle dimensions must be >= 1, got {Lx}x{Ly}")
    coords = tuple((i + 1, j + 1) for i in range(Lx) for j in range(Ly))
    sites = tuple(SiteParams(omega, U) for _ in coords)
    edges = []
    for i in range(Lx):
        for j in range(Ly):
            here = i * Ly + j
            if j + 1 < Ly:
                edges.append((here, here + 1, J))
            if i + 1 < Lx:
                edges.append((here, here + Ly, J))
    return LatticeGraph(sites, tuple(edges), "rectangle", (Lx, Ly), coords, convention)


def build_ring(L: int, J: float, U: float, omega: float = 0.0) -> LatticeGraph:
    """Periodic chain; handy for bulk couplings free of boundary terms."""
    if L < 3:
        raise InvalidSizeError(f"ring needs at least 3 sites, got {L}")
    sites = tuple(SiteParams(omega, U) for _ in range(L))
    edges = tuple((i, (i + 1) % L, J) for i in range(L))
    return LatticeGraph(sites, edges, "custom")


@dataclass(frozen=True)
class DisorderSpec:
    D_omega: float = 0.0
    D_U: float = 0.0
    convention: Convention = Convention.HALF_NEGATIVE
    seed: int = 0
    delta_omega: tuple[float, ...] | None = None
    delta_U: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.D_omega < 0 or self.D_U < 0:
            raise InvalidSizeError("disorder half-widths must be nonnegative")


def sample_disorder(graph: LatticeGraph, spec: DisorderSpec) -> LatticeGraph:
    """Uniform deviations from ``spec.seed``; explicit lists override the draw."""
    rng = np.random.default_rng(spec.seed)
    d_om = rng.uniform(-spec.D_omega, spec.D_omega, graph.L) if spec.D_omega > 0 else np.zeros(graph.L)
    d_u = rng.uniform(-spec.D_U, spec.D_U, graph.L) if spec.D_U > 0 else np.zeros(graph.L)
    if spec.delta_omega is not None:
        d_om = np.asarray(spec.delta_omega, float)
    if spec.delta_U is not None:
        d_u = np.asarray(spec.delta_U, float)
    return replace(graph.with_deviations(d_om, d_u), convention=spec.convention)


class TuningKind(enum.Enum):
    NONE = "none"
    SINGLE_STACK = "single_stack"
    EXCHANGE_PAIR = "exchange_pair"
    TWO_STACK_PAIR = "two_stack_pair"


@dataclass(frozen=True)
class TuningRule:
    """Flux-tuning rule. ``sites`` (0-based) are the two wells for TWO_STACK_PAIR,
    or an optional subset restricting SINGLE_STACK."""

    kind: TuningKind = TuningKind.NONE
    N: int = 0
    M: int = 0
    sites: tuple[int, ...] | None = None


def _half_negative_dU(graph: LatticeGraph) -> np.ndarray:
    # +dU n(n-1) equals -(-2 dU) n(n-1)/2, so the plain convention maps onto the
    # half-negative one with dU -> -2 dU and the same tuning formulas apply.
    if graph.convention is Convention.PLAIN_POSITIVE:
        return -2.0 * graph.delta_U
    return graph.delta_U.copy()


def tuning_assignments(graph: LatticeGraph, rule: TuningRule) -> np.ndarray:
    """Per-site delta_omega demanded by ``rule``; untouched sites keep their value."""
    d_u = _half_negative_dU(graph)
    d_om = graph.delta_omega.copy()
    L = graph.L
    if rule.kind is TuningKind.NONE:
        return d_om
    if rule.kind is TuningKind.SINGLE_STACK:
        if rule.N < 1:
            raise InvalidRuleError("SINGLE_STACK needs N >= 1")
        targets = range(L) if rule.sites is None else rule.sites
        for s in targets:
            if not 0 <= s < L:
                raise InvalidRuleError(f"site {s} outside lattice of {L} sites")
            d_om[s] = d_u[s] * (rule.N - 1) / 2
        return d_om
    if rule.kind is TuningKind.EXCHANGE_PAIR:
        N = rule.N
        if graph.geometry != "chain" or L % 2 or L < 2 or N < 1:
            raise InvalidRuleError("EXCHANGE_PAIR needs an even-length chain and N >= 1")
        left, right = d_u[L // 2 - 1], d_u[L // 2]
        pref = N / (2 * (N + 1))
        d_om[: L // 2] = pref * (left * N - right)
        d_om[L // 2:] = pref * (right * N - left)
        return d_om
    if rule.kind is TuningKind.TWO_STACK_PAIR:
        N, M = rule.N, rule.M
        if rule.sites is None or len(rule.sites) != 2 or N < 1 or M < 1:
            raise InvalidRuleError("TWO_STACK_PAIR needs N, M >= 1 and two sites")
        a, b = rule.sites
        if a == b or not (0 <= a < L and 0 <= b < L):
            raise InvalidRuleError(f"invalid well sites {rule.sites}")
        s = N + M
        q = N * N + M * M + N * M - N - M
        d_om[a] = d_u[a] * q / (2 * s) - d_u[b] * N * M / (2 * s)
        d_om[b] = d_u[b] * q / (2 * s) - d_u[a] * N * M / (2 * s)
        return d_om
    raise InvalidRuleError(f"unknown rule {rule.kind}")


def apply_tuning(graph: LatticeGraph, rule: TuningRule) -> LatticeGraph:
    return graph.with_deviations(delta_omega=tuning_assignments(graph, rule))


def effective_disorder_strength(D_omega: float, D_U: float, J: float, U: float) -> float:
    if U == 0:
        raise ZeroDivisionError("U must be nonzero")
    return max(D_omega, (J / U) ** 2 * D_U)
