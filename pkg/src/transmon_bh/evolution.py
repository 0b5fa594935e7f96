"""Unitary propagation (adaptive Lanczos/Krylov and a dense oracle) and observables."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import CapacityError, ConvergenceError, GeometryError, GridError, NormalizationError
from .fock import Basis
from .hamiltonian import SparseOperator
from .lattice import LatticeGraph

DENSE_CAP = 2000


@dataclass(frozen=True)
class TimeGrid:
    times: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or t.size == 0 or t[0] != 0.0:
            raise GridError("time grid must be a nonempty 1D array starting at 0")
        if np.any(np.diff(t) <= 0):
            raise GridError("time grid must be strictly increasing")
        object.__setattr__(self, "times", t)

    @classmethod
    def linspace(cls, t_max: float, samples: int) -> "TimeGrid":
        if t_max <= 0 or samples < 2:
            raise GridError("need t_max > 0 and at least two samples")
        return cls(np.linspace(0.0, t_max, samples))

    def __len__(self):
        return self.times.size


@dataclass
class TimeSeries:
    times: np.ndarray
    values: np.ndarray | None = None  # shape (len(times), len(labels))
    labels: list[str] = field(default_factory=list)
    states: np.ndarray | None = field(default=None, repr=False)  # shape (len(times), dim)

    def column(self, label: str) -> np.ndarray:
        return self.values[:, self.labels.index(label)]

    def to_csv(self, path, extra: dict[str, np.ndarray] | None = None) -> None:
        """Column 1 is ``t_us``, then the observables, then any ``extra`` columns."""
        extra = extra or {}
        header = ["t_us", *self.labels, *extra]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for k, t in enumerate(self.times):
                row = [f"{t:.10g}"]
                row += [f"{v:.12g}" for v in self.values[k]]
                row += [f"{col[k]:.10g}" for col in extra.values()]
                writer.writerow(row)

    @classmethod
    def from_csv(cls, path) -> "TimeSeries":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], np.array(rows[1:], dtype=float)
        return cls(body[:, 0], body[:, 1:], header[1:])


def _check_normalized(psi0: np.ndarray):
    norm = np.linalg.norm(psi0)
    if abs(norm - 1.0) > 1e-12:
        raise NormalizationError(f"initial state has norm {norm!r}")


def _matrix(H):
    if isinstance(H, SparseOperator):
        return H.matrix
    return H


def _lanczos(matvec: Callable, v0: np.ndarray, m_max: int, scale: float):
    """Lanczos with full reorthogonalisation.

    Returns (basis rows, alpha, beta, residual) where residual is the norm of the
    component leaving the subspace (0 when the subspace is invariant).
    """
    n = v0.size
    m_max = min(m_max, n)
    basis = np.zeros((m_max, n), dtype=complex)
    alpha = np.zeros(m_max)
    beta = np.zeros(m_max)
    basis[0] = v0 / np.linalg.norm(v0)
    for j in range(m_max):
        w = matvec(basis[j])
        alpha[j] = np.vdot(basis[j], w).real
        w = w - alpha[j] * basis[j]
        if j > 0:
            w = w - beta[j - 1] * basis[j - 1]
        # two passes of classical Gram-Schmidt keep the basis orthonormal
        for _ in range(2):
            w = w - basis[: j + 1].T @ (basis[: j + 1] @ w.conj()).conj()
        b = np.linalg.norm(w)
        beta[j] = b
        if b <= 1e-14 * scale:
            return basis[: j + 1], alpha[: j + 1], beta[:j], 0.0
        if j + 1 < m_max:
            basis[j + 1] = w / b
    return basis, alpha, beta[: m_max - 1], float(beta[m_max - 1])


class _KrylovStep:
    """Small propagator exp(-i T tau) e_1 on one Lanczos subspace."""

    def __init__(self, alpha, beta, residual):
        T = np.diag(alpha) + np.diag(beta, 1) + np.diag(beta, -1)
        self.theta, self.vecs = np.linalg.eigh(T)
        self.first = self.vecs[0].copy()
        self.residual = residual

    def coefficients(self, tau: float) -> np.ndarray:
        return self.vecs @ (np.exp(-1j * self.theta * tau) * self.first)

    def error(self, tau: float) -> float:
        if self.residual == 0.0:
            return 0.0
        return self.residual * abs(self.coefficients(tau)[-1])


def evolve_krylov(H, psi0: np.ndarray, grid: TimeGrid, tol: float = 1e-10, m_max: int = 30,
                  keep_states: bool = True,
                  observe: Callable[[np.ndarray], np.ndarray] | None = None,
                  labels: Sequence[str] = ()) -> TimeSeries:
    """Propagate psi0 under H and sample at every grid time.

    Each Lanczos subspace is reused for the longest sub-step whose error estimate
    (residual norm times the weight on the last basis vector) stays below ``tol``.
    ``observe`` maps a state to a vector of observables; with ``keep_states=False``
    only those are stored.
    """
    psi0 = np.asarray(psi0, dtype=complex)
    _check_normalized(psi0)
    if not isinstance(grid, TimeGrid):
        grid = TimeGrid(np.asarray(grid, float))
    mat = _matrix(H)
    mat_c = mat.astype(complex) if sp.issparse(mat) else np.asarray(mat, dtype=complex)
    matvec = mat_c.__matmul__
    scale = max(float(abs(mat).sum(axis=1).max()), 1e-300) if mat.shape[0] else 1.0

    times = grid.times
    states = np.zeros((times.size, psi0.size), dtype=complex) if keep_states else None
    obs = [] if observe is not None else None

    psi = psi0.copy()
    t = 0.0
    for k, t_target in enumerate(times):
        while t_target - t > 0.0:
            remaining = t_target - t
            norm = np.linalg.norm(psi)
            vbasis, alpha, beta, residual = _lanczos(matvec, psi, m_max, scale)
            step = _KrylovStep(alpha, beta, residual)
            tau = remaining
            halvings = 0
            while step.error(tau) > tol:
                tau *= 0.5
                halvings += 1
                if halvings > 60:
                    raise ConvergenceError(
                        f"Krylov step did not reach tol={tol} with m_max={m_max}")
            if halvings:
                # refine upward between tau and 2 tau
                lo, hi = tau, min(2 * tau, remaining)
                for _ in range(8):
                    mid = 0.5 * (lo + hi)
                    if step.error(mid) <= tol:
                        lo = mid
                    else:
                        hi = mid
                tau = lo
            psi = norm * (vbasis.T @ step.coefficients(tau))
            t = t + tau if tau < remaining else t_target
        if keep_states:
            states[k] = psi
        if obs is not None:
            obs.append(np.asarray(observe(psi), dtype=float))
    values = np.array(obs) if obs is not None else None
    return TimeSeries(times.copy(), values, list(labels), states)


def evolve_dense_oracle(H, psi0: np.ndarray, grid: TimeGrid, cap: int = DENSE_CAP) -> TimeSeries:
    """psi(t) = sum_E exp(-iEt) <E|psi0> |E> from a dense eigendecomposition."""
    psi0 = np.asarray(psi0, dtype=complex)
    _check_normalized(psi0)
    if not isinstance(grid, TimeGrid):
        grid = TimeGrid(np.asarray(grid, float))
    mat = _matrix(H)
    if mat.shape[0] > cap:
        raise CapacityError(f"dense oracle limited to dimension {cap}, got {mat.shape[0]}")
    dense = mat.toarray() if sp.issparse(mat) else np.asarray(mat)
    energies, vecs = np.linalg.eigh(dense)
    amps = vecs.conj().T @ psi0
    phases = np.exp(-1j * np.outer(grid.times, energies))
    states = (phases * amps) @ vecs.T
    return TimeSeries(grid.times.copy(), None, [], states)


def _states_of(states_or_series) -> tuple[np.ndarray, np.ndarray | None]:
    if isinstance(states_or_series, TimeSeries):
        return states_or_series.states, states_or_series.times
    arr = np.asarray(states_or_series)
    return (arr[None, :] if arr.ndim == 1 else arr), None


def occupation_probabilities(states: np.ndarray, occupations: np.ndarray) -> np.ndarray:
    """<n_l> per row of ``states`` for basis occupation table ``occupations``."""
    return (np.abs(states) ** 2) @ occupations


def occupation_series(states_or_series, basis: Basis, labels: Sequence[str] | None = None,
                      times: np.ndarray | None = None) -> TimeSeries:
    states, t = _states_of(states_or_series)
    if times is None:
        times = t if t is not None else np.arange(states.shape[0], dtype=float)
    values = occupation_probabilities(states, basis.states.astype(float))
    labels = list(labels) if labels is not None else [f"n_{i + 1}" for i in range(basis.L)]
    return TimeSeries(np.asarray(times, float), values, labels, None)


def manhattan_profile(occupations: np.ndarray, graph: LatticeGraph, origin: int) -> np.ndarray:
    """Aggregate per-site occupations (T x L) into shells of equal Manhattan distance."""
    if graph.coords is None:
        raise GeometryError(f"geometry '{graph.geometry}' has no coordinates")
    dist = np.array([graph.manhattan(origin, s) for s in range(graph.L)])
    shells = np.zeros((dist.max() + 1, graph.L))
    shells[dist, np.arange(graph.L)] = 1.0
    return occupations @ shells.T


def manhattan_series(states_or_series, basis: Basis, graph: LatticeGraph, origin,
                     times: np.ndarray | None = None) -> TimeSeries:
    """<n_d>(t) summed over sites at Manhattan distance d from ``origin``.

    ``origin`` is a site index or a coordinate tuple.
    """
    if graph.coords is None or graph.geometry != "rectangle":
        raise GeometryError(f"Manhattan aggregation needs rectangle geometry, got '{graph.geometry}'")
    if not isinstance(origin, (int, np.integer)):
        origin = graph.site_at(origin)
    occ = occupation_series(states_or_series, basis, times=times)
    values = manhattan_profile(occ.values, graph, origin)
    labels = [f"n_d{d}" for d in range(values.shape[1])]
    return TimeSeries(occ.times, values, labels, None)


def evolve_reduced(matrix: np.ndarray, fock_states: np.ndarray, start: int, grid: TimeGrid,
                   labels: Sequence[str] | None = None) -> TimeSeries:
    """Occupations from a small dense Hamiltonian whose coordinates are Fock configurations.

    ``start`` is the coordinate index of the initial configuration.
    """
    if not isinstance(grid, TimeGrid):
        grid = TimeGrid(np.asarray(grid, float))
    psi0 = np.zeros(matrix.shape[0], dtype=complex)
    psi0[start] = 1.0
    series = evolve_dense_oracle(np.asarray(matrix), psi0, grid, cap=max(DENSE_CAP, matrix.shape[0]))
    values = occupation_probabilities(series.states, np.asarray(fock_states, float))
    L = fock_states.shape[1]
    labels = list(labels) if labels is not None else [f"n_{i + 1}" for i in range(L)]
    return TimeSeries(series.times, values, labels, series.states)
