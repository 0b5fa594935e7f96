"""High-order degenerate perturbation theory on anharmonicity manifolds.

The unperturbed operator is U_ref * A + omega_ref * N. Everything else (hopping and
the residual on-site diagonal, i.e. disorder) is the perturbation V and counts as
formal order one. With P the projector on the manifold and Q its complement, the
projected equation reads

    E P psi = [E0 + sum_m P V (W(E) V)^(m-1) P] P psi,   W(E) = Q (E - E0_s)^-1 Q.

Expanding W(E) around E0 with E = E0 + sum_j E^(j) gives a power series in the
energy corrections. ``order_hamiltonian`` collects every term of total formal order
n, applying V and the diagonal weights matrix-free to blocks of vectors.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import BasisError, ConvergenceError, ManifoldError, MembershipError, SequencingError
from .fock import Basis, Manifold, manifold
from .hamiltonian import clean_diagonal, disorder_diagonal, hopping_matrix
from .lattice import LatticeGraph
from .units import to_mhz


@dataclass(frozen=True)
class ProjectedProblem:
    basis: Basis = field(repr=False)
    graph: LatticeGraph = field(repr=False)
    manifold: Manifold = field(repr=False)
    U_ref: float
    omega_ref: float
    E0: float
    weights: np.ndarray = field(repr=False)        # W0 on the complement, 0 on the manifold
    in_manifold: np.ndarray = field(repr=False)    # boolean mask over the basis
    perturbation: sp.csr_matrix = field(repr=False)  # hopping + residual diagonal
    residual_diagonal: np.ndarray = field(repr=False)

    @property
    def A(self) -> int:
        return self.manifold.A

    @property
    def dim(self) -> int:
        return self.manifold.dim

    @property
    def complement(self) -> np.ndarray:
        return np.flatnonzero(~self.in_manifold)

    @property
    def disorder_in(self) -> np.ndarray:
        return self.residual_diagonal[self.manifold.members]

    @property
    def disorder_out(self) -> np.ndarray:
        return self.residual_diagonal[~self.in_manifold]

    @property
    def hopping_scale(self) -> float:
        return self.graph.max_hopping

    def energy_scale(self, n: int) -> float:
        """Characteristic size U (J/U)^n of an order-n correction."""
        J = self.hopping_scale
        if J == 0:
            return self.U_ref
        return self.U_ref * (J / self.U_ref) ** n

    def embed(self, vectors: np.ndarray) -> np.ndarray:
        """Manifold coordinates (d x k) -> full basis (dim x k)."""
        full = np.zeros((self.basis.dim, vectors.shape[1]), dtype=vectors.dtype)
        full[self.manifold.members] = vectors
        return full


def build_projected(basis: Basis, graph: LatticeGraph, A: int) -> ProjectedProblem:
    if graph.L != basis.L:
        raise BasisError(f"graph has {graph.L} sites, basis has {basis.L}")
    man = manifold(basis, A)
    if man.dim == 0:
        raise ManifoldError(f"no state with anharmonicity {A} for L={basis.L}, N={basis.N}")
    U_ref = float(np.mean(graph.U))
    omega_ref = float(np.mean(graph.omega))
    anh = basis.anharmonicities
    zeroth = U_ref * anh + omega_ref * basis.N
    residual = clean_diagonal(graph, basis) + disorder_diagonal(graph, basis) - zeroth
    # round-off from the reference split should not masquerade as disorder
    residual[np.abs(residual) < 1e-12 * max(U_ref, 1.0) * max(basis.N, 1) ** 2] = 0.0
    in_man = np.zeros(basis.dim, dtype=bool)
    in_man[man.members] = True
    E0 = U_ref * A + omega_ref * basis.N
    weights = np.zeros(basis.dim)
    weights[~in_man] = 1.0 / (U_ref * (A - anh[~in_man]))
    V = (hopping_matrix(graph, basis) + sp.diags(residual, format="csr")).tocsr()
    return ProjectedProblem(basis, graph, man, U_ref, omega_ref, E0, weights, in_man, V, residual)


def _weight_series(problem: ProjectedProblem, history: Sequence[float], kmax: int) -> list[np.ndarray]:
    """Coefficients c_k of W(E0 + dE) = sum_k c_k with c_k of formal order k.

    Per complement state 1/(d + dE) with dE = sum_j E^(j):
    c_0 = 1/d, c_k = -(1/d) sum_{j=1..k} E^(j) c_{k-j}.
    """
    w0 = problem.weights
    coeffs = [w0]
    for k in range(1, kmax + 1):
        acc = np.zeros_like(w0)
        for j in range(1, k + 1):
            if history[j - 1] != 0.0:
                acc += history[j - 1] * coeffs[k - j]
        coeffs.append(-w0 * acc)
    return coeffs


def _apply_order(problem: ProjectedProblem, block: np.ndarray, n: int,
                 history: Sequence[float]) -> np.ndarray:
    """P H^(n) acting on ``block`` (full-basis vectors supported on the manifold).

    Returns the manifold rows of the result (d x k).
    """
    if n < 1:
        raise SequencingError("orders start at 1")
    if len(history) < n - 1:
        raise SequencingError(f"order {n} needs E^(1..{n - 1}), got {len(history)} entries")
    V = problem.perturbation
    rows = problem.manifold.members
    out_mask = (~problem.in_manifold)[:, None]
    first = V @ block
    if n == 1:
        return first[rows]

    coeffs = _weight_series(problem, history, n - 2)
    q_first = np.where(out_mask, first, 0.0)
    z_cache: dict[tuple[int, int], np.ndarray] = {}
    qv_cache: dict[tuple[int, int], np.ndarray] = {}

    def z(j: int, k: int) -> np.ndarray:
        # j weight factors, energy-expansion order k
        key = (j, k)
        if key not in z_cache:
            if j == 1:
                z_cache[key] = coeffs[k][:, None] * q_first
            else:
                acc = coeffs[0][:, None] * qv(j - 1, k)
                for a in range(1, k + 1):
                    acc = acc + coeffs[a][:, None] * qv(j - 1, k - a)
                z_cache[key] = acc
        return z_cache[key]

    def qv(j: int, k: int) -> np.ndarray:
        key = (j, k)
        if key not in qv_cache:
            qv_cache[key] = np.where(out_mask, V @ z(j, k), 0.0)
        return qv_cache[key]

    result = np.zeros((len(rows), block.shape[1]), dtype=np.result_type(block, float))
    for m in range(2, n + 1):
        result += (V @ z(m - 1, n - m))[rows]
    return result


def order_hamiltonian(problem: ProjectedProblem, subspace: np.ndarray, n: int,
                      energy_history: Sequence[float]) -> np.ndarray:
    """n-th order matrix of the projected Hamiltonian inside ``subspace``.

    ``subspace`` holds orthonormal columns in manifold coordinates and
    ``energy_history`` its shared corrections E^(1..n-1).
    """
    subspace = np.asarray(subspace, dtype=float)
    if subspace.ndim == 1:
        subspace = subspace[:, None]
    full = problem.embed(subspace)
    mat = subspace.T @ _apply_order(problem, full, n, energy_history)
    return 0.5 * (mat + mat.T)


@dataclass
class TreeNode:
    order: int
    vectors: np.ndarray = field(repr=False)  # manifold coordinates, orthonormal columns
    energies: tuple[float, ...]              # (E0, E^(1), ..., E^(order))
    children: list["TreeNode"] = field(default_factory=list)
    degenerate: bool = False

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def energy(self) -> float:
        return float(sum(self.energies))

    @property
    def correction(self) -> float:
        return self.energies[-1]

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def walk(self):
        yield self
        for child in self.children:
            yield from child.walk()


@dataclass
class DegeneracyTree:
    problem: ProjectedProblem = field(repr=False)
    root: TreeNode
    n_max: int
    cluster_tol: float

    def leaves(self) -> list[TreeNode]:
        return [node for node in self.root.walk() if node.is_leaf]

    def leaf_energies(self) -> np.ndarray:
        return np.array([leaf.energy for leaf in self.leaves() for _ in range(leaf.dim)])

    def leaf_vectors(self) -> np.ndarray:
        return np.hstack([leaf.vectors for leaf in self.leaves()])

    def to_dict(self) -> dict:
        def node_dict(node: TreeNode) -> dict:
            return {
                "order": node.order,
                "dim": node.dim,
                "energy_MHz": to_mhz(node.correction),
                "total_MHz": to_mhz(node.energy),
                "degenerate": node.degenerate,
                "children": [node_dict(c) for c in node.children],
            }
        return {"A": self.problem.A, "n_max": self.n_max, "cluster_tol": self.cluster_tol,
                "root": node_dict(self.root)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _clusters(values: np.ndarray, gap: float) -> list[np.ndarray]:
    groups, current = [], [0]
    for i in range(1, len(values)):
        if values[i] - values[i - 1] < gap:
            current.append(i)
        else:
            groups.append(np.array(current))
            current = [i]
    groups.append(np.array(current))
    return groups


def resolve_manifold(problem: ProjectedProblem, n_max: int, cluster_tol: float = 1e-8) -> DegeneracyTree:
    """Split the manifold order by order until every block is resolved or n_max is hit."""
    if n_max < 1:
        raise SequencingError("n_max must be at least 1")
    root = TreeNode(0, np.eye(problem.dim), (problem.E0,))

    def split(node: TreeNode):
        if node.dim == 1:
            return
        if node.order >= n_max:
            node.degenerate = True
            return
        n = node.order + 1
        mat = order_hamiltonian(problem, node.vectors, n, node.energies[1:])
        values, vecs = np.linalg.eigh(mat)
        groups = _clusters(values, cluster_tol * problem.energy_scale(n))
        if len(groups) == 1:
            node.children.append(TreeNode(n, node.vectors, node.energies + (float(values.mean()),)))
        else:
            for g in groups:
                node.children.append(
                    TreeNode(n, node.vectors @ vecs[:, g], node.energies + (float(values[g].mean()),)))
        for child in node.children:
            split(child)

    split(root)
    return DegeneracyTree(problem, root, n_max, cluster_tol)


@dataclass
class EffectiveHamiltonian:
    problem: ProjectedProblem = field(repr=False)
    matrix: np.ndarray

    @property
    def states(self) -> np.ndarray:
        return self.problem.manifold.states()

    @property
    def labels(self) -> list[str]:
        return self.problem.manifold.labels()

    def to_coo_text(self, threshold: float = 0.0) -> str:
        rows = []
        for i, j in zip(*np.nonzero(np.abs(self.matrix) > threshold)):
            rows.append(f"{i} {j} {to_mhz(self.matrix[i, j]):.17g}")
        return "\n".join(rows) + "\n"


def effective_hamiltonian(tree: DegeneracyTree) -> EffectiveHamiltonian:
    dim = tree.problem.dim
    mat = np.zeros((dim, dim))
    for leaf in tree.leaves():
        mat += leaf.energy * (leaf.vectors @ leaf.vectors.T)
    return EffectiveHamiltonian(tree.problem, 0.5 * (mat + mat.T))


def _unit(problem: ProjectedProblem, state: Sequence[int]) -> tuple[int, np.ndarray]:
    if len(state) != problem.basis.L or sum(state) != problem.basis.N:
        raise MembershipError(f"state {tuple(state)} does not fit L={problem.basis.L}, N={problem.basis.N}")
    pos = problem.manifold.position(state)
    vec = np.zeros((problem.dim, 1))
    vec[pos, 0] = 1.0
    return pos, vec


def fock_energy_history(problem: ProjectedProblem, state: Sequence[int], n: int) -> list[float]:
    """Diagonal corrections <s|H^(k)|s> for k = 1..n, each using the previous ones."""
    _, vec = _unit(problem, state)
    history: list[float] = []
    for k in range(1, n + 1):
        history.append(float(order_hamiltonian(problem, vec, k, history)[0, 0]))
    return history


def extract_coupling(problem: ProjectedProblem, bra: Sequence[int], ket: Sequence[int], n: int,
                     energy_history: Sequence[float] | None = None) -> float:
    """<bra|H^(n)|ket> between Fock states of the manifold.

    Without an explicit history the ket's own diagonal corrections up to n-1 are used.
    At the lowest order that connects two distinct states only the zeroth energy
    term contributes, so the history then drops out.
    """
    bra_pos, _ = _unit(problem, bra)
    _, ket_vec = _unit(problem, ket)
    if energy_history is None:
        energy_history = fock_energy_history(problem, ket, n - 1)
    column = _apply_order(problem, problem.embed(ket_vec), n, energy_history)
    return float(column[bra_pos, 0])


def projected_matrix(problem: ProjectedProblem, energy: float, m_cut: int | None) -> np.ndarray:
    """H_A(E) = E0 + sum_{m<=m_cut} P V (W(E) V)^(m-1) P; ``m_cut=None`` sums all orders
    through the exact Schur complement."""
    V = problem.perturbation
    rows = problem.manifold.members
    out = problem.complement
    anh = problem.basis.anharmonicities
    unperturbed = problem.U_ref * anh + problem.omega_ref * problem.basis.N
    P_block = V[rows][:, rows].toarray()
    coupling = V[out][:, rows].toarray()  # Q V P
    mat = problem.E0 * np.eye(problem.dim) + P_block
    if out.size == 0:
        return mat
    if m_cut is None:
        QVQ = V[out][:, out]
        shifted = (sp.diags(energy - unperturbed[out]) - QVQ).tocsc()
        mat += coupling.T @ spla.spsolve(shifted, coupling).reshape(out.size, -1)
    else:
        w = 1.0 / (energy - unperturbed[out])
        QVQ = V[out][:, out]
        z = w[:, None] * coupling
        for _ in range(2, m_cut + 1):
            mat += coupling.T @ z
            z = w[:, None] * (QVQ @ z)
    return 0.5 * (mat + mat.T)


def nonlinear_projected_solve(problem: ProjectedProblem, n_max: int = 4, m_cut: int | None = -1,
                              tol: float = 1e-12, max_iter: int = 200) -> np.ndarray:
    """Self-consistent energies of the projected equation, one fixed point per level.

    ``m_cut=-1`` selects the default 2 * n_max; ``None`` keeps every order.
    """
    if problem.dim > 500:
        raise ManifoldError(f"manifold dimension {problem.dim} exceeds 500")
    if m_cut == -1:
        m_cut = 2 * n_max
    energies = np.empty(problem.dim)
    scale = max(abs(problem.E0), problem.U_ref)
    for level in range(problem.dim):
        E = problem.E0
        for _ in range(max_iter):
            new = np.linalg.eigvalsh(projected_matrix(problem, E, m_cut))[level]
            if abs(new - E) <= tol * scale:
                E = new
                break
            E = new
        else:
            raise ConvergenceError(f"level {level} did not converge in {max_iter} iterations")
        energies[level] = E
    return energies
