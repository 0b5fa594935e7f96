import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import expm_propagate
from transmon_bh.errors import CapacityError, ConvergenceError, GeometryError, GridError, NormalizationError
from transmon_bh.evolution import (TimeGrid, TimeSeries, evolve_dense_oracle, evolve_krylov,
                                   evolve_reduced, manhattan_series, occupation_series)
from transmon_bh.fock import enumerate_basis
from transmon_bh.hamiltonian import build_hamiltonian
from transmon_bh.lattice import build_chain, build_rectangle
from transmon_bh.units import mhz

J, U = mhz(10.0), mhz(250.0)


def fock(basis, occ):
    psi = np.zeros(basis.dim, dtype=complex)
    psi[basis.rank(occ)] = 1.0
    return psi


def random_state(rng, dim):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def test_grid_validation():
    with pytest.raises(GridError):
        TimeGrid(np.array([0.1, 0.2]))
    with pytest.raises(GridError):
        TimeGrid(np.array([0.0, 0.2, 0.2]))
    with pytest.raises(GridError):
        TimeGrid.linspace(-1.0, 10)
    assert len(TimeGrid.linspace(1.0, 11)) == 11


def test_time_zero_returns_initial(rng):
    basis = enumerate_basis(4, 3)
    H = build_hamiltonian(build_chain(4, J, U), basis)
    psi0 = random_state(rng, basis.dim)
    out = evolve_krylov(H, psi0, TimeGrid(np.array([0.0])))
    np.testing.assert_array_equal(out.states[0], psi0)


def test_eigenvector_picks_up_phase():
    basis = enumerate_basis(4, 3)
    H = build_hamiltonian(build_chain(4, J, U), basis)
    E, V = np.linalg.eigh(H.to_dense())
    v = V[:, 5].astype(complex)
    grid = TimeGrid.linspace(3.0, 7)
    out = evolve_krylov(H, v, grid)
    for t, psi in zip(grid.times, out.states):
        assert np.linalg.norm(psi - np.exp(-1j * E[5] * t) * v) < 1e-9


def test_normalization_checked():
    basis = enumerate_basis(3, 2)
    H = build_hamiltonian(build_chain(3, J, U), basis)
    with pytest.raises(NormalizationError):
        evolve_krylov(H, np.ones(basis.dim, dtype=complex), TimeGrid.linspace(1.0, 3))
    with pytest.raises(NormalizationError):
        evolve_dense_oracle(H, np.ones(basis.dim, dtype=complex), TimeGrid.linspace(1.0, 3))


def test_krylov_breakdown_raises():
    basis = enumerate_basis(3, 2)
    H = build_hamiltonian(build_chain(3, J, U), basis)
    with pytest.raises(ConvergenceError):
        evolve_krylov(H, fock(basis, [2, 0, 0]), TimeGrid.linspace(1.0, 3), m_max=1)


def test_dense_cap():
    H = np.eye(5)
    psi = np.zeros(5, complex)
    psi[0] = 1
    with pytest.raises(CapacityError):
        evolve_dense_oracle(H, psi, TimeGrid.linspace(1.0, 2), cap=4)


def test_identity_hamiltonian():
    psi = np.array([0.6, 0.8j])
    grid = TimeGrid.linspace(2.0, 5)
    out = evolve_dense_oracle(np.eye(2), psi, grid)
    for t, s in zip(grid.times, out.states):
        np.testing.assert_allclose(s, np.exp(-1j * t) * psi, atol=1e-14)


def test_two_level_rabi():
    Jr = 1.3
    grid = TimeGrid.linspace(5.0, 51)
    basis = enumerate_basis(2, 1)
    for evolve in (evolve_dense_oracle, evolve_krylov):
        out = evolve(np.array([[0.0, Jr], [Jr, 0.0]]), np.array([1.0, 0.0], complex), grid)
        n1 = occupation_series(out, basis).column("n_1")
        np.testing.assert_allclose(n1, np.cos(Jr * grid.times) ** 2, atol=1e-10)


def test_stack_run_matches_dense_and_expm():
    basis = enumerate_basis(4, 3)
    H = build_hamiltonian(build_chain(4, J, U), basis)
    psi0 = fock(basis, [0, 3, 0, 0])
    grid = TimeGrid.linspace(50.0, 101)
    kry = evolve_krylov(H, psi0, grid)
    den = evolve_dense_oracle(H, psi0, grid)
    assert np.linalg.norm(kry.states - den.states, axis=1).max() <= 1e-8
    ref = expm_propagate(H.to_dense(), psi0, grid.times[::20])
    assert np.linalg.norm(den.states[::20] - ref, axis=1).max() <= 1e-8


def test_krylov_vs_dense_random_triples(rng):
    """Ten random (H, psi0, t) triples, dims up to ~500, multi-step windows."""
    cases = [(3, 5), (4, 4), (5, 3), (6, 3), (4, 6), (7, 2), (5, 4), (6, 4), (3, 8), (6, 5)]
    for L, N in cases:
        basis = enumerate_basis(L, N)
        omega = rng.normal(0, mhz(20.0), L)
        g = build_chain(L, mhz(rng.uniform(5, 20)), U).with_deviations(delta_omega=omega)
        H = build_hamiltonian(g, basis)
        psi0 = random_state(rng, basis.dim)
        grid = TimeGrid(np.sort(np.concatenate([[0.0], rng.uniform(0, 0.2, 3)])))
        err = np.linalg.norm(evolve_krylov(H, psi0, grid).states
                             - evolve_dense_oracle(H, psi0, grid).states, axis=1)
        assert err.max() <= 1e-8, (L, N, err.max())


@given(st.integers(2, 5), st.integers(1, 4), st.floats(0.0, 2.0), st.integers(0, 10_000))
def test_unitarity_and_energy_conservation(L, N, t_max, seed):
    rng = np.random.default_rng(seed)
    basis = enumerate_basis(L, N)
    H = build_hamiltonian(build_chain(L, J, U), basis)
    psi0 = random_state(rng, basis.dim)
    grid = TimeGrid(np.linspace(0.0, t_max, 4)) if t_max > 0 else TimeGrid(np.array([0.0]))
    out = evolve_krylov(H, psi0, grid)
    norms = np.linalg.norm(out.states, axis=1)
    assert np.abs(norms - 1).max() <= 1e-8
    e0 = H.expectation(psi0)
    drift = max(abs(H.expectation(s) - e0) for s in out.states)
    assert drift <= 1e-8 * abs(e0) + 1e-10 * H.norm_bound()
    occ = occupation_series(out, basis)
    np.testing.assert_allclose(occ.values.sum(axis=1), N, atol=1e-8)


def test_occupation_examples():
    basis = enumerate_basis(4, 3)
    occ = occupation_series(fock(basis, [3, 0, 0, 0]), basis)
    np.testing.assert_array_equal(occ.values[0], [3, 0, 0, 0])
    b1 = enumerate_basis(4, 1)
    psi = (fock(b1, [1, 0, 0, 0]) + fock(b1, [0, 1, 0, 0])) / np.sqrt(2)
    np.testing.assert_allclose(occupation_series(psi, b1).values[0], [0.5, 0.5, 0, 0], atol=1e-15)


def test_manhattan_aggregation(rng):
    g = build_rectangle(4, 4, J, U)
    basis = enumerate_basis(16, 3)
    occ = [0] * 16
    occ[g.site_at((1, 1))] = 3
    m = manhattan_series(fock(basis, occ), basis, g, (1, 1))
    assert m.labels == [f"n_d{d}" for d in range(7)]
    np.testing.assert_array_equal(m.values[0], [3, 0, 0, 0, 0, 0, 0])
    psi = random_state(rng, basis.dim)
    m = manhattan_series(psi, basis, g, g.site_at((2, 3)))
    assert m.values.sum() == pytest.approx(3.0, abs=1e-12)


def test_manhattan_needs_rectangle():
    basis = enumerate_basis(3, 1)
    with pytest.raises(GeometryError):
        manhattan_series(np.array([1, 0, 0], complex), basis, build_chain(3, J, U), 0)


def test_csv_round_trip(tmp_path):
    series = TimeSeries(np.array([0.0, 0.5]), np.array([[3.0, 0.0], [2.5, 0.5]]), ["n_1", "n_2"])
    path = tmp_path / "s.csv"
    series.to_csv(path, extra={"t_natural": np.array([0.0, 0.1])})
    assert path.read_text().splitlines()[0] == "t_us,n_1,n_2,t_natural"
    back = TimeSeries.from_csv(path)
    np.testing.assert_allclose(back.values[:, :2], series.values)


def test_observables_only_mode():
    basis = enumerate_basis(4, 2)
    H = build_hamiltonian(build_chain(4, J, U), basis)
    occ_table = basis.states.astype(float)
    out = evolve_krylov(H, fock(basis, [0, 2, 0, 0]), TimeGrid.linspace(1.0, 5), keep_states=False,
                        observe=lambda s: np.abs(s) ** 2 @ occ_table, labels=["n_1", "n_2", "n_3", "n_4"])
    assert out.states is None and out.values.shape == (5, 4)


def test_reduced_evolution_one_boson():
    Jr = 0.7
    mat = np.array([[0.0, Jr], [Jr, 0.0]])
    out = evolve_reduced(mat, np.eye(2, dtype=int), 0, TimeGrid.linspace(2.0, 9))
    np.testing.assert_allclose(out.values[:, 0], np.cos(Jr * out.times) ** 2, atol=1e-12)
