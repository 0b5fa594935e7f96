import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import chain_edges, second_quantized_hamiltonian
from transmon_bh.errors import BasisError, InvalidSizeError
from transmon_bh.fock import enumerate_basis
from transmon_bh.hamiltonian import (build_hamiltonian, diagonal_operator, identity, local_number,
                                     total_number)
from transmon_bh.lattice import Convention, build_chain, build_rectangle
from transmon_bh.units import mhz

J, U = mhz(10.0), mhz(250.0)


def test_two_site_single_boson():
    H = build_hamiltonian(build_chain(2, J, U), enumerate_basis(2, 1)).to_dense()
    np.testing.assert_array_equal(H, [[0, J], [J, 0]])


def test_bosonic_enhancement():
    basis = enumerate_basis(2, 2)
    H = build_hamiltonian(build_chain(2, J, U), basis).to_dense()
    assert H[basis.rank([2, 0]), basis.rank([1, 1])] == pytest.approx(np.sqrt(2) * J, rel=1e-15)


def test_stack_diagonal():
    basis = enumerate_basis(4, 3)
    H = build_hamiltonian(build_chain(4, J, U), basis)
    assert H.diagonal()[basis.rank([3, 0, 0, 0])] == pytest.approx(-3 * U, rel=1e-15)


@pytest.mark.parametrize("convention", list(Convention))
@pytest.mark.parametrize("L,N", [(3, 3), (4, 2), (4, 3)])
def test_matches_second_quantized_oracle(L, N, convention, rng):
    omega = rng.normal(0, 1, L)
    d_om, d_u = rng.normal(0, 0.3, L), rng.normal(0, 0.3, L)
    g = build_chain(L, J, U, convention=convention)
    g = type(g)(tuple(type(s)(o, U) for s, o in zip(g.sites, omega)), g.edges, g.geometry, g.shape,
                g.coords, convention).with_deviations(d_om, d_u)
    mine = build_hamiltonian(g, enumerate_basis(L, N)).to_dense()
    ref = second_quantized_hamiltonian(L, N, chain_edges(L, J), omega, [U] * L, d_om, d_u,
                                       plain_positive=convention is Convention.PLAIN_POSITIVE)
    np.testing.assert_allclose(mine, ref, atol=1e-12 * U)


def test_rectangle_matches_oracle():
    g = build_rectangle(2, 2, J, U)
    mine = build_hamiltonian(g, enumerate_basis(4, 3)).to_dense()
    ref = second_quantized_hamiltonian(4, 3, g.edges, [0] * 4, [U] * 4)
    np.testing.assert_allclose(mine, ref, atol=1e-12 * U)


@given(st.integers(1, 6), st.integers(1, 5))
def test_exactly_hermitian(L, N):
    H = build_hamiltonian(build_chain(L, J, U, omega=mhz(5000.0)), enumerate_basis(L, N))
    assert (H.matrix != H.matrix.T).nnz == 0


def test_dimension_mismatch():
    with pytest.raises(BasisError):
        build_hamiltonian(build_chain(3, J, U), enumerate_basis(4, 2))
    H = build_hamiltonian(build_chain(3, J, U), enumerate_basis(3, 2))
    with pytest.raises(BasisError):
        H.apply(np.ones(5))


def test_number_operators():
    basis = enumerate_basis(4, 3)
    Ntot = total_number(basis)
    np.testing.assert_array_equal(Ntot.to_dense(), 3 * np.eye(20))
    n1 = local_number(basis, 0)
    assert n1.diagonal()[basis.rank([3, 0, 0, 0])] == 3
    summed = local_number(basis, 0)
    for k in range(1, 4):
        summed = summed + local_number(basis, k)
    np.testing.assert_array_equal(summed.to_dense(), Ntot.to_dense())
    with pytest.raises(InvalidSizeError):
        local_number(basis, 4)


def test_apply_and_expectation(rng):
    basis = enumerate_basis(4, 3)
    H = build_hamiltonian(build_chain(4, J, U), basis)
    x, y = rng.normal(size=20) + 1j * rng.normal(size=20), rng.normal(size=20)
    np.testing.assert_array_equal(identity(20).apply(x), x)
    a, b = 0.3 - 0.2j, 1.7
    lhs = H.apply(a * x + b * y)
    np.testing.assert_allclose(lhs, a * H.apply(x) + b * H.apply(y), atol=1e-13 * np.abs(lhs).max())
    energies, vecs = np.linalg.eigh(H.to_dense())
    for k in range(20):
        assert H.expectation(vecs[:, k]) == pytest.approx(energies[k], abs=1e-9 * U)


def test_commutes_with_number(rng):
    basis = enumerate_basis(5, 3)
    H = build_hamiltonian(build_chain(5, J, U), basis)
    Nop = total_number(basis)
    x = rng.normal(size=basis.dim)
    diff = H.apply(Nop.apply(x)) - Nop.apply(H.apply(x))
    assert np.linalg.norm(diff) <= 1e-12 * np.linalg.norm(x) * H.norm_bound()


def test_band_structure():
    basis = enumerate_basis(6, 4)
    Uf = mhz(250.0)
    H = build_hamiltonian(build_chain(6, mhz(20.0), Uf), basis)
    energies = np.linalg.eigvalsh(H.to_dense())
    bands = np.array([-6, -3, -2, -1, 0])
    nearest = bands[np.argmin(np.abs(energies[:, None] - Uf * bands[None, :]), axis=1)]
    assert np.all(np.abs(energies - Uf * nearest) < Uf / 2)


def test_coo_dump_round_trip():
    H = build_hamiltonian(build_chain(3, J, U), enumerate_basis(3, 2))
    rows = [line.split() for line in H.to_coo_text().strip().splitlines()]
    dense = np.zeros((H.dim, H.dim))
    for r, c, v in rows:
        dense[int(r), int(c)] = float(v)
    np.testing.assert_array_equal(dense, H.to_dense())
    assert diagonal_operator([1.0, 2.0]).expectation(np.array([0.0, 1.0])) == 2.0
