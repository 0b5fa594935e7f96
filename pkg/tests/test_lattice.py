import numpy as np
import pytest
from hypothesis import given, strategies as st

from transmon_bh.errors import InvalidRuleError, InvalidSizeError
from transmon_bh.fock import enumerate_basis, manifold, stack_anharmonicity
from transmon_bh.hamiltonian import disorder_diagonal
from transmon_bh.lattice import (Convention, DisorderSpec, LatticeGraph, TuningKind, TuningRule,
                                 apply_tuning, build_chain, build_rectangle, build_ring,
                                 effective_disorder_strength, sample_disorder, tuning_assignments)
from transmon_bh.units import mhz, to_mhz

J, U = mhz(10.0), mhz(250.0)
APP_DU = [1.59, -1.75, 4.62, -3.02, 3.81, 3.82]


def test_chain_sizes():
    g = build_chain(4, J, U)
    assert g.L == 4 and len(g.edges) == 3 and g.geometry == "chain"
    single = build_chain(1, J, U)
    assert single.L == 1 and single.edges == ()
    assert len(build_chain(6, J, U).edges) == 5
    assert not g.has_disorder


def test_chain_rejects_empty():
    with pytest.raises(InvalidSizeError):
        build_chain(0, J, U)
    with pytest.raises(InvalidSizeError):
        build_chain(3, J, 0.0)


def test_rectangle_sizes():
    g = build_rectangle(4, 4, J, U)
    assert g.L == 16 and len(g.edges) == 24
    sq = build_rectangle(2, 2, J, U)
    assert sq.L == 4 and len(sq.edges) == 4
    with pytest.raises(InvalidSizeError):
        build_rectangle(0, 3, J, U)


def test_degenerate_rectangle_matches_chain():
    rect = build_rectangle(1, 5, J, U)
    chain = build_chain(5, J, U)
    pairs = lambda g: sorted((min(a, b), max(a, b), w) for a, b, w in g.edges)  # noqa: E731
    assert pairs(rect) == pairs(chain)


@given(st.integers(1, 7), st.integers(1, 7))
def test_rectangle_edge_count(lx, ly):
    g = build_rectangle(lx, ly, J, U)
    assert len(g.edges) == lx * (ly - 1) + ly * (lx - 1)
    assert all(g.manhattan(a, b) == 1 for a, b, _ in g.edges)


def test_rectangle_coordinates():
    g = build_rectangle(4, 4, J, U)
    assert g.site_at((1, 1)) == 0
    assert g.site_at((2, 3)) == 6
    assert g.manhattan(g.site_at((1, 1)), g.site_at((4, 4))) == 6
    assert g.site_labels()[:2] == ["n_1_1", "n_1_2"]


def test_ring_has_wraparound():
    g = build_ring(5, J, U)
    assert len(g.edges) == 5 and all(d == 2 for d in g.degree())


def test_self_edge_rejected():
    g = build_chain(3, J, U)
    with pytest.raises(InvalidSizeError):
        LatticeGraph(g.sites, ((0, 0, J),))


def test_serialization_round_trip():
    g = sample_disorder(build_rectangle(2, 3, J, U), DisorderSpec(mhz(0.3), mhz(2.0), seed=4))
    back = LatticeGraph.from_json(g.to_json())
    np.testing.assert_allclose(back.delta_U, g.delta_U, rtol=1e-14)
    np.testing.assert_allclose(back.delta_omega, g.delta_omega, rtol=1e-14)
    assert back.coords == g.coords and back.convention == g.convention
    assert [e[:2] for e in back.edges] == [e[:2] for e in g.edges]
    d = g.to_dict()
    assert set(d) == {"geometry", "sites", "edges", "convention"}
    assert set(d["sites"][0]) == {"omega_MHz", "U_MHz", "dOmega_MHz", "dU_MHz"}
    assert d["edges"][0]["J_MHz"] == pytest.approx(10.0)


def test_disorder_override_pins_published_values():
    g = sample_disorder(build_chain(6, J, U), DisorderSpec(0.0, mhz(5.0), Convention.PLAIN_POSITIVE,
                                                           seed=9, delta_U=tuple(mhz(np.array(APP_DU)))))
    np.testing.assert_allclose(to_mhz(g.delta_U), APP_DU, rtol=1e-14)
    assert g.convention is Convention.PLAIN_POSITIVE


def test_zero_widths_give_zero_deviations():
    g = sample_disorder(build_chain(5, J, U), DisorderSpec(0.0, 0.0, seed=3))
    assert not g.has_disorder


@given(st.integers(0, 2**31 - 1), st.floats(0.0, 5.0), st.floats(0.0, 5.0))
def test_disorder_bounded_and_deterministic(seed, dw, du):
    base = build_chain(6, J, U)
    spec = DisorderSpec(mhz(dw), mhz(du), seed=seed)
    g1, g2 = sample_disorder(base, spec), sample_disorder(base, spec)
    assert np.array_equal(g1.delta_omega, g2.delta_omega)
    assert np.array_equal(g1.delta_U, g2.delta_U)
    assert np.all(np.abs(g1.delta_omega) <= mhz(dw))
    assert np.all(np.abs(g1.delta_U) <= mhz(du))
    assert not base.has_disorder


def test_single_stack_tuning_plain_positive():
    g = build_chain(6, J, U, convention=Convention.PLAIN_POSITIVE).with_deviations(
        delta_U=mhz(np.array(APP_DU)))
    tuned = apply_tuning(g, TuningRule(TuningKind.SINGLE_STACK, 3))
    np.testing.assert_allclose(tuned.delta_omega, -2 * g.delta_U, rtol=1e-14)


def test_single_stack_tuning_half_negative():
    dU = mhz(np.array(APP_DU))
    g = build_chain(6, J, U).with_deviations(delta_U=dU)
    tuned = apply_tuning(g, TuningRule(TuningKind.SINGLE_STACK, 4))
    np.testing.assert_allclose(tuned.delta_omega, dU * 3 / 2, rtol=1e-14)


@pytest.mark.parametrize("kind", list(TuningKind))
def test_zero_disorder_tuning_is_zero(kind):
    g = build_chain(4, J, U)
    rule = TuningRule(kind, 3, 2, (0, 2) if kind is TuningKind.TWO_STACK_PAIR else None)
    assert np.all(apply_tuning(g, rule).delta_omega == 0.0)


@pytest.mark.parametrize("convention", list(Convention))
@given(st.lists(st.floats(-5, 5), min_size=5, max_size=5), st.integers(2, 5))
def test_single_stack_tuning_flattens_stack_diagonal(convention, du, N):
    g = build_chain(5, J, U, convention=convention).with_deviations(delta_U=mhz(np.array(du)))
    tuned = apply_tuning(g, TuningRule(TuningKind.SINGLE_STACK, N))
    basis = enumerate_basis(5, N)
    stacks = manifold(basis, stack_anharmonicity(N)).members
    diag = disorder_diagonal(tuned, basis)[stacks]
    assert np.ptp(diag) <= 1e-12 * max(1.0, np.abs(g.delta_U).max() * N * N)


@given(st.lists(st.floats(-5, 5), min_size=5, max_size=5), st.sampled_from([(3, 2), (4, 2), (5, 3)]),
       st.sampled_from([(0, 2), (1, 4), (3, 0)]))
def test_two_stack_tuning_flattens_pair_diagonal(du, NM, wells):
    N, M = NM
    a, b = wells
    g = build_chain(5, J, U).with_deviations(delta_U=mhz(np.array(du)))
    tuned = apply_tuning(g, TuningRule(TuningKind.TWO_STACK_PAIR, N, M, wells))
    basis = enumerate_basis(5, N + M)
    s1, s2 = [0] * 5, [0] * 5
    s1[a], s1[b] = N, M
    s2[a], s2[b] = M, N
    diag = disorder_diagonal(tuned, basis)
    d1, d2 = diag[basis.rank(s1)], diag[basis.rank(s2)]
    assert abs(d1) <= 1e-9 * mhz(5.0) and abs(d2) <= 1e-9 * mhz(5.0)


def test_exchange_pair_tuning_values():
    dU = mhz(np.array([0.5, -1.0, 2.0, 0.25]))
    g = build_chain(4, J, U).with_deviations(delta_U=dU)
    out = tuning_assignments(g, TuningRule(TuningKind.EXCHANGE_PAIR, 3))
    left = 3 / 8 * (dU[1] * 3 - dU[2])
    right = 3 / 8 * (dU[2] * 3 - dU[1])
    np.testing.assert_allclose(out, [left, left, right, right], rtol=1e-14)


def test_tuning_rule_mismatch():
    g = build_chain(5, J, U)
    with pytest.raises(InvalidRuleError):
        apply_tuning(g, TuningRule(TuningKind.EXCHANGE_PAIR, 3))
    with pytest.raises(InvalidRuleError):
        apply_tuning(g, TuningRule(TuningKind.TWO_STACK_PAIR, 3, 2, (0, 9)))
    with pytest.raises(InvalidRuleError):
        apply_tuning(g, TuningRule(TuningKind.SINGLE_STACK, 3, sites=(7,)))


def test_effective_disorder_strength():
    val = effective_disorder_strength(mhz(0.1), mhz(1.0), 0.04, 1.0)
    assert val == pytest.approx(mhz(0.1))
    assert effective_disorder_strength(0.0, 0.0, 1.0, 25.0) == 0.0
    assert effective_disorder_strength(0.0, 3.0, 2.0, 2.0) == 3.0
    with pytest.raises(ZeroDivisionError):
        effective_disorder_strength(1.0, 1.0, 1.0, 0.0)
