from fractions import Fraction

import numpy as np
import pytest

from hhflow.algebra import FlowParameters, OperatorPolynomial, matrix_representation
from hhflow.iterative import (
    DivergentLimitError, LambdaSeries, RateScale, TermBudgetError, gustavson_generator, initial_series,
    iterate_flow, resonant_residue,
)
from hhflow.spectrum import eigenvalue_from_normal_form

from oracles import rs_energy_table
from reference import TABLE_INCOMMENSURATE

P = FlowParameters.make()
STATES = [(0, 0), (0, 1), (1, 0), (1, 1), (2, 1), (1, 3)]


@pytest.fixture(scope="module")
def rs_table():
    return rs_energy_table(1.3, 0.7, 0.1, STATES, 8)


@pytest.fixture(scope="module")
def flow8():
    return iterate_flow(P, 8, full=True)


@pytest.mark.parametrize("K", [2, 4, 6, 8])
def test_energies_match_rayleigh_schrodinger(rs_table, flow8, K):
    lam = P.lam
    for s in STATES:
        rs = sum(e * lam ** j for j, e in enumerate(rs_table[s][:K + 1]))
        nf = flow8.diagonal_form(lam, max_order=K)
        assert eigenvalue_from_normal_form(nf, *s) == pytest.approx(rs, abs=1e-11)


def test_order_coefficients_match_rayleigh_schrodinger(rs_table, flow8):
    # per-order energy corrections at unit coupling, not just the sums
    for s in STATES:
        for k in range(9):
            ek = eigenvalue_from_normal_form(flow8.limits[k], *s) + (P.zero_point if k == 0 else 0.0)
            assert ek == pytest.approx(rs_table[s][k], rel=1e-9, abs=1e-12)


def test_odd_orders_vanish(flow8):
    for k in (1, 3, 5, 7):
        assert all(abs(c) < 1e-13 for _, c in flow8.limits[k].items())


def test_iter4_matches_printed_column():
    nf = iterate_flow(P, 4).diagonal_form()
    for state, _, iter4, _, _ in TABLE_INCOMMENSURATE:
        assert eigenvalue_from_normal_form(nf, *state) == pytest.approx(iter4, abs=5e-6)


@pytest.mark.parametrize("w, v", [("1.3", "0.7"), ("1", "1"), ("2", "1")])
@pytest.mark.parametrize("K", [3, 4, 5, 6])
def test_pruned_final_orders_match_full(w, v, K):
    p = FlowParameters.make(w, v)
    fast, full = iterate_flow(p, K), iterate_flow(p, K, full=True)
    a, b = fast.normal_form(), full.normal_form()
    for m in set(a) | set(b):
        assert float(a[m]) == pytest.approx(float(b[m]), abs=1e-13)


def test_first_order_limit_vanishes_when_incommensurate():
    r = iterate_flow(P, 1)
    assert not r.limits[1]


def test_h0_is_constant_and_series_hermitian(flow8):
    series = flow8.series
    assert series.orders[0] == {(1, 1, 0, 0): {(0, 0): 1.3}, (0, 0, 1, 1): {(0, 0): 0.7}}
    for k in range(1, 5):
        for ell in (0.0, 0.7, 3.0):
            assert series.at(k, ell).is_hermitian(tol=1e-13)


def test_off_diagonal_limits_vanish_incommensurate(flow8):
    assert not resonant_residue(flow8)


def test_resonant_residue_commensurate():
    res = resonant_residue(iterate_flow(FlowParameters.make(1, 1), 4))
    assert res and res.is_hermitian(tol=1e-14)
    assert {m.grading for m in res} == {(2, -2), (-2, 2)}
    # shell-preserving: couples |n1, n2> to |n1 +- 2, n2 -+ 2>
    assert (2, 0, 0, 2) in res


def test_generator_on_first_order():
    series = initial_series(P)
    eta = gustavson_generator(series)
    mono = (2, 0, 1, 0)
    (key, c1), = series.orders[1][mono].items()
    assert eta.orders[1][mono][key] == pytest.approx(3.3 * c1)
    partner = (0, 2, 0, 1)
    assert eta.orders[1][partner][key] == pytest.approx(-3.3 * c1)
    assert eta.orders[0] == {}


def test_generator_drops_diagonal_and_resonant_words():
    scale = RateScale.of(FlowParameters.make(1, 1))
    series = LambdaSeries(FlowParameters.make(1, 1), scale,
                          [{}, {(1, 1, 0, 0): {(0, 0): 1.0}, (2, 0, 0, 2): {(0, 0): 1.0}}])
    assert gustavson_generator(series).orders[1] == {}


def test_divergent_limit_is_an_error():
    series = LambdaSeries(P, RateScale.of(P), [{}, {(1, 0, 0, 0): {(1, 0): 0.5}}])
    with pytest.raises(DivergentLimitError):
        series.limit(1)


def test_term_budget():
    with pytest.raises(TermBudgetError):
        iterate_flow(P, 4, max_terms=10)
    with pytest.raises(ValueError):
        iterate_flow(P, 0)


def test_exp_poly_coefficients_are_exact_rates(flow8):
    coeff = flow8.series.coefficient(1, (2, 0, 1, 0))
    assert coeff.rates() == {Fraction(1089, 100)}


def _ell_drift(result, K, lam, size=20, levels=6):
    evs = []
    for ell in (0.0, 1.0, 5.0, 50.0):
        h = OperatorPolynomial({}, max_degree=None)
        for k in range(K + 1):
            h = h + result.series.at(k, ell).scale(lam ** k)
        evs.append(np.linalg.eigvalsh(matrix_representation(h, size, size))[:levels])
    evs = np.array(evs)
    return np.max(np.abs(evs - evs[0]), axis=0)


@pytest.mark.parametrize("K", [2, 4])
def test_truncated_flow_is_unitary_to_working_order(K):
    """Spectrum of the order-K truncation drifts along l only at O(lam**(K+2))."""
    r = iterate_flow(P, K, full=True)
    d1, d2 = _ell_drift(r, K, -0.1), _ell_drift(r, K, -0.05)
    ratio = d1 / d2
    assert np.all(ratio > 0.7 * 2 ** (K + 2)) and np.all(ratio < 1.3 * 2 ** (K + 2))
    if K == 2:
        assert d1[0] < 1e-4
