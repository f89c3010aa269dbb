"""Randomized algebra properties shared by the unit and acceptance suites.

Each ``check_*`` function draws one random instance from ``rng`` and returns
the worst deviation found (0 for exact checks that hold).
"""
from __future__ import annotations

from fractions import Fraction

import numpy as np

from hhflow.algebra import FlowParameters, OperatorPolynomial, commutator, epsilon, free_hamiltonian, \
    matrix_representation

from oracles import interior_indices, polynomial_matrix, random_fraction, random_word

SIZE = 12


def random_polynomial(rng, n_terms: int = 3, max_power: int = 2) -> OperatorPolynomial:
    terms = [(random_word(rng, max_power), random_fraction(rng)) for _ in range(int(rng.integers(1, n_terms + 1)))]
    return OperatorPolynomial(terms, max_degree=None)


def check_matrix_oracle(rng) -> float:
    """``[P, Q]`` from normal ordering against ladder-power matrices on the exact interior.

    The deviation is relative to the largest entry of ``PQ`` and ``QP``: the
    oracle forms their difference, and entries reach ~1e5.
    """
    p, q = random_polynomial(rng), random_polynomial(rng)
    margin = max(max(m.k, m.m) for m in list(p) + list(q))
    idx = np.ix_(*(2 * [interior_indices(SIZE, margin)]))
    pm, qm = polynomial_matrix(p.terms, SIZE), polynomial_matrix(q.terms, SIZE)
    ref = (pm @ qm - qm @ pm)[idx]
    scale = max(1.0, np.max(np.abs(pm @ qm)[idx]), np.max(np.abs(qm @ pm)[idx]))
    ours = matrix_representation(commutator(p, q), SIZE, SIZE)[idx]
    return float(np.max(np.abs(ours - ref), initial=0.0) / scale)


def check_jacobi(rng) -> float:
    a, b, c = (random_polynomial(rng) for _ in range(3))
    total = commutator(a, commutator(b, c)) + commutator(b, commutator(c, a)) + commutator(c, commutator(a, b))
    return 0.0 if not total else 1.0


def check_hermiticity(rng) -> float:
    """Commutator of two Hermitian operators is anti-Hermitian."""
    p, q = random_polynomial(rng), random_polynomial(rng)
    a, b = p + p.dagger(), q + q.dagger()
    ok = a.is_hermitian() and b.is_hermitian() and commutator(a, b).is_antihermitian()
    return 0.0 if ok else 1.0


def check_eigenoperator(rng) -> float:
    """``[[H0, T], H0] = -eps_T T`` for a random word and random rational frequencies."""
    w = Fraction(int(rng.integers(1, 20)), int(rng.integers(1, 8)))
    v = Fraction(int(rng.integers(1, 20)), int(rng.integers(1, 8)))
    params = FlowParameters.make(w, v)
    word = random_word(rng, 3)
    h0 = free_hamiltonian(params, include_zero_point=bool(rng.integers(0, 2)), max_degree=None)
    t = OperatorPolynomial({word: Fraction(1)}, max_degree=None)
    lhs = commutator(commutator(h0, t), h0)
    return 0.0 if lhs == t.scale(-epsilon(word, params)) else 1.0


PROPERTIES = {
    "commutator vs matrix oracle": (check_matrix_oracle, 1e-12),
    "Jacobi identity": (check_jacobi, 0.0),
    "Hermiticity preservation": (check_hermiticity, 0.0),
    "eigenoperator identity": (check_eigenoperator, 0.0),
}


def run_property(name: str, cases: int, seed: int) -> tuple[int, float]:
    """Number of failing cases and the worst deviation."""
    fn, tol = PROPERTIES[name]
    rng = np.random.default_rng(seed)
    worst, failures = 0.0, 0
    for _ in range(cases):
        dev = fn(rng)
        worst = max(worst, dev)
        failures += dev > tol
    return failures, worst
