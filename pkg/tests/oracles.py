"""Independent reference computations used by the tests.

None of these go through the package's symbolic machinery: matrices are
built from powers of truncated ladder matrices, energies from textbook
Rayleigh-Schrodinger recursion on a dense Fock matrix, and exponential
polynomials are checked against a Runge-Kutta integration.
"""
from __future__ import annotations

from fractions import Fraction
from math import sqrt

import numpy as np
from scipy.integrate import solve_ivp


def ladder(size: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, size, dtype=float)), 1)


def word_matrix_by_powers(k: int, r: int, size: int) -> np.ndarray:
    a = ladder(size)
    return np.linalg.matrix_power(a.T, k) @ np.linalg.matrix_power(a, r)


def polynomial_matrix(terms: dict, size: int) -> np.ndarray:
    """Two-mode matrix from ``{(k, r, m, n): c}`` with index ``n1*size + n2``."""
    out = np.zeros((size * size, size * size))
    for (k, r, m, n), c in terms.items():
        out += float(c) * np.kron(word_matrix_by_powers(k, r, size), word_matrix_by_powers(m, n, size))
    return out


def interior_indices(size: int, margin: int) -> np.ndarray:
    keep = size - margin
    return np.array([i * size + j for i in range(keep) for j in range(keep)])


def commutator_matrix(p_terms: dict, q_terms: dict, size: int) -> np.ndarray:
    p, q = polynomial_matrix(p_terms, size), polynomial_matrix(q_terms, size)
    return p @ q - q @ p


# ---------------------------------------------------------------------------


def henon_heiles_matrices(w: float, v: float, n_aniso: float, size: int, convention: str = "physical"):
    """``(H0, V)`` with ``H = H0 + lam*V``; ``H0`` includes the zero-point energy.

    ``V`` is built from position matrices, not from normal-ordered words.
    Products are formed on a padded basis and then cut to ``size``, so every
    kept matrix element is exact.
    """
    pad = size + 3
    a = ladder(pad)
    if convention == "physical":
        qa = (a + a.T) / sqrt(2 * w)
        qb = (a + a.T) / sqrt(2 * v)
    else:
        qa = qb = (a + a.T) / sqrt(2)
    qa2, qb3 = (qa @ qa)[:size, :size], (qb @ qb @ qb)[:size, :size]
    qb1 = qb[:size, :size]
    num = np.diag(np.arange(size, dtype=float))
    eye = np.eye(size)
    h0 = w * np.kron(num + 0.5 * eye, eye) + v * np.kron(eye, num + 0.5 * eye)
    return h0, np.kron(qa2, qb1) + n_aniso * np.kron(eye, qb3)


def rayleigh_schrodinger(h0: np.ndarray, vmat: np.ndarray, index: int, K: int) -> list[float]:
    """Energy corrections ``E_0 ... E_K`` of a non-degenerate level (unit coupling)."""
    e0 = np.diag(h0).copy()
    den = e0[index] - e0
    den[index] = np.inf
    energies = [e0[index]]
    psi = [np.eye(len(e0))[index]]
    for n in range(1, K + 1):
        energies.append(float(vmat[index] @ psi[n - 1]))
        rhs = vmat @ psi[n - 1] - sum(energies[j] * psi[n - j] for j in range(1, n + 1))
        nxt = rhs / den
        nxt[index] = 0.0
        psi.append(nxt)
    return energies


def rs_energy_table(w, v, n_aniso, states, K, size=24):
    h0, vmat = henon_heiles_matrices(w, v, n_aniso, size)
    return {s: rayleigh_schrodinger(h0, vmat, s[0] * size + s[1], K) for s in states}


# ---------------------------------------------------------------------------


def rk_linear_decay(alpha, eps: float, ells: np.ndarray) -> np.ndarray:
    """Numerical solution of ``d' = -eps*d + alpha(l)``, ``d(0) = 0``."""
    sol = solve_ivp(lambda l, y: -eps * y + alpha(l), (0.0, float(ells[-1])), [0.0],
                    t_eval=ells, rtol=1e-12, atol=1e-14, method="DOP853")
    return sol.y[0]


def random_fraction(rng, max_num: int = 9, max_den: int = 5) -> Fraction:
    num = int(rng.integers(-max_num, max_num + 1)) or 1
    return Fraction(num, int(rng.integers(1, max_den + 1)))


def random_word(rng, max_power: int = 3) -> tuple:
    return tuple(int(x) for x in rng.integers(0, max_power + 1, size=4))
