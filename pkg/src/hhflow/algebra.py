"""Normal-ordered algebra of two bosonic modes ``a`` and ``b``.

A word ``a†^k a^r b†^m b^n`` is stored as the tuple ``(k, r, m, n)``.
Polynomials map words to coefficients. The coefficient type is left open:
``Fraction`` for exact work, ``float``/``complex`` for numerics, or any
object supporting ``+``, ``-``, ``*`` with scalars.
"""
from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Iterator, Mapping, NamedTuple

import numpy as np

DEFAULT_MAX_DEGREE = 12


class SizeLimitError(ValueError):
    """A normal-ordered word exceeds the configured maximum degree."""


class Monomial(NamedTuple):
    k: int  # a† power
    r: int  # a power
    m: int  # b† power
    n: int  # b power

    @property
    def degree(self) -> int:
        return self.k + self.r + self.m + self.n

    @property
    def grading(self) -> tuple[int, int]:
        return (self.k - self.r, self.m - self.n)

    @property
    def is_diagonal(self) -> bool:
        return self.k == self.r and self.m == self.n

    def dagger(self) -> "Monomial":
        return Monomial(self.r, self.k, self.n, self.m)

    def __str__(self) -> str:
        parts = []
        for sym, e in (("a†", self.k), ("a", self.r), ("b†", self.m), ("b", self.n)):
            if e == 1:
                parts.append(sym)
            elif e > 1:
                parts.append(f"{sym}^{e}")
        return " ".join(parts) or "1"


ONE = Monomial(0, 0, 0, 0)


@lru_cache(maxsize=None)
def _single_mode_product(k1: int, r1: int, k2: int, r2: int) -> tuple[tuple[int, int, int], ...]:
    # c†^k1 c^r1 c†^k2 c^r2 = sum_j C(r1,j) C(k2,j) j! c†^(k1+k2-j) c^(r1+r2-j)
    out = []
    for j in range(min(r1, k2) + 1):
        c = math.comb(r1, j) * math.comb(k2, j) * math.factorial(j)
        out.append((k1 + k2 - j, r1 + r2 - j, c))
    return tuple(out)


@lru_cache(maxsize=None)
def _word_product(left: tuple, right: tuple) -> tuple[tuple[tuple[int, int, int, int], int], ...]:
    pa = _single_mode_product(left[0], left[1], right[0], right[1])
    pb = _single_mode_product(left[2], left[3], right[2], right[3])
    return tuple(((ka, ra, kb, rb), ca * cb) for ka, ra, ca in pa for kb, rb, cb in pb)


@lru_cache(maxsize=None)
def _word_commutator(left: tuple, right: tuple) -> tuple[tuple[tuple[int, int, int, int], int], ...]:
    acc: dict = {}
    for mono, c in _word_product(left, right):
        acc[mono] = acc.get(mono, 0) + c
    for mono, c in _word_product(right, left):
        acc[mono] = acc.get(mono, 0) - c
    return tuple((mono, c) for mono, c in acc.items() if c != 0)


def _check_degree(mono: tuple, max_degree: int | None) -> None:
    if max_degree is not None and sum(mono) > max_degree:
        raise SizeLimitError(
            f"word {Monomial(*mono)} has degree {sum(mono)} > max_degree={max_degree}"
        )


def normal_order(left: Iterable[int], right: Iterable[int],
                 max_degree: int | None = DEFAULT_MAX_DEGREE) -> "OperatorPolynomial":
    """Normal-ordered expansion of the product ``left * right`` with integer coefficients."""
    left, right = tuple(left), tuple(right)
    terms = {}
    for mono, c in _word_product(left, right):
        _check_degree(mono, max_degree)
        terms[Monomial(*mono)] = Fraction(c)
    return OperatorPolynomial(terms, max_degree=max_degree)


def _is_zero(c) -> bool:
    if isinstance(c, (int, float, complex, Fraction)):
        return c == 0
    is_zero = getattr(c, "is_zero", None)
    if is_zero is not None:
        return is_zero()
    return c == 0


class OperatorPolynomial:
    """Finite linear combination of normal-ordered two-mode words.

    Treated as an immutable value. Zero coefficients are never stored.
    """

    __slots__ = ("_terms", "max_degree")

    def __init__(self, terms: Mapping | Iterable = (), max_degree: int | None = DEFAULT_MAX_DEGREE):
        items = terms.items() if isinstance(terms, Mapping) else terms
        clean = {}
        for mono, c in items:
            mono = Monomial(*mono)
            if min(mono) < 0:
                raise ValueError(f"negative exponent in {tuple(mono)}")
            _check_degree(mono, max_degree)
            if mono in clean:
                c = clean[mono] + c
            if _is_zero(c):
                clean.pop(mono, None)
            else:
                clean[mono] = c
        self._terms = clean
        self.max_degree = max_degree

    # construction helpers
    @classmethod
    def monomial(cls, k=0, r=0, m=0, n=0, coeff=Fraction(1), **kw) -> "OperatorPolynomial":
        return cls({Monomial(k, r, m, n): coeff}, **kw)

    @classmethod
    def constant(cls, c, **kw) -> "OperatorPolynomial":
        return cls({ONE: c}, **kw)

    @property
    def terms(self) -> dict:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def __iter__(self) -> Iterator[Monomial]:
        return iter(self._terms)

    def __len__(self) -> int:
        return len(self._terms)

    def __bool__(self) -> bool:
        return bool(self._terms)

    def __getitem__(self, mono) -> object:
        return self._terms.get(Monomial(*mono), 0)

    def __contains__(self, mono) -> bool:
        return Monomial(*mono) in self._terms

    def __eq__(self, other) -> bool:
        if isinstance(other, OperatorPolynomial):
            return self._terms == other._terms
        if other == 0:
            return not self._terms
        return NotImplemented

    __hash__ = None

    def __repr__(self) -> str:
        if not self._terms:
            return "OperatorPolynomial(0)"
        body = " + ".join(f"({c})*{m}" for m, c in sorted(self._terms.items()))
        return f"OperatorPolynomial({body})"

    # linear structure
    def __add__(self, other: "OperatorPolynomial") -> "OperatorPolynomial":
        if not isinstance(other, OperatorPolynomial):
            return NotImplemented
        out = dict(self._terms)
        for mono, c in other._terms.items():
            out[mono] = out[mono] + c if mono in out else c
        return OperatorPolynomial(out, max_degree=self._merge_limit(other))

    def __neg__(self) -> "OperatorPolynomial":
        return OperatorPolynomial({m: -c for m, c in self._terms.items()}, max_degree=self.max_degree)

    def __sub__(self, other: "OperatorPolynomial") -> "OperatorPolynomial":
        if not isinstance(other, OperatorPolynomial):
            return NotImplemented
        return self + (-other)

    def scale(self, s) -> "OperatorPolynomial":
        return OperatorPolynomial({m: c * s for m, c in self._terms.items()}, max_degree=self.max_degree)

    def __mul__(self, other):
        if isinstance(other, OperatorPolynomial):
            return self.product(other)
        return self.scale(other)

    def __rmul__(self, other):
        return self.scale(other)

    def _merge_limit(self, other: "OperatorPolynomial") -> int | None:
        if self.max_degree is None:
            return other.max_degree
        if other.max_degree is None:
            return self.max_degree
        return max(self.max_degree, other.max_degree)

    def product(self, other: "OperatorPolynomial") -> "OperatorPolynomial":
        limit = self._merge_limit(other)
        out: dict = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                for mono, c in _word_product(m1, m2):
                    _check_degree(mono, limit)
                    v = c1 * c2 * c
                    out[mono] = out[mono] + v if mono in out else v
        return OperatorPolynomial(out, max_degree=limit)

    def map_coefficients(self, fn: Callable) -> "OperatorPolynomial":
        return OperatorPolynomial({m: fn(c) for m, c in self._terms.items()}, max_degree=self.max_degree)

    def dagger(self, conj: Callable = None) -> "OperatorPolynomial":
        conj = conj or _conjugate
        return OperatorPolynomial({m.dagger(): conj(c) for m, c in self._terms.items()},
                                  max_degree=self.max_degree)

    def is_hermitian(self, tol: float = 0.0) -> bool:
        for mono, c in self._terms.items():
            partner = self._terms.get(mono.dagger(), 0)
            if abs(c - _conjugate(partner)) > tol:
                return False
        return True

    def is_antihermitian(self, tol: float = 0.0) -> bool:
        for mono, c in self._terms.items():
            partner = self._terms.get(mono.dagger(), 0)
            if abs(c + _conjugate(partner)) > tol:
                return False
        return True

    def is_diagonal(self) -> bool:
        return all(m.is_diagonal for m in self._terms)

    def degree(self) -> int:
        return max((m.degree for m in self._terms), default=0)

    def gradings(self) -> set[tuple[int, int]]:
        return {m.grading for m in self._terms}


def _conjugate(c):
    conj = getattr(c, "conjugate", None)
    return conj() if conj is not None else c


def commutator(p: OperatorPolynomial, q: OperatorPolynomial) -> OperatorPolynomial:
    """Normal-ordered ``pq - qp``."""
    limit = p._merge_limit(q)
    out: dict = {}
    for m1, c1 in p.items():
        for m2, c2 in q.items():
            for mono, c in _word_commutator(m1, m2):
                _check_degree(mono, limit)
                v = c1 * c2 * c
                out[mono] = out[mono] + v if mono in out else v
    return OperatorPolynomial(out, max_degree=limit)


def split_diagonal(p: OperatorPolynomial) -> tuple[OperatorPolynomial, OperatorPolynomial]:
    diag = {m: c for m, c in p.items() if m.is_diagonal}
    rest = {m: c for m, c in p.items() if not m.is_diagonal}
    return (OperatorPolynomial(diag, max_degree=p.max_degree),
            OperatorPolynomial(rest, max_degree=p.max_degree))


# ---------------------------------------------------------------------------
# Parameters, frequencies and the Hamiltonian


def as_fraction(x) -> Fraction:
    """Exact rational for a user-facing number; floats go through their repr."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(str(x))


class FlowParameters(NamedTuple):
    """Frequencies ``w``, ``v`` (exact rationals), coupling and anisotropy.

    ``lam`` and ``n_aniso`` refer to the classical potential
    ``V = w²q1²/2 + v²q2²/2 + lam*q2*(q1² + n_aniso*q2²)``.
    """

    w: Fraction = Fraction(13, 10)
    v: Fraction = Fraction(7, 10)
    lam: float = -0.1
    n_aniso: float = 0.1

    @classmethod
    def make(cls, w=Fraction(13, 10), v=Fraction(7, 10), lam=-0.1, n_aniso=0.1) -> "FlowParameters":
        w, v = as_fraction(w), as_fraction(v)
        if w <= 0 or v <= 0:
            raise ValueError("frequencies must be positive")
        lam, n_aniso = float(lam), float(n_aniso)
        if not (math.isfinite(lam) and math.isfinite(n_aniso)):
            raise ValueError("lam and n_aniso must be finite")
        return cls(w, v, lam, n_aniso)

    def with_lambda(self, lam) -> "FlowParameters":
        return self._replace(lam=float(lam))

    @property
    def zero_point(self) -> float:
        return float(self.w + self.v) / 2


def eigenfrequency(mono: Iterable[int], params: FlowParameters) -> Fraction:
    """``(k-r) w + (m-n) v``: the eigenvalue of ``T -> [H0, T]`` on the word."""
    k, r, m, n = mono
    return (k - r) * as_fraction(params.w) + (m - n) * as_fraction(params.v)


def epsilon(mono: Iterable[int], params: FlowParameters) -> Fraction:
    return eigenfrequency(mono, params) ** 2


def coupling_constants(params: FlowParameters, convention: str = "physical") -> tuple[float, float]:
    """Operator couplings ``(g_a, g_b)`` of ``(b†+b)(a†+a)²`` and ``(b†+b)³``.

    ``physical``: potential written in mass-weighted coordinates with
    frequencies ``w``, ``v``, so ``q1 = (a+a†)/sqrt(2w)``, ``q2 = (b+b†)/sqrt(2v)``.
    ``symmetric``: ``q = (a+a†)/sqrt(2)`` for both modes, ``g_a = lam/(2*sqrt(2))``.
    """
    lam, n = params.lam, params.n_aniso
    w, v = float(params.w), float(params.v)
    if convention == "physical":
        return lam / (2.0 * w * math.sqrt(2.0 * v)), lam * n / (2.0 * v) ** 1.5
    if convention == "symmetric":
        g = lam / (2.0 * math.sqrt(2.0))
        return g, g * n
    raise ValueError(f"unknown coupling convention {convention!r}")


def free_hamiltonian(params: FlowParameters, include_zero_point: bool = False,
                     max_degree: int | None = DEFAULT_MAX_DEGREE) -> OperatorPolynomial:
    w, v = as_fraction(params.w), as_fraction(params.v)
    terms = {Monomial(1, 1, 0, 0): w, Monomial(0, 0, 1, 1): v}
    if include_zero_point:
        terms[ONE] = (w + v) / 2
    return OperatorPolynomial(terms, max_degree=max_degree)


def cubic_words(params: FlowParameters, convention: str = "physical") -> OperatorPolynomial:
    """Normal-ordered ``g_a (b†+b)(a†+a)² + g_b (b†+b)³`` with float coefficients."""
    g_a, g_b = coupling_constants(params, convention)
    qa = OperatorPolynomial({(1, 0, 0, 0): 1, (0, 1, 0, 0): 1}, max_degree=None)
    qb = OperatorPolynomial({(0, 0, 1, 0): 1, (0, 0, 0, 1): 1}, max_degree=None)
    shape = qb.product(qa).product(qa).scale(g_a) + qb.product(qb).product(qb).scale(g_b)
    return OperatorPolynomial(shape.items())


def build_henon_heiles(params: FlowParameters, include_zero_point: bool = True,
                       convention: str = "physical") -> OperatorPolynomial:
    """Quantized Hénon–Heiles Hamiltonian in normal order.

    The quadratic part keeps exact rational coefficients; the cubic part is
    float (its couplings involve square roots).
    """
    return free_hamiltonian(params, include_zero_point) + cubic_words(params, convention)


# ---------------------------------------------------------------------------
# Dense representation


def ladder_matrix(size: int) -> np.ndarray:
    """Truncated annihilation operator, ``a|n> = sqrt(n)|n-1>``."""
    return np.diag(np.sqrt(np.arange(1, size, dtype=float)), 1)


def _word_matrix(k: int, r: int, size: int) -> np.ndarray:
    # exact matrix elements of c†^k c^r on the truncated space (no truncation
    # error from intermediate states, unlike multiplying truncated ladders)
    out = np.zeros((size, size))
    for j in range(r, size):
        i = j - r + k
        if i < size:
            out[i, j] = math.sqrt(math.perm(j, r) * math.perm(i, k))
    return out


MAX_DIMENSION = 4096


def matrix_representation(p: OperatorPolynomial, n1: int, n2: int,
                          max_dimension: int = MAX_DIMENSION) -> np.ndarray:
    """Matrix of ``p`` in the product basis ``|n1, n2>`` with index ``n1*N2 + n2``."""
    if n1 < 1 or n2 < 1:
        raise ValueError("basis sizes must be >= 1")
    if n1 * n2 > max_dimension:
        raise ValueError(f"dimension {n1 * n2} exceeds cap {max_dimension}")
    complex_coeffs = any(isinstance(c, complex) for _, c in p.items())
    out = np.zeros((n1 * n2, n1 * n2), dtype=complex if complex_coeffs else float)
    cache_a: dict = {}
    cache_b: dict = {}
    for (k, r, m, n), c in p.items():
        if (k, r) not in cache_a:
            cache_a[k, r] = _word_matrix(k, r, n1)
        if (m, n) not in cache_b:
            cache_b[m, n] = _word_matrix(m, n, n2)
        out += complex(c) * np.kron(cache_a[k, r], cache_b[m, n]) if complex_coeffs else \
            float(c) * np.kron(cache_a[k, r], cache_b[m, n])
    return out


# ---------------------------------------------------------------------------
# Text serialization: one "k r m n  coeff" line per term


def format_coefficient(c) -> str:
    if isinstance(c, Fraction):
        return f"{c.numerator}/{c.denominator}" if c.denominator != 1 else f"{c.numerator}"
    if isinstance(c, int):
        return str(c)
    if isinstance(c, complex):
        return repr(c)
    return repr(float(c))


def parse_coefficient(text: str):
    text = text.strip()
    if "j" in text:
        return complex(text)
    if any(ch in text for ch in ".eE") or text.lower() in ("nan", "inf", "-inf"):
        return float(text)
    return Fraction(text)


def dumps(p: OperatorPolynomial) -> str:
    lines = [f"{k} {r} {m} {n}  {format_coefficient(c)}" for (k, r, m, n), c in sorted(p.items())]
    return "\n".join(lines) + ("\n" if lines else "")


def loads(text: str, max_degree: int | None = DEFAULT_MAX_DEGREE) -> OperatorPolynomial:
    terms = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 5:
            raise ValueError(f"line {lineno}: expected 'k r m n coeff', got {line!r}")
        mono = tuple(int(f) for f in fields[:4])
        terms.append((mono, parse_coefficient(fields[4])))
    return OperatorPolynomial(terms, max_degree=max_degree)
