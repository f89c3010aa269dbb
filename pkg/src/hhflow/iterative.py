"""Order-by-order flow with the generator ``eta = [H0, H(l)]``.

``H(l) = sum_k lam^k H_k(l)`` with ``H0 = w a†a + v b†b`` fixed and
``H1(0)`` the cubic coupling at unit ``lam``. Every coefficient of every
``H_k`` is an exponential polynomial in ``l``, obtained in closed form from
``d' = -eps_T d + alpha_T``.

Frequencies must be rational. Internally ``omega_T = W_T / den`` with
integer ``W_T``; rates are integers in units of ``1/den**2``, so resonance
tests are integer comparisons.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction

from .algebra import (
    DEFAULT_MAX_DEGREE,
    FlowParameters,
    Monomial,
    OperatorPolynomial,
    SizeLimitError,
    _word_commutator,
    as_fraction,
    cubic_words,
)
from .exppoly import (
    ExpPoly,
    integral_to_infinity,
    integrate_terms,
    limit_of_terms,
    multiply_terms,
)

log = logging.getLogger(__name__)

DEFAULT_TERM_BUDGET = 20000


class TermBudgetError(RuntimeError):
    pass


class DivergentLimitError(ArithmeticError):
    pass


@dataclass(frozen=True)
class RateScale:
    """Integer encoding ``omega = (dk*W + dm*V) / den``."""

    W: int
    V: int
    den: int

    @classmethod
    def of(cls, params: FlowParameters) -> "RateScale":
        w, v = as_fraction(params.w), as_fraction(params.v)
        den = math.lcm(w.denominator, v.denominator)
        return cls(int(w * den), int(v * den), den)

    def omega(self, mono) -> int:
        return (mono[0] - mono[1]) * self.W + (mono[2] - mono[3]) * self.V

    def eps(self, mono) -> int:
        return self.omega(mono) ** 2

    @property
    def unit(self) -> float:
        return 1.0 / self.den ** 2

    @property
    def unit_fraction(self) -> Fraction:
        return Fraction(1, self.den ** 2)


@dataclass
class LambdaSeries:
    """Per-order coefficient functions ``orders[k][mono] -> {(p, G): c}``.

    ``orders[0]`` is ``H0`` (constant). Rates ``G`` are in ``scale.unit``.
    """

    params: FlowParameters
    scale: RateScale
    orders: list = field(default_factory=list)

    @property
    def max_order(self) -> int:
        return len(self.orders) - 1

    def coefficient(self, k: int, mono) -> ExpPoly:
        u = self.scale.unit_fraction
        terms = self.orders[k].get(tuple(mono), {})
        return ExpPoly({(p, g * u): c for (p, g), c in terms.items()})

    def operator(self, k: int) -> OperatorPolynomial:
        """Order ``k`` as a polynomial with :class:`ExpPoly` coefficients."""
        return OperatorPolynomial({m: self.coefficient(k, m) for m in self.orders[k]}, max_degree=None)

    def at(self, k: int, ell: float) -> OperatorPolynomial:
        from .exppoly import evaluate_terms
        unit = self.scale.unit
        return OperatorPolynomial(
            {m: float(evaluate_terms(t, ell, unit)) for m, t in self.orders[k].items()}, max_degree=None)

    def limit(self, k: int) -> OperatorPolynomial:
        out = {}
        for m, t in self.orders[k].items():
            try:
                out[m] = limit_of_terms(t, tol=1e-13)
            except ArithmeticError as exc:
                raise DivergentLimitError(f"order {k}, word {Monomial(*m)}: {exc}") from exc
        return OperatorPolynomial(out, max_degree=None)


def initial_series(params: FlowParameters, convention: str = "physical") -> LambdaSeries:
    """``H0`` and the order-one solution ``c_T exp(-eps_T l)``."""
    scale = RateScale.of(params)
    h0 = {(1, 1, 0, 0): {(0, 0): float(params.w)}, (0, 0, 1, 1): {(0, 0): float(params.v)}}
    h1 = {}
    for mono, c in cubic_words(params.with_lambda(1.0), convention).items():
        h1[tuple(mono)] = {(0, scale.eps(mono)): float(c)}
    return LambdaSeries(params, scale, [h0, h1])


def gustavson_generator(series: LambdaSeries) -> LambdaSeries:
    """``eta_k = [H0, H_k]``: coefficient ``omega_T * delta_T``; resonant words drop out."""
    scale = series.scale
    out = [{}]
    for k in range(1, len(series.orders)):
        eta_k = {}
        for mono, terms in series.orders[k].items():
            om = scale.omega(mono)
            if om:
                f = om / scale.den
                eta_k[mono] = {key: c * f for key, c in terms.items()}
        out.append(eta_k)
    return LambdaSeries(series.params, scale, out)


def _inhomogeneity(series: LambdaSeries, n: int, max_degree: int | None,
                  omegas: set | None = None) -> dict:
    """``alpha`` at order ``n``: sum over ``a+b=n`` of ``[[H0,H_a],H_b]``.

    With ``omegas`` only target words of those (integer) frequencies are built.
    """
    scale = series.scale
    inv_den = 1.0 / scale.den
    alpha: dict = {}
    for a in range(1, n):
        b = n - a
        hb = [(B, dB, scale.omega(B)) for B, dB in series.orders[b].items()]
        for A, dA in series.orders[a].items():
            om = scale.omega(A)
            if not om:
                continue
            f = om * inv_den
            for B, dB, omb in hb:
                if omegas is not None and om + omb not in omegas:
                    continue
                comm = _word_commutator(A, B)
                if not comm:
                    continue
                prod = multiply_terms(dA, dB, f)
                for T, c in comm:
                    if max_degree is not None and sum(T) > max_degree:
                        raise SizeLimitError(f"word {Monomial(*T)} exceeds max_degree={max_degree}")
                    acc = alpha.get(T)
                    if acc is None:
                        acc = alpha[T] = {}
                    for key, val in prod.items():
                        acc[key] = acc.get(key, 0.0) + c * val
    return alpha


def _final_order_limits(series: LambdaSeries, n: int, max_degree: int | None) -> dict:
    """``l -> inf`` values at the last order; only ``eps_T = 0`` words survive."""
    scale = series.scale
    unit = scale.unit
    inv_den = 1.0 / scale.den
    out: dict = {}
    for a in range(1, n):
        b = n - a
        hb = list(series.orders[b].items())
        for A, dA in series.orders[a].items():
            om = scale.omega(A)
            if not om:
                continue
            f = om * inv_den
            for B, dB in hb:
                if scale.omega(B) != -om:
                    continue
                comm = _word_commutator(A, B)
                if not comm:
                    continue
                s = None
                for T, c in comm:
                    if max_degree is not None and sum(T) > max_degree:
                        raise SizeLimitError(f"word {Monomial(*T)} exceeds max_degree={max_degree}")
                    if s is None:
                        s = f * _product_integral(dA, dB, unit)
                    out[T] = out.get(T, 0.0) + c * s
    return out


def _product_integral(x: dict, y: dict, unit: float) -> float:
    total = 0.0
    for (p1, g1), c1 in x.items():
        for (p2, g2), c2 in y.items():
            p = p1 + p2
            g = g1 + g2
            if g <= 0:
                raise DivergentLimitError("non-decaying inhomogeneity term")
            total += c1 * c2 * math.factorial(p) / (g * unit) ** (p + 1)
    return total


@dataclass
class IterativeResult:
    """Outcome of :func:`iterate_flow`.

    ``series`` holds full ``l``-dependence for orders ``0..series.max_order``;
    ``limits[k]`` is ``H_k(inf)`` for ``k = 0..K`` (unit coupling).
    """

    params: FlowParameters
    K: int
    series: LambdaSeries
    limits: list

    def normal_form(self, lam: float | None = None, include_zero_point: bool = True,
                    max_order: int | None = None) -> OperatorPolynomial:
        lam = self.params.lam if lam is None else lam
        K = self.K if max_order is None else max_order
        out = OperatorPolynomial.constant(self.params.zero_point, max_degree=None) if include_zero_point \
            else OperatorPolynomial({}, max_degree=None)
        for k in range(K + 1):
            out = out + self.limits[k].scale(lam ** k)
        return out

    def diagonal_form(self, lam: float | None = None, **kw) -> OperatorPolynomial:
        nf = self.normal_form(lam, **kw)
        return OperatorPolynomial({m: c for m, c in nf.items() if m.is_diagonal}, max_degree=None)


def iterate_flow(params: FlowParameters, K: int, convention: str = "physical",
                 full: bool = False, max_terms: int = DEFAULT_TERM_BUDGET,
                 max_degree: int | None = DEFAULT_MAX_DEGREE,
                 check_decay: bool = True) -> IterativeResult:
    """Solve the flow to order ``K`` and take ``l -> inf``.

    With ``full=False`` the last order is reduced to its limit directly (only
    resonant and diagonal words survive there) and order ``K-1`` keeps only
    the words that limit needs, which is much cheaper. Pass ``full=True``
    when the generator is needed at every order up to ``K``.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    series = initial_series(params, convention)
    scale = series.scale
    unit = scale.unit
    limits = [series.limit(0), series.limit(1)]
    for n in range(2, K + 1):
        if n == K and not full:
            lim = _final_order_limits(series, n, max_degree)
            limits.append(OperatorPolynomial(lim, max_degree=None))
            break
        # the final limit pairs order K-1 only with order-1 words of opposite
        # frequency; frequency-zero words are kept for the order's own limit
        omegas = None
        if not full and n == K - 1:
            omegas = {-scale.omega(m) for m in series.orders[1]} | {0}
        alpha = _inhomogeneity(series, n, max_degree, omegas)
        hn = {}
        for T, terms in alpha.items():
            if check_decay and any(g <= 0 for (_, g) in terms):
                bad = [(p, g) for (p, g) in terms if g <= 0]
                raise DivergentLimitError(f"order {n}, word {Monomial(*T)}: non-decaying inhomogeneity {bad}")
            sol = integrate_terms(terms, scale.eps(T), unit)
            sol = {key: c for key, c in sol.items() if c != 0.0}
            if sol:
                hn[T] = sol
        if len(hn) > max_terms:
            raise TermBudgetError(f"order {n} has {len(hn)} words > budget {max_terms}")
        series.orders.append(hn)
        limits.append(series.limit(n))
        log.debug("order %d: %d words, %d exp-terms", n, len(hn), sum(len(t) for t in hn.values()))
    return IterativeResult(params, K, series, limits)


def resonant_residue(result: IterativeResult, lam: float | None = None) -> OperatorPolynomial:
    """Off-diagonal words surviving at ``l = inf`` (all have ``eps = 0``)."""
    nf = result.normal_form(lam, include_zero_point=False)
    return OperatorPolynomial({m: c for m, c in nf.items() if not m.is_diagonal}, max_degree=None)
