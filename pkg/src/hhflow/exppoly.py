"""Exponential polynomials ``sum c * l**p * exp(-gamma * l)``.

Decay rates are exact (``Fraction``) so that the resonant case
``gamma == epsilon`` of the flow integral is decided without rounding.
Magnitudes ``c`` are floats.

The kernels below work on plain dicts ``{(p, G): c}`` where ``G`` is an
integer rate measured in a fixed ``unit`` (true rate ``G * unit``). The
iterative flow uses them directly; :class:`ExpPoly` wraps them with
``Fraction`` rates for everything else.
"""
from __future__ import annotations

import math
import warnings
from fractions import Fraction
from typing import Iterable

import numpy as np

CONDITION_WARN = 1e6


class NearResonanceWarning(RuntimeWarning):
    pass


def integrate_terms(alpha: dict, eps: int, unit: float, out: dict | None = None) -> dict:
    """Solve ``d' = -eps*d + alpha`` with ``d(0) = 0`` on integer-rate terms.

    ``alpha`` maps ``(p, G)`` to ``c``; ``eps`` and ``G`` are in units of ``unit``.
    Results are accumulated into ``out`` when given.
    """
    out = {} if out is None else out
    for (p, g), c in alpha.items():
        if g == eps:
            key = (p + 1, g)
            out[key] = out.get(key, 0.0) + c / (p + 1)
            continue
        mu = (eps - g) * unit
        if abs(1.0 / mu) > CONDITION_WARN:
            warnings.warn(f"near-resonant denominator 1/{mu:.3e} in flow integral",
                          NearResonanceWarning, stacklevel=2)
        inv = 1.0 / mu
        # int_0^l s^p e^{mu s} ds = e^{mu l} sum_j (-1)^j p!/(p-j)! l^(p-j)/mu^(j+1) - (-1)^p p!/mu^(p+1)
        fall = 1.0
        powinv = inv
        for j in range(p + 1):
            key = (p - j, g)
            val = c * fall * powinv * (-1.0 if j % 2 else 1.0)
            out[key] = out.get(key, 0.0) + val
            fall *= p - j
            powinv *= inv
        key = (0, eps)
        tail = c * math.factorial(p) * inv ** (p + 1) * (1.0 if p % 2 else -1.0)
        out[key] = out.get(key, 0.0) + tail
    return out


def integral_to_infinity(terms: dict, unit: float) -> float:
    """``int_0^inf`` of a sum of decaying terms (every ``G > 0``)."""
    total = 0.0
    for (p, g), c in terms.items():
        if g <= 0:
            raise ArithmeticError(f"non-decaying term l^{p} e^(-{g}*{unit} l) in integral to infinity")
        total += c * math.factorial(p) / (g * unit) ** (p + 1)
    return total


def multiply_terms(x: dict, y: dict, scale: float = 1.0, out: dict | None = None) -> dict:
    out = {} if out is None else out
    for (p1, g1), c1 in x.items():
        c1 = c1 * scale
        for (p2, g2), c2 in y.items():
            key = (p1 + p2, g1 + g2)
            out[key] = out.get(key, 0.0) + c1 * c2
    return out


def limit_of_terms(terms: dict, tol: float = 0.0) -> float:
    """Value at ``l -> inf``; raises if a non-decaying ``p > 0`` term survives."""
    value = 0.0
    for (p, g), c in terms.items():
        if g == 0:
            if p == 0:
                value += c
            elif abs(c) > tol:
                raise ArithmeticError(f"divergent term {c} * l^{p} has no finite limit")
    return value


def evaluate_terms(terms: dict, ell, unit: float):
    """Evaluate at ``ell`` (scalar or array)."""
    total = 0.0
    for (p, g), c in terms.items():
        total = total + c * ell ** p * np.exp(-g * unit * ell)
    return total


class ExpPoly:
    """Immutable sum of terms ``c * l**p * exp(-gamma*l)`` keyed by ``(p, gamma)``."""

    __slots__ = ("_terms",)

    def __init__(self, terms: Iterable[tuple[float, int, Fraction]] | dict = ()):
        acc: dict = {}
        items = ((c, p, g) for (p, g), c in terms.items()) if isinstance(terms, dict) else terms
        for c, p, g in items:
            g = Fraction(g)
            if p < 0 or g < 0:
                raise ValueError("power and rate must be non-negative")
            acc[(int(p), g)] = acc.get((int(p), g), 0.0) + float(c)
        self._terms = {k: c for k, c in acc.items() if c != 0.0}

    @classmethod
    def constant(cls, c: float) -> "ExpPoly":
        return cls([(c, 0, 0)])

    @classmethod
    def exponential(cls, c: float, gamma, p: int = 0) -> "ExpPoly":
        return cls([(c, p, gamma)])

    @property
    def terms(self) -> dict:
        return dict(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def __len__(self) -> int:
        return len(self._terms)

    def __eq__(self, other) -> bool:
        if isinstance(other, ExpPoly):
            return self._terms == other._terms
        if isinstance(other, (int, float)) and other == 0:
            return not self._terms
        return NotImplemented

    __hash__ = None

    def __repr__(self) -> str:
        if not self._terms:
            return "ExpPoly(0)"
        return "ExpPoly(" + " + ".join(
            f"{c:.6g}*l^{p}*exp(-{g}l)" for (p, g), c in sorted(self._terms.items())) + ")"

    def __add__(self, other) -> "ExpPoly":
        if isinstance(other, (int, float)):
            other = ExpPoly.constant(other)
        out = dict(self._terms)
        for k, c in other._terms.items():
            out[k] = out.get(k, 0.0) + c
        return ExpPoly(out)

    __radd__ = __add__

    def __neg__(self) -> "ExpPoly":
        return ExpPoly({k: -c for k, c in self._terms.items()})

    def __sub__(self, other) -> "ExpPoly":
        return self + (-other)

    def __mul__(self, other) -> "ExpPoly":
        if isinstance(other, ExpPoly):
            out: dict = {}
            for (p1, g1), c1 in self._terms.items():
                for (p2, g2), c2 in other._terms.items():
                    key = (p1 + p2, g1 + g2)
                    out[key] = out.get(key, 0.0) + c1 * c2
            return ExpPoly(out)
        return ExpPoly({k: c * float(other) for k, c in self._terms.items()})

    __rmul__ = __mul__

    def conjugate(self) -> "ExpPoly":
        return self

    def __abs__(self) -> float:
        return sum(abs(c) for c in self._terms.values())

    def __call__(self, ell):
        return evaluate_terms({(p, float(g)): c for (p, g), c in self._terms.items()}, ell, 1.0)

    def rates(self) -> set[Fraction]:
        return {g for (_, g) in self._terms}

    def has_limit(self) -> bool:
        return all(g > 0 or p == 0 for (p, g) in self._terms)

    def limit(self) -> float:
        return limit_of_terms(self._terms)

    def integral_to_infinity(self) -> float:
        return integral_to_infinity(self._terms, 1.0)

    def _scaled(self) -> tuple[dict, Fraction]:
        den = 1
        for _, g in self._terms:
            den = math.lcm(den, g.denominator)
        unit = Fraction(1, den)
        return {(p, int(g * den)): c for (p, g), c in self._terms.items()}, unit


def exp_poly_integrate(alpha: ExpPoly, eps) -> ExpPoly:
    """Exact solution of ``d' = -eps*d + alpha`` with ``d(0) = 0``.

    A term whose rate equals ``eps`` gains one power of ``l``.
    """
    eps = Fraction(eps)
    if eps < 0:
        raise ValueError("epsilon must be non-negative")
    scaled, unit = alpha._scaled()
    den = math.lcm(unit.denominator, eps.denominator)
    factor = den // unit.denominator
    scaled = {(p, g * factor): c for (p, g), c in scaled.items()}
    eps_int = int(eps * den)
    out = integrate_terms(scaled, eps_int, 1.0 / den)
    return ExpPoly({(p, Fraction(g, den)): c for (p, g), c in out.items()})
