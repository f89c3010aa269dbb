"""Time evolution in the frame where the Hamiltonian is diagonal.

Any operator ``O`` follows ``dO/dl = [eta(l), O]`` under the same generator
as the Hamiltonian; at ``l = inf`` it becomes a coupling series
``O + lam*O_1 + lam**2*O_2 + ...``. In that frame the Fock states
``|n1, n2>`` are the exact eigenstates, with energies read off the normal
form. A bare state is carried over by solving ``a(inf)|0> = b(inf)|0> = 0``
order by order and applying the transformed creation operators.

States are stored sparsely, one ``{(n1, n2): c}`` dict per coupling order
(unit coupling). Every coefficient is real because the generator is.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .algebra import FlowParameters, Monomial, OperatorPolynomial, _word_commutator
from .exppoly import integrate_terms, limit_of_terms, multiply_terms
from .iterative import DivergentLimitError, IterativeResult, gustavson_generator, iterate_flow
from .spectrum import _word_on_state, eigenvalue_from_normal_form

DEFAULT_WINDOW = 32
DEFAULT_ENERGY_ORDER = 10


class SupportOverflowError(ValueError):
    """A dressed state reaches beyond the configured Fock window."""


class VacuumSolveError(ArithmeticError):
    """The vacuum conditions are inconsistent at some order."""


# ---------------------------------------------------------------------------
# Operators


@dataclass
class OperatorSeries:
    """``sum_j lam**j * orders[j]`` with unit-coupling polynomials."""

    params: FlowParameters
    orders: list
    flow: IterativeResult | None = None

    @property
    def K(self) -> int:
        return len(self.orders) - 1

    def at(self, lam: float | None = None, max_order: int | None = None) -> OperatorPolynomial:
        lam = self.params.lam if lam is None else lam
        top = self.K if max_order is None else min(max_order, self.K)
        out = OperatorPolynomial({}, max_degree=None)
        for j in range(top + 1):
            out = out + self.orders[j].scale(lam ** j)
        return out

    def dagger(self) -> "OperatorSeries":
        return OperatorSeries(self.params, [p.dagger() for p in self.orders], self.flow)


def dynamics_flow(params: FlowParameters, K: int, convention: str = "physical") -> IterativeResult:
    """Iterative flow with full ``l`` dependence up to order ``K``."""
    return iterate_flow(params, K, convention, full=True)


def transform_polynomial(poly: OperatorPolynomial, flow: IterativeResult, K: int | None = None) -> OperatorSeries:
    """Flow ``poly`` to ``l = inf`` under the generator of ``flow``."""
    K = flow.series.max_order if K is None else K
    if K > flow.series.max_order:
        raise ValueError(f"flow carries orders up to {flow.series.max_order}, need {K}")
    eta = gustavson_generator(flow.series).orders
    unit = flow.series.scale.unit
    current = [{tuple(m): {(0, 0): float(c)} for m, c in poly.items()}]
    for j in range(1, K + 1):
        alpha: dict = {}
        for k in range(1, j + 1):
            for E, te in eta[k].items():
                for O, to in current[j - k].items():
                    comm = _word_commutator(E, O)
                    if not comm:
                        continue
                    prod = multiply_terms(te, to)
                    for T, c in comm:
                        acc = alpha.setdefault(T, {})
                        for key, val in prod.items():
                            acc[key] = acc.get(key, 0.0) + c * val
        order_j = {}
        for T, terms in alpha.items():
            if any(g <= 0 for _, g in terms):
                raise DivergentLimitError(f"order {j}, word {Monomial(*T)}: non-decaying generator term")
            sol = {key: c for key, c in integrate_terms(terms, 0, unit).items() if c != 0.0}
            if sol:
                order_j[T] = sol
        current.append(order_j)
    orders = []
    for j, layer in enumerate(current):
        vals = {}
        for T, terms in layer.items():
            try:
                vals[T] = limit_of_terms(terms, tol=1e-13)
            except ArithmeticError as exc:
                raise DivergentLimitError(f"order {j}, word {Monomial(*T)}: {exc}") from exc
        orders.append(OperatorPolynomial(vals, max_degree=None))
    return OperatorSeries(flow.params, orders, flow)


def transform_operator(which: str, params: FlowParameters, K: int, flow: IterativeResult | None = None,
                       convention: str = "physical") -> OperatorSeries:
    """``a(inf)`` or ``b(inf)`` as a coupling series through order ``K``."""
    words = {"a": (0, 1, 0, 0), "b": (0, 0, 0, 1)}
    if which not in words:
        raise ValueError("which must be 'a' or 'b'")
    flow = dynamics_flow(params, K, convention) if flow is None else flow
    return transform_polynomial(OperatorPolynomial({words[which]: 1.0}, max_degree=None), flow, K)


# ---------------------------------------------------------------------------
# States


def apply_polynomial(poly: OperatorPolynomial, state: dict) -> dict:
    out: dict = {}
    for (k, r, m, n), c in poly.items():
        for (n1, n2), s in state.items():
            hit = _word_on_state(k, r, m, n, n1, n2)
            if hit is not None:
                out[hit[0]] = out.get(hit[0], 0.0) + float(c) * s * hit[1]
    return out


def _add_into(acc: dict, vec: dict, scale: float = 1.0) -> None:
    for key, val in vec.items():
        acc[key] = acc.get(key, 0.0) + scale * val


def _dot(x: dict, y: dict) -> float:
    if len(y) < len(x):
        x, y = y, x
    return sum(v * y[k] for k, v in x.items() if k in y)


def _check_window(vec: dict, window: int | None, what: str) -> None:
    if window is None:
        return
    for n1, n2 in vec:
        if n1 >= window or n2 >= window:
            raise SupportOverflowError(f"{what} reaches |{n1},{n2}> outside the {window}x{window} window")


@dataclass
class DressedState:
    """Coupling series of eigenbasis coefficients: ``orders[i][(n1, n2)]``."""

    params: FlowParameters
    orders: list
    a_inf: OperatorSeries | None = None
    b_inf: OperatorSeries | None = None
    window: int | None = DEFAULT_WINDOW
    label: str = field(default="")

    @property
    def K(self) -> int:
        return len(self.orders) - 1

    def coefficients(self, lam: float | None = None) -> dict:
        lam = self.params.lam if lam is None else lam
        out: dict = {}
        for i, vec in enumerate(self.orders):
            _add_into(out, vec, lam ** i)
        return out

    def norm_series(self) -> list[float]:
        """Coefficients of ``<c|c>`` in powers of the coupling, through order ``K``."""
        return [sum(_dot(self.orders[i], self.orders[n - i]) for i in range(n + 1)) for n in range(self.K + 1)]

    def support(self) -> set:
        return set().union(*[set(v) for v in self.orders])


def apply_series(op: OperatorSeries, state: DressedState, K: int | None = None) -> list:
    K = state.K if K is None else K
    out = []
    for n in range(K + 1):
        acc: dict = {}
        for j in range(min(n, op.K) + 1):
            if n - j < len(state.orders):
                _add_into(acc, apply_polynomial(op.orders[j], state.orders[n - j]))
        out.append(acc)
    return out


def solve_vacuum(a_inf: OperatorSeries, b_inf: OperatorSeries, K: int | None = None,
                 window: int | None = DEFAULT_WINDOW, tol: float = 1e-9) -> DressedState:
    """State annihilated by ``a(inf)`` and ``b(inf)`` with unit norm, order by order.

    ``a c_i = r`` fixes every component with ``n1 >= 1``; ``b c_i = s`` fixes
    ``n1 = 0, n2 >= 1``; normalization fixes ``|0,0>``. The remaining
    ``b`` equations must then hold, which is checked.
    """
    K = min(a_inf.K, b_inf.K) if K is None else K
    if K > min(a_inf.K, b_inf.K):
        raise ValueError("operator series are shorter than the requested order")
    orders = [{(0, 0): 1.0}]
    for i in range(1, K + 1):
        ra: dict = {}
        rb: dict = {}
        for j in range(1, i + 1):
            _add_into(ra, apply_polynomial(a_inf.orders[j], orders[i - j]), -1.0)
            _add_into(rb, apply_polynomial(b_inf.orders[j], orders[i - j]), -1.0)
        c: dict = {}
        for (n1, n2), val in ra.items():
            c[(n1 + 1, n2)] = val / math.sqrt(n1 + 1)
        for (n1, n2), val in rb.items():
            if n1 == 0:
                c[(0, n2 + 1)] = val / math.sqrt(n2 + 1)
        c00 = -0.5 * sum(_dot(orders[j], orders[i - j]) for j in range(1, i))
        if c00:
            c[(0, 0)] = c00
        c = {key: v for key, v in c.items() if v != 0.0}
        check = apply_polynomial(OperatorPolynomial({(0, 0, 0, 1): 1.0}, max_degree=None), c)
        scale = max([abs(v) for v in rb.values()] + [1.0])
        keys = set(check) | set(rb)
        worst = max((abs(check.get(q, 0.0) - rb.get(q, 0.0)) for q in keys), default=0.0)
        if worst > tol * scale:
            raise VacuumSolveError(f"vacuum conditions inconsistent at order {i} (mismatch {worst:.3e})")
        _check_window(c, window, f"vacuum order {i}")
        orders.append(c)
    return DressedState(a_inf.params, orders, a_inf, b_inf, window, "0")


def excited_state(k: int, m: int, vacuum: DressedState) -> DressedState:
    """``a†(inf)^k b†(inf)^m |0> / sqrt(k! m!)`` through the vacuum's order."""
    if k < 0 or m < 0:
        raise ValueError("occupation numbers must be non-negative")
    if vacuum.a_inf is None or vacuum.b_inf is None:
        raise ValueError("vacuum does not carry its transformed operators")
    ad, bd = vacuum.a_inf.dagger(), vacuum.b_inf.dagger()
    state = vacuum
    for op in [ad] * k + [bd] * m:
        orders = apply_series(op, state)
        for i, vec in enumerate(orders):
            _check_window(vec, vacuum.window, f"excited state ({k},{m}) order {i}")
        state = DressedState(vacuum.params, orders, vacuum.a_inf, vacuum.b_inf, vacuum.window)
    norm = 1.0 / math.sqrt(math.factorial(k) * math.factorial(m))
    orders = [{key: v * norm for key, v in vec.items() if v != 0.0} for vec in state.orders]
    return DressedState(vacuum.params, orders, vacuum.a_inf, vacuum.b_inf, vacuum.window, f"{k},{m}")


# ---------------------------------------------------------------------------
# Amplitudes and observables


@dataclass
class AmplitudeSum:
    """``f(t) = sum_k a_k lam**b_k exp(i E_k t)``."""

    lam: float
    coeffs: np.ndarray
    powers: np.ndarray
    energies: np.ndarray

    @property
    def terms(self) -> list:
        return list(zip(self.coeffs.tolist(), self.powers.tolist(), self.energies.tolist()))

    def weights(self) -> np.ndarray:
        return self.coeffs * self.lam ** self.powers.astype(float)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if not len(self.coeffs):
            return np.zeros(t.shape, dtype=complex)
        return np.exp(1j * np.multiply.outer(t, self.energies)) @ self.weights()

    def bound(self) -> float:
        return float(np.sum(np.abs(self.weights())))

    def is_identically_zero(self) -> bool:
        return not np.any(self.coeffs)


def _energy_lookup(normal_form: OperatorPolynomial):
    diag = OperatorPolynomial({m: c for m, c in normal_form.items() if m.is_diagonal}, max_degree=None)
    cache: dict = {}

    def energy(state):
        if state not in cache:
            cache[state] = eigenvalue_from_normal_form(diag, *state)
        return cache[state]
    return energy


def transition_amplitude(alpha: DressedState, beta: DressedState, normal_form: OperatorPolynomial,
                         K: int | None = None, lam: float | None = None) -> AmplitudeSum:
    """``<beta| exp(iHt) |alpha>`` with coupling powers truncated at ``K``.

    ``normal_form`` supplies the energies and must be evaluated at the same
    coupling ``lam`` (default: the state's own).
    """
    K = min(alpha.K, beta.K) if K is None else K
    energy = _energy_lookup(normal_form)
    acc: dict = {}
    for i, va in enumerate(alpha.orders):
        for j, vb in enumerate(beta.orders):
            if i + j > K:
                continue
            for s, ca in va.items():
                cb = vb.get(s)
                if cb is not None:
                    key = (i + j, s)
                    acc[key] = acc.get(key, 0.0) + ca * cb
    keys = sorted(k for k, v in acc.items() if v != 0.0)
    return AmplitudeSum(
        float(alpha.params.lam if lam is None else lam),
        np.array([acc[k] for k in keys], dtype=float),
        np.array([k[0] for k in keys], dtype=int),
        np.array([energy(k[1]) for k in keys], dtype=float))


def completeness_residual(alpha: DressedState, betas: list, t, normal_form: OperatorPolynomial,
                          lam: float | None = None) -> np.ndarray:
    """``1 - sum_beta |f_beta(t)|**2``."""
    total = 0.0
    for beta in betas:
        total = total + np.abs(transition_amplitude(alpha, beta, normal_form, lam=lam)(t)) ** 2
    return 1.0 - total


def position_squared(mode: str = "a") -> OperatorPolynomial:
    """``q**2`` with ``q = (c† + c)/sqrt(2)`` for mode ``c``."""
    if mode == "a":
        words = {(2, 0, 0, 0): 0.5, (0, 2, 0, 0): 0.5, (1, 1, 0, 0): 1.0, (0, 0, 0, 0): 0.5}
    elif mode == "b":
        words = {(0, 0, 2, 0): 0.5, (0, 0, 0, 2): 0.5, (0, 0, 1, 1): 1.0, (0, 0, 0, 0): 0.5}
    else:
        raise ValueError("mode must be 'a' or 'b'")
    return OperatorPolynomial(words, max_degree=None)


def expectation_observable(obs: OperatorPolynomial, alpha: DressedState, t, normal_form: OperatorPolynomial,
                           transformed: OperatorSeries | None = None, imag_tol: float = 1e-10,
                           lam: float | None = None) -> np.ndarray:
    """``<alpha| exp(-iHt) obs exp(iHt) |alpha>`` through the state's order."""
    K = alpha.K
    if transformed is None:
        if alpha.a_inf is None or alpha.a_inf.flow is None:
            raise ValueError("state carries no flow; pass the transformed observable")
        transformed = transform_polynomial(obs, alpha.a_inf.flow, K)
    energy = _energy_lookup(normal_form)
    lam = float(alpha.params.lam if lam is None else lam)
    acc: dict = {}
    for j in range(min(K, transformed.K) + 1):
        for i2, v2 in enumerate(alpha.orders):
            if j + i2 > K:
                continue
            for s2, c2 in v2.items():
                image = apply_polynomial(transformed.orders[j], {s2: 1.0})
                for i1, v1 in enumerate(alpha.orders):
                    p = i1 + j + i2
                    if p > K:
                        continue
                    for s1, m in image.items():
                        c1 = v1.get(s1)
                        if c1 is not None:
                            key = (s1, s2)
                            acc[key] = acc.get(key, 0.0) + c1 * m * c2 * lam ** p
    t = np.asarray(t, dtype=float)
    if not acc:
        return np.zeros(t.shape)
    keys = list(acc)
    w = np.array([acc[k] for k in keys])
    freq = np.array([energy(s2) - energy(s1) for s1, s2 in keys])
    val = np.exp(1j * np.multiply.outer(t, freq)) @ w
    if np.max(np.abs(val.imag), initial=0.0) > imag_tol * max(1.0, np.max(np.abs(val.real), initial=0.0)):
        raise ArithmeticError("expectation value has a non-negligible imaginary part")
    return val.real


def validity_horizon(lam: float, K: int) -> float:
    """Rough time scale ``0.01/|lam|**(K+1)`` up to which phases stay accurate."""
    if lam == 0:
        return math.inf
    return 0.01 / abs(lam) ** (K + 1)


# ---------------------------------------------------------------------------
# Convenience bundle


@lru_cache(maxsize=8)
def _energy_flow(w, v, n_aniso, order, convention) -> IterativeResult:
    return iterate_flow(FlowParameters.make(w, v, 1.0, n_aniso), order, convention)


@dataclass
class DressedFrame:
    """Transformed operators and dressed vacuum at unit coupling, plus energies.

    Everything except the energies is independent of the coupling, so one
    frame serves a whole family of couplings. Energies come from a normal
    form of order ``energy_order``, which may exceed ``K``: phases
    accumulate energy errors linearly in time.
    """

    params: FlowParameters
    K: int
    flow: IterativeResult
    a_inf: OperatorSeries
    b_inf: OperatorSeries
    vacuum: DressedState
    energy_flow: IterativeResult

    def normal_form(self, lam: float | None = None) -> OperatorPolynomial:
        lam = self.params.lam if lam is None else lam
        return self.energy_flow.diagonal_form(lam)

    def state(self, k: int, m: int) -> DressedState:
        return excited_state(k, m, self.vacuum)

    def amplitude(self, initial: tuple, final: tuple, lam: float | None = None) -> AmplitudeSum:
        return transition_amplitude(self.state(*initial), self.state(*final), self.normal_form(lam), lam=lam)


def build_frame(params: FlowParameters, K: int = 6, energy_order: int | None = DEFAULT_ENERGY_ORDER,
                window: int | None = DEFAULT_WINDOW, convention: str = "physical") -> DressedFrame:
    energy_order = K if energy_order is None else energy_order
    if energy_order < K:
        raise ValueError("energy_order must be at least K")
    flow = dynamics_flow(params, K, convention)
    a_inf = transform_operator("a", params, K, flow)
    b_inf = transform_operator("b", params, K, flow)
    vacuum = solve_vacuum(a_inf, b_inf, K, window)
    energy_flow = flow if energy_order == K else _energy_flow(
        params.w, params.v, params.n_aniso, energy_order, convention)
    return DressedFrame(params, K, flow, a_inf, b_inf, vacuum, energy_flow)
