"""Cut-off flow: Wegner generator on a finite ansatz, integrated numerically.

The ansatz is a set of words ("slots") with a nominal coupling order each:
``a†a`` and ``b†b`` are order 0, the cubic words order 1, and everything
else the smallest order at which the double commutator generates it. The
flow ``dH/dl = [[H_d, H_r], H]`` is expanded slot by slot into cubic
polynomials in the slot coefficients. A product of nominal order ``p`` is
kept for a diagonal slot when ``p <= N`` and for an off-diagonal slot when
``p <= N - 1``; off-diagonal words of order ``N`` only feed the diagonal
beyond order ``N``.

By default only off-diagonal words of odd nominal order are slots (the
parity of the cubic coupling); even words such as ``a†²`` or ``a†²b†²``
are dropped when generated. ``parity="all"`` keeps them, which makes the
order-4 diagonal complete through ``lam**4``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from math import perm

import numpy as np
from scipy.integrate import solve_ivp

from .algebra import (
    FlowParameters,
    Monomial,
    OperatorPolynomial,
    _word_commutator,
    cubic_words,
    split_diagonal,
)

log = logging.getLogger(__name__)

A_NUM = Monomial(1, 1, 0, 0)
B_NUM = Monomial(0, 0, 1, 1)
EXPECTED_OFFDIAGONAL_FAMILIES = 48


class AnsatzClosureError(ValueError):
    """A generated word within the order budget has no slot in the ansatz."""


class NonConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float, state=None):
        super().__init__(message)
        self.residual = residual
        self.state = state


PARITIES = ("odd", "all")


def _admissible(word: Monomial, p: int, order: int, parity: str) -> bool:
    if word.is_diagonal:
        return p <= order
    if parity == "odd" and p % 2 == 0:
        return False
    return p <= order - 1


def _double_commutators(d, o, z):
    out: dict = {}
    for u, c1 in _word_commutator(d, o):
        for t, c2 in _word_commutator(u, z):
            out[t] = out.get(t, 0) + c1 * c2
    return out


def generate_ansatz(order: int, parity: str = "odd", seed_words=None) -> dict:
    """Closure of the seed words under the truncated double commutator.

    Returns ``{word: nominal_order}``.
    """
    if parity not in PARITIES:
        raise ValueError(f"parity must be one of {PARITIES}")
    if seed_words is None:
        seed_words = {tuple(m) for m, _ in cubic_words(FlowParameters.make(lam=1.0)).items()}
    slots = {A_NUM: 0, B_NUM: 0}
    for wd in seed_words:
        slots[Monomial(*wd)] = 1
    changed = True
    while changed:
        changed = False
        diag = [(w, o) for w, o in slots.items() if w.is_diagonal]
        off = [(w, o) for w, o in slots.items() if not w.is_diagonal]
        every = list(slots.items())
        for d, od in diag:
            for x, ox in off:
                if od + ox > order:
                    continue
                for z, oz in every:
                    p = od + ox + oz
                    if p > order:
                        continue
                    for t, c in _double_commutators(d, x, z).items():
                        if c == 0:
                            continue
                        t = Monomial(*t)
                        if _admissible(t, p, order, parity) and slots.get(t, order + 1) > p:
                            slots[t] = p
                            changed = True
    return slots


@dataclass
class OdeSystem:
    """Right-hand side as cubic polynomials in the slot coefficients.

    ``terms[t]`` maps a sorted index triple ``(i, j, k)`` to an exact
    coefficient: ``d s_t/dl = sum c * s_i * s_j * s_k``.
    """

    order: int
    slots: list
    nominal: list
    terms: list
    index: dict = field(init=False)

    def __post_init__(self):
        self.index = {w: i for i, w in enumerate(self.slots)}
        tgt, ii, jj, kk, cc = [], [], [], [], []
        for t, poly in enumerate(self.terms):
            for (i, j, k), c in poly.items():
                tgt.append(t)
                ii.append(i)
                jj.append(j)
                kk.append(k)
                cc.append(float(c))
        self._tgt = np.array(tgt, dtype=np.intp)
        self._i = np.array(ii, dtype=np.intp)
        self._j = np.array(jj, dtype=np.intp)
        self._k = np.array(kk, dtype=np.intp)
        self._c = np.array(cc)
        self.offdiagonal = np.array([not w.is_diagonal for w in self.slots])

    @property
    def size(self) -> int:
        return len(self.slots)

    def rhs(self, s: np.ndarray) -> np.ndarray:
        vals = self._c * s[self._i] * s[self._j] * s[self._k]
        return np.bincount(self._tgt, weights=vals, minlength=self.size)

    def equation(self, word) -> dict:
        """Symbolic right-hand side for one slot, keyed by word triples."""
        t = self.index[Monomial(*word)]
        return {tuple(self.slots[i] for i in key): c for key, c in self.terms[t].items()}

    def offdiagonal_families(self) -> int:
        """Number of Hermitian pairs among off-diagonal slots."""
        seen = set()
        for w in self.slots:
            if not w.is_diagonal:
                seen.add(min(w, w.dagger()))
        return len(seen)


def derive_flow_odes(order: int, params: FlowParameters | None = None, ansatz: dict | None = None,
                     strict: bool = True, parity: str = "odd") -> OdeSystem:
    """Expand ``[[H_d, H_r], H]`` on the ansatz, truncated at coupling order ``order``.

    ``params`` is accepted for symmetry with the other entry points; the
    symbolic system itself does not depend on numerical parameters. With an
    explicit ``ansatz`` (``{word: nominal order}``) every generated word
    inside the budget must have a slot, else :class:`AnsatzClosureError`.
    """
    if order not in (2, 3, 4):
        raise ValueError("cut-off order must be 2, 3 or 4")
    slots = generate_ansatz(order, parity) if ansatz is None else {Monomial(*w): o for w, o in ansatz.items()}
    words = sorted(slots, key=lambda w: (not w.is_diagonal, slots[w], w))
    index = {w: i for i, w in enumerate(words)}
    terms = [dict() for _ in words]
    diag = [w for w in words if w.is_diagonal]
    off = [w for w in words if not w.is_diagonal]
    for d in diag:
        for x in off:
            if slots[d] + slots[x] > order:
                continue
            for z in words:
                p = slots[d] + slots[x] + slots[z]
                if p > order:
                    continue
                key = tuple(sorted((index[d], index[x], index[z])))
                for t, c in _double_commutators(d, x, z).items():
                    if c == 0:
                        continue
                    t = Monomial(*t)
                    if not _admissible(t, p, order, parity):
                        continue
                    if t not in index:
                        if strict:
                            raise AnsatzClosureError(
                                f"word {t} (order {p}) generated by [[{d},{x}],{z}] has no slot")
                        continue
                    poly = terms[index[t]]
                    poly[key] = poly.get(key, 0) + Fraction(c)
    for poly in terms:
        for key in [k for k, c in poly.items() if c == 0]:
            del poly[key]
    system = OdeSystem(order, words, [slots[w] for w in words], terms)
    if order == 4:
        fam = system.offdiagonal_families()
        if fam != EXPECTED_OFFDIAGONAL_FAMILIES:
            log.info("order-4 ansatz (%s parity) has %d off-diagonal families, not %d",
                     parity, fam, EXPECTED_OFFDIAGONAL_FAMILIES)
    return system


@dataclass
class CutoffState:
    """Slot coefficients at flow parameter ``ell``."""

    system: OdeSystem
    values: np.ndarray
    ell: float = 0.0
    zero_point: float = 0.0
    trajectory: list = field(default_factory=list)

    @property
    def w(self) -> float:
        return float(self.values[self.system.index[A_NUM]])

    @property
    def v(self) -> float:
        return float(self.values[self.system.index[B_NUM]])

    @property
    def x(self) -> np.ndarray:
        return self.values[self.system.offdiagonal]

    def offdiagonal_norm(self) -> float:
        x = self.x
        return float(np.max(np.abs(x))) if x.size else 0.0

    def operator(self) -> OperatorPolynomial:
        return OperatorPolynomial(
            {w: float(c) for w, c in zip(self.system.slots, self.values)}, max_degree=None)

    def diagonal_form(self, include_zero_point: bool = True) -> OperatorPolynomial:
        diag, _ = split_diagonal(self.operator())
        if include_zero_point:
            diag = diag + OperatorPolynomial.constant(self.zero_point, max_degree=None)
        return diag

    def energy(self, n1: int, n2: int) -> float:
        e = self.zero_point
        for w, c in zip(self.system.slots, self.values):
            if w.is_diagonal:
                e += c * perm(n1, w.k) * perm(n2, w.m)
        return float(e)


def initial_state(system: OdeSystem, params: FlowParameters, convention: str = "physical") -> CutoffState:
    values = np.zeros(system.size)
    values[system.index[A_NUM]] = float(params.w)
    values[system.index[B_NUM]] = float(params.v)
    for wd, c in cubic_words(params, convention).items():
        if wd not in system.index:
            raise AnsatzClosureError(f"initial word {wd} has no slot")
        values[system.index[wd]] = float(c)
    return CutoffState(system, values, 0.0, params.zero_point)


def integrate_flow(system: OdeSystem, init: CutoffState, tolerance: float = 1e-10,
                   ell_max: float = 2000.0, chunk: float = 5.0, samples_per_chunk: int = 20,
                   rtol: float = 1e-11, atol: float = 1e-13) -> CutoffState:
    """Integrate until the largest off-diagonal coefficient is below ``tolerance``.

    Uses an adaptive Runge-Kutta 4(5) pair. The returned state carries the
    sampled trajectory as ``(ell, values)`` pairs.
    """
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    s = init.values.astype(float).copy()
    ell = init.ell
    traj = [(ell, s.copy())]
    fun = lambda _l, y: system.rhs(y)  # noqa: E731
    while True:
        if np.max(np.abs(s[system.offdiagonal]), initial=0.0) < tolerance:
            break
        if ell >= ell_max:
            resid = float(np.max(np.abs(s[system.offdiagonal])))
            raise NonConvergenceError(
                f"off-diagonal residual {resid:.3e} at l={ell:g} above tolerance {tolerance:g}",
                resid, CutoffState(system, s, ell, init.zero_point, traj))
        stop = min(ell + chunk, ell_max)
        t_eval = np.linspace(ell, stop, samples_per_chunk + 1)[1:]
        sol = solve_ivp(fun, (ell, stop), s, method="RK45", rtol=rtol, atol=atol, t_eval=t_eval)
        if not sol.success or not np.all(np.isfinite(sol.y)):
            resid = float(np.max(np.abs(s[system.offdiagonal])))
            raise NonConvergenceError(f"integrator failed at l={ell:g}: {sol.message}", resid,
                                      CutoffState(system, s, ell, init.zero_point, traj))
        for t, y in zip(sol.t, sol.y.T):
            traj.append((float(t), y.copy()))
        s = sol.y[:, -1].copy()
        ell = stop
    return CutoffState(system, s, ell, init.zero_point, traj)


def run_cutoff(params: FlowParameters, order: int = 4, tolerance: float = 1e-10,
               ell_max: float = 2000.0, convention: str = "physical", parity: str = "odd",
               **kw) -> CutoffState:
    system = derive_flow_odes(order, params, parity=parity)
    return integrate_flow(system, initial_state(system, params, convention), tolerance, ell_max, **kw)


def asymptotic_decay_rates(state: CutoffState, floor: float = 1e-6, tail_fraction: float = 0.5) -> dict:
    """Fitted decay rate per off-diagonal slot (see :func:`fit_decay_rate`).

    Slots that never leave zero, or have too few samples, map to ``None``.
    """
    ells = np.array([t for t, _ in state.trajectory])
    vals = np.array([y for _, y in state.trajectory])
    return {word: fit_decay_rate(ells, vals[:, idx], floor, tail_fraction)
            for idx, word in enumerate(state.system.slots) if not word.is_diagonal}


def trajectory_csv(state: CutoffState) -> str:
    header = ["ell"] + [",".join(map(str, w)).replace(",", "_") for w in state.system.slots]
    lines = [",".join(header)]
    for ell, y in state.trajectory:
        lines.append(",".join([f"{ell:.12g}"] + [f"{c:.12g}" for c in y]))
    return "\n".join(lines) + "\n"


# Hermitian families of the order-2 ansatz: name -> ((word, weight), ...),
# x = sum(weight * s_word) / lam
ORDER2_FAMILIES = {
    "x1": (((2, 0, 1, 0), 0.5), ((2, 0, 0, 1), 0.5)),
    "x2": (((2, 0, 1, 0), 0.5), ((2, 0, 0, 1), -0.5)),
    "x3": (((1, 1, 1, 0), 1.0),),
    "x4": (((0, 0, 3, 0), 1.0),),
    "x5": (((0, 0, 2, 1), 1.0),),
    "x6": (((0, 0, 1, 0), 1.0),),
}


def family_trajectories(state: CutoffState, lam: float) -> tuple[np.ndarray, dict]:
    """``(ells, {name: values})`` for the order-2 family variables ``x1 ... x6``."""
    if lam == 0:
        raise ValueError("family variables are scaled by the coupling, which is zero")
    ells = np.array([t for t, _ in state.trajectory])
    vals = np.array([y for _, y in state.trajectory])
    out = {}
    for name, parts in ORDER2_FAMILIES.items():
        col = np.zeros(len(ells))
        for word, weight in parts:
            col += weight * vals[:, state.system.index[Monomial(*word)]]
        out[name] = col / lam
    return ells, out


def fit_decay_rate(ells: np.ndarray, values: np.ndarray, floor: float = 1e-6,
                   tail_fraction: float = 0.5) -> float | None:
    """Least-squares slope of ``-log|values|`` on the tail of the samples above
    ``floor`` times the peak magnitude (below that, integration noise dominates)."""
    mag = np.abs(values)
    peak = mag.max(initial=0.0)
    if peak == 0.0:
        return None
    ok = mag > floor * peak
    if ok.sum() < 4:
        return None
    l_ok = ells[ok]
    cut = l_ok[0] + (1 - tail_fraction) * (l_ok[-1] - l_ok[0])
    sel = ok & (ells >= cut)
    if sel.sum() < 3:
        return None
    slope, _ = np.polyfit(ells[sel], np.log(mag[sel]), 1)
    return -float(slope)
