"""Eigenvalue tables from normal forms.

A diagonal word ``a†^k a^k b†^m b^m`` acts on ``|n1, n2>`` as the product
of falling factorials ``FF(n1, k) * FF(n2, m)``. For commensurate
frequencies the surviving resonant words couple states inside a shell
``n1 + n2 = N``; those small blocks are diagonalized with a cyclic Jacobi
sweep.
"""
from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .algebra import FlowParameters, OperatorPolynomial

METHOD_PATTERN = re.compile(r"^(cutoff-[234]|iter-\d+|improved(-\d+)?|baseline)$")
DEFAULT_IMPROVED_ORDER = 6
HALF = Fraction(1, 2)


class NonDiagonalError(ValueError):
    """A normal form passed for closed-form evaluation has off-diagonal words."""


class UnshiftedStateError(ZeroDivisionError):
    """The reference energy equals the free energy, so the relative error is undefined."""


def falling_factorial(n: int, k: int) -> int:
    return math.perm(n, k) if k <= n else 0


def eigenvalue_from_normal_form(diag: OperatorPolynomial, n1: int, n2: int) -> float:
    """Value of a diagonal normal form on ``|n1, n2>``; the constant word is carried."""
    if n1 < 0 or n2 < 0:
        raise ValueError("quantum numbers must be non-negative")
    total = 0.0
    for (k, r, m, n), c in diag.items():
        if k != r or m != n:
            raise NonDiagonalError(f"word ({k},{r},{m},{n}) is not diagonal")
        total += float(c) * falling_factorial(n1, k) * falling_factorial(n2, m)
    return total


def free_energy(params: FlowParameters, n1: int, n2: int) -> float:
    return float(params.w * (n1 + HALF) + params.v * (n2 + HALF))


def level_energy(form: OperatorPolynomial, params: FlowParameters, n1: int, n2: int) -> float:
    """``e_free`` plus the value of ``form - H_free`` on ``|n1, n2>``.

    Same number as :func:`eigenvalue_from_normal_form` up to rounding, but
    exactly ``e_free`` when the form carries no coupling shift.
    """
    return free_energy(params, n1, n2) + eigenvalue_from_normal_form(form - _free_form(params), n1, n2)


def _free_form(params: FlowParameters) -> OperatorPolynomial:
    return OperatorPolynomial({(1, 1, 0, 0): float(params.w), (0, 0, 1, 1): float(params.v),
                               (0, 0, 0, 0): params.zero_point}, max_degree=None)


def relative_error(e_method: float, e_baseline: float, e_free: float) -> float:
    """Deviation from the reference relative to the reference's coupling shift, in percent."""
    shift = e_baseline - e_free
    if shift == 0:
        raise UnshiftedStateError("reference energy equals the free energy")
    return abs((e_method - e_baseline) / shift) * 100.0


# ---------------------------------------------------------------------------
# Small symmetric eigenproblems


def jacobi_eigh(matrix, tol: float = 1e-15, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi for a real symmetric matrix (intended for n <= 64).

    Returns ascending eigenvalues and the eigenvectors as columns.
    """
    a = np.array(matrix, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("matrix must be square")
    if n > 64:
        raise ValueError("jacobi_eigh is meant for matrices up to 64x64")
    if not np.allclose(a, a.T, rtol=0, atol=1e-12 * max(1.0, np.abs(a).max(initial=0.0))):
        raise ValueError("matrix is not symmetric")
    a = (a + a.T) / 2
    vecs = np.eye(n)
    scale = np.abs(a).max(initial=0.0)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.triu(a, 1) ** 2))
        if off <= tol * max(scale, 1e-300):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rot = np.array([[c, s], [-s, c]])
                idx = [p, q]
                a[:, idx] = a[:, idx] @ rot
                a[idx, :] = rot.T @ a[idx, :]
                a[p, q] = a[q, p] = 0.0
                vecs[:, idx] = vecs[:, idx] @ rot
    else:
        raise ArithmeticError("Jacobi sweeps did not converge")
    vals = np.diag(a).copy()
    order = np.argsort(vals, kind="stable")
    return vals[order], vecs[:, order]


def _word_on_state(k: int, r: int, m: int, n: int, n1: int, n2: int):
    """Image of ``|n1, n2>`` under a word: ``(target, amplitude)`` or ``None``."""
    if r > n1 or n > n2:
        return None
    t1, t2 = n1 - r + k, n2 - n + m
    amp = math.sqrt(math.perm(n1, r) * math.perm(t1, k) * math.perm(n2, n) * math.perm(t2, m))
    return (t1, t2), amp


def shell_basis(N: int) -> list[tuple[int, int]]:
    """States with ``n1 + n2 = N`` ordered ``n1 = N, ..., 0``."""
    return [(n1, N - n1) for n1 in range(N, -1, -1)]


def shell_matrix(form: OperatorPolynomial, N: int) -> np.ndarray:
    """``form`` restricted to the shell ``n1 + n2 = N``.

    Words that leave the shell are ignored; for a converged commensurate
    normal form only diagonal and resonant words are present anyway.
    """
    if N < 0:
        raise ValueError("shell index must be non-negative")
    basis = shell_basis(N)
    index = {s: i for i, s in enumerate(basis)}
    mat = np.zeros((N + 1, N + 1))
    for (k, r, m, n), c in form.items():
        if k - r + m - n != 0:
            continue
        for j, (n1, n2) in enumerate(basis):
            hit = _word_on_state(k, r, m, n, n1, n2)
            if hit is not None:
                mat[index[hit[0]], j] += float(c) * hit[1]
    return mat


@dataclass(frozen=True)
class ShellLevel:
    energy: float
    n1: int
    n2: int
    weight: float


def improve_shell(form: OperatorPolynomial, N: int, params: FlowParameters | None = None) -> list[ShellLevel]:
    """Diagonalize one shell and label each level by its dominant component.

    Ties in the dominant weight go to the larger ``n1``. Strongly mixed
    shells can give two levels the same label. With ``params`` the free
    energies are split off and added back exactly (see :func:`level_energy`).
    """
    basis = shell_basis(N)
    if params is None:
        mat = shell_matrix(form, N)
    else:
        mat = shell_matrix(form - _free_form(params), N)
        mat[np.diag_indices(N + 1)] += [free_energy(params, *s) for s in basis]
    vals, vecs = jacobi_eigh(mat)
    weights = vecs ** 2
    out = []
    for j in range(N + 1):
        # basis runs n1 = N..0, so argmax already prefers the larger n1 on ties
        i = int(np.argmax(weights[:, j]))
        out.append(ShellLevel(float(vals[j]), basis[i][0], basis[i][1], float(weights[i, j])))
    return out


def degenerate_block_improve(form: OperatorPolynomial, N: int) -> list[float]:
    """Sorted eigenvalues of ``form`` inside the shell ``n1 + n2 = N``."""
    return [lv.energy for lv in improve_shell(form, N)]


# ---------------------------------------------------------------------------
# Tables


@dataclass
class SpectrumEntry:
    n1: int
    n2: int
    energy: float
    method: str
    e_free: float
    numerical: float | None = None
    delta: float | None = None


def _parse_method(method: str) -> tuple[str, int]:
    if not METHOD_PATTERN.match(method):
        raise ValueError(f"unknown method {method!r}")
    if method.startswith("cutoff"):
        return "cutoff", int(method.split("-")[1])
    if method.startswith("iter"):
        K = int(method.split("-")[1])
        if K < 1:
            raise ValueError("iteration order must be >= 1")
        return "iter", K
    if method.startswith("improved"):
        return "improved", int(method.split("-")[1]) if "-" in method else DEFAULT_IMPROVED_ORDER
    return "baseline", 0


def _candidate_states(params: FlowParameters, count: int) -> list[tuple[int, int]]:
    # every state whose free energy is within two quanta above the count-th one
    w, v = float(params.w), float(params.v)
    top = count + 2
    states = [(i, j) for i in range(top) for j in range(top)]
    states.sort(key=lambda s: (w * s[0] + v * s[1], -s[0]))
    limit = w * states[count - 1][0] + v * states[count - 1][1] + 2 * max(w, v)
    return [s for s in states if w * s[0] + v * s[1] <= limit]


def _flow_levels(params, kind, order, count, convention):
    if kind == "cutoff":
        from .cutoff import run_cutoff
        state = run_cutoff(params, order, convention=convention)
        form = state.diagonal_form()
        return [(n1, n2, level_energy(form, params, n1, n2))
                for n1, n2 in _candidate_states(params, count)]
    from .iterative import iterate_flow
    result = iterate_flow(params, order, convention)
    nf = result.normal_form()
    if kind == "iter":
        diag = OperatorPolynomial({m: c for m, c in nf.items() if m.is_diagonal}, max_degree=None)
        return [(n1, n2, level_energy(diag, params, n1, n2))
                for n1, n2 in _candidate_states(params, count)]
    shells = sorted({n1 + n2 for n1, n2 in _candidate_states(params, count)})
    return [(lv.n1, lv.n2, lv.energy) for N in shells for lv in improve_shell(nf, N, params)]


def spectrum_table(params: FlowParameters, method: str, count: int = 12,
                   baseline=None, convention: str = "physical",
                   basis: tuple[int, int] = (30, 30)) -> list[SpectrumEntry]:
    """Lowest ``count`` levels for one method, sorted by energy.

    ``baseline`` may be a :class:`~hhflow.baseline.TruncatedSpectrum` or
    ``True`` (diagonalize on ``basis``); reference values and ``delta`` are
    then attached by matching confident quantum-number labels.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    kind, order = _parse_method(method)
    if baseline is True or kind == "baseline":
        from .baseline import diagonalize
        ref = diagonalize(params, *basis, convention=convention) if not hasattr(baseline, "labels") \
            else baseline
    else:
        ref = baseline
    if kind == "baseline":
        levels = [(lab[0], lab[1], float(e)) for e, lab in zip(ref.eigenvalues, ref.labels) if lab != "mixed"]
    else:
        levels = _flow_levels(params, kind, order, count, convention)
    levels.sort(key=lambda x: x[2])
    lookup = ref.by_label() if ref is not None else {}
    entries = []
    for n1, n2, e in levels[:count]:
        ent = SpectrumEntry(n1, n2, e, method, free_energy(params, n1, n2))
        if (n1, n2) in lookup:
            ent.numerical = lookup[n1, n2]
            try:
                ent.delta = relative_error(e, ent.numerical, ent.e_free)
            except UnshiftedStateError:
                ent.delta = None
        entries.append(ent)
    return entries


def _fmt(x) -> str:
    return "" if x is None else f"{x:.12g}"


def spectrum_csv(entries: list[SpectrumEntry]) -> str:
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(["n", "n1", "n2", "method", "energy", "numerical", "e_free", "delta"])
    for i, e in enumerate(entries, 1):
        out.writerow([i, e.n1, e.n2, e.method, _fmt(e.energy), _fmt(e.numerical), _fmt(e.e_free), _fmt(e.delta)])
    return buf.getvalue()
