"""Reference spectrum from dense diagonalization in a truncated Fock basis."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .algebra import MAX_DIMENSION, FlowParameters, build_henon_heiles, matrix_representation

CONFIDENT_WEIGHT = 0.5


@dataclass
class TruncatedSpectrum:
    """Eigenpairs of ``H`` on the ``N1 x N2`` product basis (index ``n1*N2 + n2``)."""

    N1: int
    N2: int
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    labels: list
    weights: np.ndarray

    def by_label(self) -> dict:
        """``{(n1, n2): energy}`` over confidently labelled levels (lowest wins)."""
        out = {}
        for e, lab in zip(self.eigenvalues, self.labels):
            if lab != "mixed" and lab not in out:
                out[lab] = float(e)
        return out

    def fock_index(self, n1: int, n2: int) -> int:
        if not (0 <= n1 < self.N1 and 0 <= n2 < self.N2):
            raise IndexError(f"state ({n1},{n2}) outside the {self.N1}x{self.N2} basis")
        return n1 * self.N2 + n2

    def fock_vector(self, n1: int, n2: int) -> np.ndarray:
        out = np.zeros(self.N1 * self.N2)
        out[self.fock_index(n1, n2)] = 1.0
        return out


def hamiltonian_matrix(params: FlowParameters, N1: int, N2: int, convention: str = "physical",
                       max_dimension: int = MAX_DIMENSION) -> np.ndarray:
    h = matrix_representation(build_henon_heiles(params, True, convention), N1, N2, max_dimension)
    asym = np.max(np.abs(h - h.T), initial=0.0)
    if asym != 0.0:
        raise ArithmeticError(f"assembled Hamiltonian is not symmetric (max asymmetry {asym:.3e})")
    return h


def diagonalize(params: FlowParameters, N1: int = 30, N2: int = 30, convention: str = "physical",
                max_dimension: int = MAX_DIMENSION) -> TruncatedSpectrum:
    h = hamiltonian_matrix(params, N1, N2, convention, max_dimension)
    vals, vecs = np.linalg.eigh(h)
    probs = vecs ** 2
    dominant = np.argmax(probs, axis=0)
    weights = probs[dominant, np.arange(len(vals))]
    labels = [divmod(int(i), N2) if w >= CONFIDENT_WEIGHT else "mixed" for i, w in zip(dominant, weights)]
    return TruncatedSpectrum(N1, N2, vals, vecs, labels, weights)


def convergence_check(params: FlowParameters, sizes: list, levels: int = 12,
                      convention: str = "physical") -> dict:
    """Drift ``|E_i(size) - E_i(largest)|`` of the lowest ``levels`` eigenvalues.

    ``sizes`` holds ints (square bases) or ``(N1, N2)`` pairs.
    """
    if len(sizes) < 2:
        raise ValueError("need at least two basis sizes")
    shapes = [(s, s) if isinstance(s, int) else tuple(s) for s in sizes]
    shapes.sort(key=lambda s: s[0] * s[1])
    spectra = {s: diagonalize(params, *s, convention=convention).eigenvalues[:levels] for s in shapes}
    ref = spectra[shapes[-1]]
    return {s: np.abs(spectra[s] - ref) for s in shapes}


def lambda_sweep(params: FlowParameters, lambdas, N1: int = 30, N2: int = 30, e_min: float = 0.7,
                 levels: int = 29, convention: str = "physical") -> list[tuple[float, int, float]]:
    """``(lam, level, E)`` for the first ``levels`` eigenvalues above ``e_min`` at each coupling."""
    rows = []
    for lam in lambdas:
        vals = diagonalize(params.with_lambda(lam), N1, N2, convention).eigenvalues
        vals = vals[vals > e_min][:levels]
        rows.extend((float(lam), i, float(e)) for i, e in enumerate(vals))
    return rows


def sweep_csv(rows) -> str:
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(["lambda", "level", "E"])
    for lam, i, e in rows:
        out.writerow([f"{lam:.12g}", i, f"{e:.12g}"])
    return buf.getvalue()


def spectrum_dump_csv(spec: TruncatedSpectrum, count: int | None = None) -> str:
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(["index", "E", "n1", "n2", "weight"])
    n = len(spec.eigenvalues) if count is None else count
    for i in range(n):
        lab = spec.labels[i]
        n1, n2 = ("mixed", "mixed") if lab == "mixed" else lab
        out.writerow([i + 1, f"{spec.eigenvalues[i]:.12g}", n1, n2, f"{spec.weights[i]:.12g}"])
    return buf.getvalue()


def propagate(initial, t: float, spectrum: TruncatedSpectrum) -> np.ndarray:
    """``exp(+iHt)`` applied to a Fock-basis coefficient vector."""
    psi = np.asarray(initial)
    if psi.shape != (spectrum.eigenvectors.shape[0],):
        raise ValueError("vector dimension does not match the basis")
    v = spectrum.eigenvectors
    return v @ (np.exp(1j * spectrum.eigenvalues * t) * (v.T @ psi))


def propagate_grid(initial, times, spectrum: TruncatedSpectrum) -> np.ndarray:
    """Rows are ``exp(+iHt) initial`` at each time."""
    v = spectrum.eigenvectors
    proj = v.T @ np.asarray(initial)
    phases = np.exp(1j * np.outer(np.asarray(times, dtype=float), spectrum.eigenvalues))
    return (phases * proj) @ v.T
