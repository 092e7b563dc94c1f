"""Two-qubit polarization state tomography.

Each arm analyzes in the H/V, D/A and R/L bases, giving 36 projector
settings.  Counts are Poisson; reconstruction is maximum likelihood via the
diluted R rho R iteration, seeded from a linear-inversion estimate.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import qmath
from .errors import InvalidArgumentError, NumericError

LABELS = ("H", "V", "D", "A", "R", "L")
BASIS_OF = {"H": 0, "V": 0, "D": 1, "A": 1, "R": 2, "L": 2}
SETTINGS = tuple(itertools.product(LABELS, LABELS))

_S = 1.0 / math.sqrt(2.0)
# R = (|H> + i|V>)/sqrt(2).
_KETS = {
    "H": np.array([1, 0], dtype=complex),
    "V": np.array([0, 1], dtype=complex),
    "D": np.array([_S, _S], dtype=complex),
    "A": np.array([_S, -_S], dtype=complex),
    "R": np.array([_S, 1j * _S], dtype=complex),
    "L": np.array([_S, -1j * _S], dtype=complex),
}


class ConvergenceWarning(UserWarning):
    pass


def projector(label: str) -> np.ndarray:
    try:
        ket = _KETS[label]
    except KeyError:
        raise InvalidArgumentError(f"unknown basis label {label!r}; expected one of {LABELS}") from None
    return np.outer(ket, ket.conj())


def setting_operator(signal: str, idler: str) -> np.ndarray:
    return np.kron(projector(signal), projector(idler))


_OPS = np.array([setting_operator(s, i) for s, i in SETTINGS])


def expected_probability(rho, signal: str, idler: str) -> float:
    mat = qmath.as_density(rho)
    return float(np.real(np.trace(mat @ setting_operator(signal, idler))))


def _probabilities(rho: np.ndarray) -> np.ndarray:
    return np.real(np.einsum("kij,ji->k", _OPS, rho))


@dataclass
class TomographyDataset:
    counts: dict[tuple[str, str], int]
    acquisition_total: int | None = None

    def __post_init__(self):
        for key, n in self.counts.items():
            if len(key) != 2 or key[0] not in LABELS or key[1] not in LABELS:
                raise InvalidArgumentError(f"invalid setting {key!r}")
            if n < 0:
                raise InvalidArgumentError(f"negative count {n} for setting {key}")

    def missing_settings(self) -> list[tuple[str, str]]:
        return [s for s in SETTINGS if s not in self.counts]

    def is_complete(self) -> bool:
        return not self.missing_settings()

    def vector(self) -> np.ndarray:
        missing = self.missing_settings()
        if missing:
            raise InvalidArgumentError(
                "incomplete dataset, missing settings: " + ", ".join(s + i for s, i in missing)
            )
        return np.array([self.counts[s] for s in SETTINGS], dtype=float)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["signal_basis", "idler_basis", "count"])
        for s in SETTINGS:
            if s in self.counts:
                c = self.counts[s]
                writer.writerow([s[0], s[1], repr(c) if isinstance(c, float) else int(c)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> TomographyDataset:
        reader = csv.DictReader(io.StringIO(text))
        if reader.fieldnames is None or not {"signal_basis", "idler_basis", "count"} <= set(reader.fieldnames):
            raise InvalidArgumentError("tomography table needs columns signal_basis, idler_basis, count")
        counts = {}
        for row in reader:
            key = (row["signal_basis"].strip(), row["idler_basis"].strip())
            if key in counts:
                raise InvalidArgumentError(f"duplicate setting {key}")
            raw = row["count"].strip()
            try:
                value = float(raw)
            except ValueError:
                raise InvalidArgumentError(f"non-numeric count {raw!r} for setting {key}") from None
            counts[key] = int(value) if value.is_integer() else value
        return cls(counts)


def exact_dataset(rho, n_per_setting: float = 1.0) -> TomographyDataset:
    """Noise-free 'counts' equal to the expected values (may be fractional)."""
    probs = _probabilities(qmath.as_density(rho))
    return TomographyDataset({s: float(n_per_setting * p) for s, p in zip(SETTINGS, np.clip(probs, 0, None))})


def simulate_counts(rho, n_per_setting: int, seed: int, background: float = 0.0) -> TomographyDataset:
    """Poisson coincidence counts with mean n * p + background per setting."""
    if n_per_setting < 1:
        raise InvalidArgumentError(f"n_per_setting must be >= 1, got {n_per_setting!r}")
    if background < 0:
        raise InvalidArgumentError("background rate must be >= 0")
    probs = np.clip(_probabilities(qmath.as_density(rho)), 0.0, None)
    rng = np.random.default_rng(seed)
    draws = rng.poisson(n_per_setting * probs + background)
    return TomographyDataset({s: int(c) for s, c in zip(SETTINGS, draws)}, acquisition_total=n_per_setting)


def design_matrix() -> np.ndarray:
    """36 x 16 real matrix mapping Pauli coefficients of rho to setting probabilities."""
    paulis = [qmath.I2, qmath.PAULI_X, qmath.PAULI_Y, qmath.PAULI_Z]
    basis = [np.kron(a, b) / 4.0 for a in paulis for b in paulis]
    return np.array([[np.real(np.trace(op @ b)) for b in basis] for op in _OPS])


def _basis_frequencies(counts: np.ndarray) -> np.ndarray:
    """Normalize counts within each of the 9 basis pairs (4 outcomes each)."""
    freqs = np.zeros_like(counts)
    groups: dict[tuple[int, int], list[int]] = {}
    for k, (s, i) in enumerate(SETTINGS):
        groups.setdefault((BASIS_OF[s], BASIS_OF[i]), []).append(k)
    for idx in groups.values():
        total = counts[idx].sum()
        if total > 0:
            freqs[idx] = counts[idx] / total
    return freqs


def linear_inversion(data: TomographyDataset) -> np.ndarray:
    """Least-squares estimate from per-basis frequencies; may be unphysical."""
    counts = data.vector()
    if not counts.sum() > 0:
        raise InvalidArgumentError("all counts are zero")
    a = design_matrix()
    if np.linalg.matrix_rank(a) < 16:
        raise NumericError("tomography design matrix is singular")
    coeffs, *_ = np.linalg.lstsq(a, _basis_frequencies(counts), rcond=None)
    paulis = [qmath.I2, qmath.PAULI_X, qmath.PAULI_Y, qmath.PAULI_Z]
    rho = sum(c * np.kron(p, q) / 4.0 for c, (p, q) in zip(coeffs, itertools.product(paulis, paulis)))
    rho = 0.5 * (rho + qmath.dagger(rho))
    return rho / np.trace(rho).real


def project_to_physical(m: np.ndarray) -> np.ndarray:
    """Clip negative eigenvalues and renormalize."""
    vals, vecs = qmath.hermitian_eig(0.5 * (m + qmath.dagger(m)))
    vals = np.clip(vals, 0.0, None)
    if not vals.sum() > 0:
        raise NumericError("estimate has no positive spectrum")
    rho = (vecs * vals) @ qmath.dagger(vecs)
    rho = 0.5 * (rho + qmath.dagger(rho))
    return rho / np.trace(rho).real


def log_likelihood(rho: np.ndarray, counts: np.ndarray) -> float:
    probs = _probabilities(rho)
    mask = counts > 0
    if np.any(probs[mask] <= 0):
        return -math.inf
    return float(np.sum(counts[mask] * np.log(probs[mask])))


@dataclass
class MleResult:
    rho: np.ndarray
    log_likelihood: float
    iterations: int
    converged: bool
    history: list[float]


def _r_operator(rho: np.ndarray, counts: np.ndarray, total: float) -> np.ndarray:
    probs = _probabilities(rho)
    weights = np.zeros_like(counts)
    mask = counts > 0
    weights[mask] = counts[mask] / np.maximum(probs[mask], 1e-300)
    return np.einsum("k,kij->ij", weights, _OPS) / total


def mle_reconstruct(data: TomographyDataset, max_iters: int = 10_000, tol: float = 1e-10,
                    rho0=None) -> MleResult:
    """Maximum-likelihood density matrix for a complete 36-setting dataset.

    R = sum_k (n_k / p_k) Pi_k / sum_k n_k equals the identity at the optimum
    (every analyzer basis pair sums to I, so sum_k p_k is fixed).  Each step
    uses the diluted R_eps = (I + eps R)/(1 + eps); eps starts large and is
    halved whenever a step would lower the likelihood.
    """
    counts = data.vector()
    total = counts.sum()
    if not total > 0:
        raise InvalidArgumentError("all counts are zero")
    rho = project_to_physical(linear_inversion(data) if rho0 is None else np.asarray(rho0, dtype=complex))
    # Keep the start strictly inside the cone where data is nonzero.
    if log_likelihood(rho, counts) == -math.inf:
        rho = 0.9 * rho + 0.1 * np.eye(4) / 4.0
    ll = log_likelihood(rho, counts)
    history = [ll]
    ident = np.eye(4, dtype=complex)
    eps = 1e6
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        r = _r_operator(rho, counts, total)
        while True:
            step = (ident + eps * r) / (1.0 + eps)
            cand = step @ rho @ step
            cand = 0.5 * (cand + qmath.dagger(cand))
            cand /= np.trace(cand).real
            cand_ll = log_likelihood(cand, counts)
            if cand_ll >= ll or eps < 1e-12:
                break
            eps *= 0.5
        if cand_ll < ll:
            converged = True
            break
        delta = float(np.max(np.abs(cand - rho)))
        rho, ll = cand, cand_ll
        history.append(ll)
        if delta < tol:
            converged = True
            break
    if not converged:
        warnings.warn(f"MLE did not converge within {max_iters} iterations", ConvergenceWarning, stacklevel=2)
    return MleResult(rho=qmath.as_density(rho), log_likelihood=ll, iterations=it, converged=converged,
                     history=history)
