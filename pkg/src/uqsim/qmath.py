"""Small dense complex linear algebra and two-qubit state metrics.

Basis order is (|HH>, |HV>, |VH>, |VV>) = (|00>, |01>, |10>, |11>); the
signal photon is the left tensor factor.  States are plain numpy arrays:
a pure state is a length-4 complex vector, a density matrix a 4x4 complex
array.  Metric functions reject sub-normalized inputs instead of silently
renormalizing them.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DegenerateStateError, InvalidArgumentError, NumericError

HERMITIAN_TOL = 1e-10
PSD_TOL = 1e-10
TRACE_TOL = 1e-9
NORM_TOL = 1e-12

I2 = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_YY = np.kron(PAULI_Y, PAULI_Y)

_SUPPORTED_SHAPES = {(2, 2), (4, 4), (4, 1), (1, 4), (4,)}


def as_matrix(m, shape: tuple[int, ...] | None = None) -> np.ndarray:
    """Coerce to a complex array and check it has a supported (or the given) shape."""
    arr = np.asarray(m, dtype=complex)
    if shape is not None and arr.shape != shape:
        raise InvalidArgumentError(f"expected shape {shape}, got {arr.shape}")
    if arr.shape not in _SUPPORTED_SHAPES:
        raise InvalidArgumentError(f"unsupported matrix shape {arr.shape}")
    return arr


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


def hermiticity_error(m: np.ndarray) -> float:
    return float(np.max(np.abs(m - dagger(m))))


def as_pure_state(psi) -> np.ndarray:
    vec = as_matrix(psi).reshape(-1)
    if vec.shape != (4,):
        raise InvalidArgumentError(f"pure state must have 4 amplitudes, got {vec.size}")
    norm = float(np.vdot(vec, vec).real)
    if abs(norm - 1.0) > NORM_TOL:
        raise InvalidArgumentError(f"pure state is not normalized (norm^2 = {norm!r})")
    return vec


def as_density(rho, *, normalized: bool = True) -> np.ndarray:
    """Validate a 4x4 density matrix.

    With ``normalized=False`` sub-normalized states (0 < tr <= 1) are accepted.
    """
    mat = as_matrix(rho, (4, 4))
    if not np.all(np.isfinite(mat)):
        raise InvalidArgumentError("density matrix has non-finite entries")
    herm = hermiticity_error(mat)
    if herm > HERMITIAN_TOL:
        raise InvalidArgumentError(f"density matrix is not Hermitian (deviation {herm:.3g})")
    tr = float(np.trace(mat).real)
    if normalized:
        if abs(tr - 1.0) > TRACE_TOL:
            raise InvalidArgumentError(f"density matrix is not normalized (trace {tr!r})")
    elif not 0.0 < tr <= 1.0 + HERMITIAN_TOL:
        raise InvalidArgumentError(f"density matrix trace {tr!r} outside (0, 1]")
    min_eig = float(np.linalg.eigvalsh(0.5 * (mat + dagger(mat)))[0])
    if min_eig < -PSD_TOL:
        raise InvalidArgumentError(f"density matrix is not PSD (min eigenvalue {min_eig:.3g})")
    return mat


def bell_phi_theta(theta: float) -> np.ndarray:
    """(|00> + e^{i theta}|11>)/sqrt(2)."""
    if not math.isfinite(theta):
        raise InvalidArgumentError(f"theta must be finite, got {theta!r}")
    psi = np.zeros(4, dtype=complex)
    psi[0] = 1.0 / math.sqrt(2.0)
    psi[3] = complex(math.cos(theta), math.sin(theta)) / math.sqrt(2.0)
    return psi


def phi_minus() -> np.ndarray:
    return np.array([1, 0, 0, -1], dtype=complex) / math.sqrt(2.0)


def phi_plus() -> np.ndarray:
    return np.array([1, 0, 0, 1], dtype=complex) / math.sqrt(2.0)


def psi_plus() -> np.ndarray:
    return np.array([0, 1, 1, 0], dtype=complex) / math.sqrt(2.0)


def psi_minus() -> np.ndarray:
    return np.array([0, 1, -1, 0], dtype=complex) / math.sqrt(2.0)


def outer_product(psi) -> np.ndarray:
    vec = as_pure_state(psi)
    return np.outer(vec, vec.conj())


def werner(p: float, psi=None) -> np.ndarray:
    """p |psi><psi| + (1 - p) I/4, with psi defaulting to |Phi->."""
    psi = phi_minus() if psi is None else psi
    return p * outer_product(psi) + (1.0 - p) * np.eye(4, dtype=complex) / 4.0


def tensor2(a, b) -> np.ndarray:
    """Kronecker product of two 2x2 operators; ``a`` acts on the signal qubit."""
    return np.kron(as_matrix(a, (2, 2)), as_matrix(b, (2, 2)))


def apply_kraus(k, rho) -> np.ndarray:
    """K rho K^dagger.  The result may be sub-normalized."""
    k = as_matrix(k, (4, 4))
    rho = as_matrix(rho, (4, 4))
    out = k @ rho @ dagger(k)
    return 0.5 * (out + dagger(out))


def normalize(rho) -> np.ndarray:
    mat = as_matrix(rho, (4, 4))
    tr = np.trace(mat).real
    if not tr > 1e-15:
        raise DegenerateStateError(f"cannot normalize a state with trace {float(tr):.3g}")
    return mat / tr


def hermitian_eig(m) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues in descending order and the matching unitary eigenvector matrix."""
    mat = np.asarray(m, dtype=complex)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise InvalidArgumentError(f"expected a square matrix, got shape {mat.shape}")
    if hermiticity_error(mat) > 1e-8:
        raise InvalidArgumentError("matrix is not Hermitian")
    try:
        vals, vecs = np.linalg.eigh(0.5 * (mat + dagger(mat)))
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigendecomposition failed: {exc}") from exc
    return vals[::-1].copy(), vecs[:, ::-1].copy()


def sqrtm_psd(m) -> np.ndarray:
    """Principal square root of a PSD matrix.

    Eigenvalues below the round-off floor (relative to the largest) are
    zeroed before the root; otherwise 1e-17 noise on a rank-deficient input
    becomes 3e-9 after sqrt.
    """
    vals, vecs = hermitian_eig(m)
    floor = 16 * np.finfo(float).eps * max(float(vals[0]), 0.0)
    vals = np.where(vals > floor, vals, 0.0)
    return (vecs * np.sqrt(vals)) @ dagger(vecs)


def _singular_values(m: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.svd(m, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"singular value decomposition failed: {exc}") from exc


def purity(rho) -> float:
    mat = as_density(rho)
    return float(np.real(np.trace(mat @ mat)))


def fidelity_to_pure(rho, psi) -> float:
    mat = as_density(rho)
    vec = as_pure_state(psi)
    return float(np.clip(np.real(np.vdot(vec, mat @ vec)), 0.0, 1.0))


def uhlmann_fidelity(rho, sigma) -> float:
    """(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2."""
    a = as_density(rho)
    b = as_density(sigma)
    # Singular values of sqrt(a) sqrt(b) are the square roots of the
    # eigenvalues of sqrt(a) b sqrt(a), without the sqrt noise amplification.
    f = float(np.sum(_singular_values(sqrtm_psd(a) @ sqrtm_psd(b))) ** 2)
    return min(max(f, 0.0), 1.0)


def concurrence(rho) -> float:
    """Wootters concurrence of a two-qubit state.

    The lambdas are the eigenvalues of sqrt(sqrt(rho) rho_tilde sqrt(rho)),
    equivalently the singular values of sqrt(rho) sqrt(rho_tilde), so only a
    Hermitian eigensolver (for the square roots) is needed.
    """
    mat = as_density(rho)
    root = sqrtm_psd(mat)
    root_tilde = _YY @ root.conj() @ _YY
    lam = np.sort(_singular_values(root @ root_tilde))[::-1]
    return float(min(1.0, max(0.0, lam[0] - lam[1] - lam[2] - lam[3])))


def dominant_pure_state(rho) -> np.ndarray:
    """Eigenvector of the largest eigenvalue, i.e. the pure state closest to ``rho``."""
    _, vecs = hermitian_eig(as_matrix(rho, (4, 4)))
    vec = vecs[:, 0]
    # Fix the global phase so the largest amplitude is real and positive.
    k = int(np.argmax(np.abs(vec)))
    vec = vec * np.exp(-1j * np.angle(vec[k]))
    return vec / np.linalg.norm(vec)


def is_pure(rho, tol: float = 1e-10) -> bool:
    mat = as_matrix(rho, (4, 4))
    tr = np.trace(mat).real
    return abs(np.real(np.trace(mat @ mat)) / tr**2 - 1.0) < tol


def density_to_pairs(rho) -> list[list[list[float]]]:
    """Nested 4x4 list of [real, imag] pairs for structured-text output."""
    mat = as_matrix(rho, (4, 4))
    return [[[float(z.real), float(z.imag)] for z in row] for row in mat]


def density_from_pairs(pairs, *, normalized: bool = True) -> np.ndarray:
    try:
        arr = np.array(pairs, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InvalidArgumentError(f"malformed density matrix: {exc}") from exc
    if arr.shape != (4, 4, 2):
        raise InvalidArgumentError(f"density matrix must be 4x4 [re, im] pairs, got shape {arr.shape}")
    return as_density(arr[..., 0] + 1j * arr[..., 1], normalized=normalized)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a Ginibre matrix."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / math.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_pure_state(rng: np.random.Generator) -> np.ndarray:
    vec = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    return vec / np.linalg.norm(vec)


def random_density(rng: np.random.Generator, rank: int = 4) -> np.ndarray:
    g = rng.standard_normal((4, rank)) + 1j * rng.standard_normal((4, rank))
    rho = g @ dagger(g)
    return rho / np.trace(rho).real
