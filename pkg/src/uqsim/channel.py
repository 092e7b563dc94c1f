"""Hardware-impairment channel of the switch acting on the signal photon.

A photon's logical rails pass input PRS -> switch matrix (depth D MZIs) with
phase compensator -> output PRS.  Every component is a 2x2 Jones matrix on
the logical {|0>, |1>} pair; the finite MZI extinction ratio splits the
output into three weighted outcomes (both rails survive, only rail 0, only
rail 1).  Gaussian phase noise on rail 1 is averaged by Monte Carlo.
"""

from __future__ import annotations

import dataclasses
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import qmath
from .errors import InvalidArgumentError

# Iterations are drawn in fixed-size blocks, each from its own substream
# keyed by (seed, block index), so results never depend on worker count.
MC_BLOCK = 8192
THREADS_ENV = "UQSIM_THREADS"

_PROJ0 = np.diag([1.0, 0.0]).astype(complex)
_PROJ1 = np.diag([0.0, 1.0]).astype(complex)


def _is_power_of_two(n: int) -> bool:
    return isinstance(n, (int, np.integer)) and n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class SwitchSpec:
    """Full parameterization of the switch channel.

    All losses and extinction ratios are in dB.  ``math.inf`` is the ideal
    value for ``per_db_*`` and ``er_mzi_db``; 0 is ideal for the loss terms.
    """

    per_db_0: float = math.inf
    per_db_1: float = math.inf
    pdl_db: float = 0.0
    coupling_db: float = 0.0
    prs_loss_db: float = 0.0
    mzi_loss_db: float = 0.0
    er_mzi_db: float = math.inf
    dimension_n: int = 2
    phase_offset_rad: float = 0.0
    phase_sigma_rad: float = 0.0
    mc_iterations: int = 1
    seed: int = 0

    def __post_init__(self):
        for name in ("per_db_0", "per_db_1", "pdl_db", "coupling_db", "prs_loss_db", "mzi_loss_db", "er_mzi_db"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)) or math.isnan(value) or value < 0:
                raise InvalidArgumentError(f"{name} must be a non-negative number of dB, got {value!r}")
        for name in ("per_db_0", "per_db_1", "er_mzi_db"):
            if getattr(self, name) == 0:
                raise InvalidArgumentError(f"{name} must be > 0 dB")
        if not _is_power_of_two(self.dimension_n) or self.dimension_n < 2:
            raise InvalidArgumentError(f"dimension_n must be a power of 2 >= 2, got {self.dimension_n!r}")
        if not math.isfinite(self.phase_offset_rad):
            raise InvalidArgumentError("phase_offset_rad must be finite")
        if not (math.isfinite(self.phase_sigma_rad) and self.phase_sigma_rad >= 0):
            raise InvalidArgumentError(f"phase_sigma_rad must be >= 0, got {self.phase_sigma_rad!r}")
        if isinstance(self.mc_iterations, bool) or not isinstance(self.mc_iterations, (int, np.integer)) \
                or self.mc_iterations < 1:
            raise InvalidArgumentError(f"mc_iterations must be an integer >= 1, got {self.mc_iterations!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)) or not 0 <= self.seed < 2**64:
            raise InvalidArgumentError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")

    def replace(self, **changes) -> SwitchSpec:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in dataclasses.fields(cls))

    @classmethod
    def from_mapping(cls, mapping: dict) -> SwitchSpec:
        unknown = set(mapping) - set(cls.field_names())
        if unknown:
            raise InvalidArgumentError(f"unknown SwitchSpec field(s): {', '.join(sorted(unknown))}")
        coerced = {}
        for f in dataclasses.fields(cls):
            if f.name not in mapping:
                continue
            value = mapping[f.name]
            if f.type == "int" and isinstance(value, float) and value.is_integer():
                value = int(value)
            elif f.type == "float" and isinstance(value, int) and not isinstance(value, bool):
                value = float(value)
            coerced[f.name] = value
        return cls(**coerced)


@dataclass
class ChannelOutcome:
    rho_out: np.ndarray
    throughput: float
    fidelity: float
    purity: float
    concurrence: float
    target: np.ndarray = field(repr=False, default=None)

    def to_dict(self) -> dict:
        out = {
            "throughput": self.throughput,
            "fidelity": self.fidelity,
            "purity": self.purity,
            "concurrence": self.concurrence,
            "rho_out": qmath.density_to_pairs(self.rho_out),
        }
        if self.target is not None:
            out["target_state"] = [[float(z.real), float(z.imag)] for z in self.target]
        return out


def db_to_linear_loss(x_db: float) -> float:
    """Power transmission 10^(-x/10) of a loss given in dB."""
    if not x_db >= 0:
        raise InvalidArgumentError(f"loss in dB must be >= 0, got {x_db!r}")
    return 10.0 ** (-x_db / 10.0)


def per_to_epsilon(per_db: float) -> float:
    """Crosstalk amplitude for a polarization extinction ratio.

    PER is a power ratio, so the leaked amplitude is 10^(-PER/20).
    """
    if not per_db > 0:
        raise InvalidArgumentError(f"PER must be > 0 dB, got {per_db!r}")
    return 10.0 ** (-per_db / 20.0)


def switch_depth(n: int) -> int:
    """Number of MZIs on a path through an N-port Benes network."""
    if not _is_power_of_two(n) or n < 2:
        raise InvalidArgumentError(f"switch dimension must be a power of 2 >= 2, got {n!r}")
    return 2 * (int(n).bit_length() - 1) - 1


def j_loss(spec: SwitchSpec) -> np.ndarray:
    common = db_to_linear_loss(spec.coupling_db) * db_to_linear_loss(spec.prs_loss_db)
    return np.diag([math.sqrt(common), math.sqrt(common * db_to_linear_loss(spec.pdl_db))]).astype(complex)


def j_leak(epsilon: float, epsilon_1: float | None = None) -> np.ndarray:
    """PRS crosstalk matrix.

    With a single argument this is the symmetric [[c, e], [e, c]].  With two,
    column k describes logical mode k leaking amplitude ``eps_k`` into the
    other rail, which reduces to the symmetric form when they are equal.
    """
    eps0 = epsilon
    eps1 = epsilon if epsilon_1 is None else epsilon_1
    for e in (eps0, eps1):
        if not 0.0 <= e < 1.0:
            raise InvalidArgumentError(f"crosstalk amplitude must lie in [0, 1), got {e!r}")
    return np.array(
        [[math.sqrt(1.0 - eps0**2), eps1], [eps0, math.sqrt(1.0 - eps1**2)]],
        dtype=complex,
    )


def j_mzi(a: float, phi: float) -> np.ndarray:
    if not 0.0 < a <= 1.0:
        raise InvalidArgumentError(f"MZI efficiency amplitude must lie in (0, 1], got {a!r}")
    return np.diag([a, a * complex(math.cos(phi), math.sin(phi))])


def mzi_amplitude(spec: SwitchSpec) -> float:
    """a = sqrt(eta_mzi^D)."""
    return 10.0 ** (-spec.mzi_loss_db * switch_depth(spec.dimension_n) / 20.0)


def success_probability(spec: SwitchSpec) -> float:
    """p_s = (1 - ER)^D with ER the linear leakage of one MZI."""
    er_linear = 10.0 ** (-spec.er_mzi_db / 10.0)
    return (1.0 - er_linear) ** switch_depth(spec.dimension_n)


def outcome_probabilities(spec: SwitchSpec) -> tuple[float, float, float]:
    p_s = success_probability(spec)
    return p_s * p_s, p_s * (1.0 - p_s), p_s * (1.0 - p_s)


def _epsilons(spec: SwitchSpec) -> tuple[float, float]:
    return per_to_epsilon(spec.per_db_0), per_to_epsilon(spec.per_db_1)


def _chain(spec: SwitchSpec, leak: np.ndarray, phi: float) -> np.ndarray:
    loss = j_loss(spec)
    return loss @ leak @ j_mzi(mzi_amplitude(spec), phi) @ leak @ loss


def branch_operators(spec: SwitchSpec, phi: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Signal-qubit Jones operators (J_both, J_0, J_1) for one phase sample.

    The single-rail branches are preceded by the projector onto the
    surviving rail; rail 0 carries no phase, rail 1 carries ``phi``.
    """
    eps0, eps1 = _epsilons(spec)
    both = _chain(spec, j_leak(eps0, eps1), phi)
    only0 = _chain(spec, j_leak(eps0), 0.0) @ _PROJ0
    only1 = _chain(spec, j_leak(eps1), phi) @ _PROJ1
    return both, only0, only1


def apply_switch_once(rho_in, spec: SwitchSpec, phi: float) -> np.ndarray:
    """Unnormalized P1 rho_both + P2 rho_0 + P3 rho_1 for a single phase sample."""
    rho = qmath.as_density(rho_in)
    p1, p2, p3 = outcome_probabilities(spec)
    out = np.zeros((4, 4), dtype=complex)
    for weight, jones in zip((p1, p2, p3), branch_operators(spec, phi)):
        if weight:
            out += weight * qmath.apply_kraus(qmath.tensor2(jones, qmath.I2), rho)
    return out


def _phase_split(spec: SwitchSpec, leak: np.ndarray, right: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Write the chain as X + e^{i phi} Y (both lifted to 4x4).

    J_MZI(phi) = a (|0><0| + e^{i phi} |1><1|), so the chain splits into the
    rail-0 and rail-1 terms of the middle matrix.
    """
    loss = j_loss(spec)
    a = mzi_amplitude(spec)
    left = loss @ leak
    rest = leak @ loss @ right
    x = a * np.outer(left[:, 0], rest[0, :])
    y = a * np.outer(left[:, 1], rest[1, :])
    return qmath.tensor2(x, qmath.I2), qmath.tensor2(y, qmath.I2)


def _dephased(x: np.ndarray, y: np.ndarray, rho: np.ndarray, mean_phase: complex) -> np.ndarray:
    """E[(X + e^{i phi} Y) rho (X + e^{i phi} Y)^dagger] given E[e^{i phi}]."""
    xr = x @ rho
    yr = y @ rho
    cross = mean_phase * (yr @ qmath.dagger(x))
    out = xr @ qmath.dagger(x) + yr @ qmath.dagger(y) + cross + qmath.dagger(cross)
    return 0.5 * (out + qmath.dagger(out))


def _block_phase_sum(seed: int, block: int, count: int, offset: float, sigma: float) -> complex:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(block,))
    rng = np.random.Generator(np.random.Philox(ss))
    phis = offset + sigma * rng.standard_normal(count)
    return complex(np.sum(np.exp(1j * phis)))


def default_workers() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise InvalidArgumentError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None


def mean_phase_factor(spec: SwitchSpec, workers: int | None = None) -> complex:
    """Monte-Carlo estimate of E[e^{i phi}] over ``spec.mc_iterations`` samples.

    Block sums are reduced in block order, so the value is bit-identical for
    any number of workers.
    """
    m = spec.mc_iterations
    if spec.phase_sigma_rad == 0.0:
        return complex(math.cos(spec.phase_offset_rad), math.sin(spec.phase_offset_rad))
    blocks = [(b, min(MC_BLOCK, m - b * MC_BLOCK)) for b in range((m + MC_BLOCK - 1) // MC_BLOCK)]
    workers = default_workers() if workers is None else max(1, int(workers))

    def run(item):
        b, count = item
        return _block_phase_sum(spec.seed, b, count, spec.phase_offset_rad, spec.phase_sigma_rad)

    if workers == 1 or len(blocks) == 1:
        sums = [run(item) for item in blocks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            sums = list(pool.map(run, blocks))
    total = 0j
    for s in sums:
        total += s
    return total / m


def phase_samples(spec: SwitchSpec) -> np.ndarray:
    """The exact phase samples the Monte Carlo uses, in iteration order."""
    m = spec.mc_iterations
    if spec.phase_sigma_rad == 0.0:
        return np.full(m, spec.phase_offset_rad)
    chunks = []
    for b in range((m + MC_BLOCK - 1) // MC_BLOCK):
        count = min(MC_BLOCK, m - b * MC_BLOCK)
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=spec.seed, spawn_key=(b,))))
        chunks.append(spec.phase_offset_rad + spec.phase_sigma_rad * rng.standard_normal(count))
    return np.concatenate(chunks)


def mixture(rho_in, spec: SwitchSpec, mean_phase: complex) -> np.ndarray:
    """Phase-averaged unnormalized output for a given E[e^{i phi}]."""
    rho = qmath.as_density(rho_in)
    eps0, eps1 = _epsilons(spec)
    p1, p2, p3 = outcome_probabilities(spec)
    ident = np.eye(2, dtype=complex)
    out = p1 * _dephased(*_phase_split(spec, j_leak(eps0, eps1), ident), rho, mean_phase)
    if p2:
        x0, y0 = _phase_split(spec, j_leak(eps0), _PROJ0)
        out = out + p2 * _dephased(x0, y0, rho, 1.0)
    if p3:
        out = out + p3 * _dephased(*_phase_split(spec, j_leak(eps1), _PROJ1), rho, mean_phase)
    return out


def fidelity_target(rho_in) -> np.ndarray:
    """The input itself when pure, otherwise its dominant eigenvector."""
    rho = qmath.as_density(rho_in)
    return qmath.dominant_pure_state(rho)


def monte_carlo_output(rho_in, spec: SwitchSpec, *, target=None, workers: int | None = None) -> ChannelOutcome:
    """Average the channel over ``spec.mc_iterations`` Gaussian phase samples.

    Because every branch operator is affine in e^{i phi}, the average of
    K rho K^dagger over the samples only needs the sample mean of e^{i phi};
    the result equals the explicit per-sample sum up to round-off.
    """
    rho = qmath.as_density(rho_in)
    raw = mixture(rho, spec, mean_phase_factor(spec, workers))
    throughput = float(np.trace(raw).real)
    rho_out = qmath.as_density(qmath.normalize(raw))
    target = fidelity_target(rho) if target is None else qmath.as_pure_state(target)
    return ChannelOutcome(
        rho_out=rho_out,
        throughput=throughput,
        fidelity=qmath.fidelity_to_pure(rho_out, target),
        purity=qmath.purity(rho_out),
        concurrence=qmath.concurrence(rho_out),
        target=target,
    )


def monte_carlo_output_explicit(rho_in, spec: SwitchSpec) -> np.ndarray:
    """Reference path: unnormalized (1/M) sum_j apply_switch_once(rho_in, spec, phi_j)."""
    raw = np.zeros((4, 4), dtype=complex)
    for phi in phase_samples(spec):
        raw += apply_switch_once(rho_in, spec, float(phi))
    raw /= spec.mc_iterations
    return raw
