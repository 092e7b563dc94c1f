"""Parameter sweeps, fidelity thresholds and insertion-loss budgets."""

from __future__ import annotations

import csv
import dataclasses
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from . import qmath
from .channel import SwitchSpec, default_workers, monte_carlo_output, switch_depth
from .errors import BracketError, InvalidArgumentError

METRICS = ("fidelity", "purity", "concurrence", "throughput", "insertion_loss_db")

# Sweepable names that are not SwitchSpec fields: "per_db" drives both PER
# fields together.
PER_ALIAS = "per_db"


@dataclass(frozen=True)
class LossBudget:
    waveguide_loss_db_per_cm: float = 0.2
    # Path length per MZI stage; ~40 cm total over the 19 stages of N=1024.
    stage_length_cm: float = 2.1
    coupler_loss_db_per_facet: float = 1.87
    facets: int = 2
    dimension_n: int = 1024

    def __post_init__(self):
        for name in ("waveguide_loss_db_per_cm", "stage_length_cm", "coupler_loss_db_per_facet"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value >= 0):
                raise InvalidArgumentError(f"{name} must be a finite non-negative number, got {value!r}")
        if not isinstance(self.facets, int) or self.facets < 0:
            raise InvalidArgumentError(f"facets must be a non-negative integer, got {self.facets!r}")
        switch_depth(self.dimension_n)

    def replace(self, **changes) -> LossBudget:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in dataclasses.fields(cls))


def insertion_loss(budget: LossBudget) -> float:
    """Coupler floor plus waveguide loss over the D = 2 log2 N - 1 stages, in dB."""
    floor = budget.facets * budget.coupler_loss_db_per_facet
    waveguide = switch_depth(budget.dimension_n) * budget.stage_length_cm * budget.waveguide_loss_db_per_cm
    return floor + waveguide


@dataclass(frozen=True)
class SweepRequest:
    base_spec: SwitchSpec
    axis1: tuple[str, tuple]
    axis2: tuple[str, tuple] | None = None
    metrics: tuple[str, ...] = ("fidelity", "purity", "concurrence", "throughput")
    budget: LossBudget = field(default_factory=LossBudget)
    input_state: tuple | None = None

    def __post_init__(self):
        axes = [self.axis1] if self.axis2 is None else [self.axis1, self.axis2]
        for name, values in axes:
            _check_axis(name, values)
        if self.axis2 is not None and self.axis1[0] == self.axis2[0]:
            raise InvalidArgumentError(f"both sweep axes name {self.axis1[0]!r}")
        bad = [m for m in self.metrics if m not in METRICS]
        if bad or not self.metrics:
            raise InvalidArgumentError(f"unknown or empty metric set: {bad or self.metrics}")

    def axes(self) -> list[tuple[str, tuple]]:
        return [self.axis1] if self.axis2 is None else [self.axis1, self.axis2]


def _sweepable() -> set[str]:
    return set(SwitchSpec.field_names()) | set(LossBudget.field_names()) | {PER_ALIAS}


def _check_axis(name: str, values) -> None:
    if name not in _sweepable():
        raise InvalidArgumentError(f"unknown sweep parameter {name!r}")
    values = list(values)
    if not values:
        raise InvalidArgumentError(f"sweep axis {name!r} has no values")
    if any(b < a for a, b in zip(values, values[1:])):
        raise InvalidArgumentError(f"sweep axis {name!r} values must be sorted ascending")


def apply_parameter(spec: SwitchSpec, budget: LossBudget, name: str, value) -> tuple[SwitchSpec, LossBudget]:
    """Set one named parameter on whichever of (spec, budget) owns it.

    ``dimension_n`` is shared and updates both.
    """
    if name not in _sweepable():
        raise InvalidArgumentError(f"unknown parameter {name!r}")
    if name == PER_ALIAS:
        return spec.replace(per_db_0=float(value), per_db_1=float(value)), budget
    if name == "dimension_n":
        n = int(value)
        return spec.replace(dimension_n=n), budget.replace(dimension_n=n)
    if name in SwitchSpec.field_names():
        kind = {f.name: f.type for f in dataclasses.fields(SwitchSpec)}[name]
        return spec.replace(**{name: int(value) if kind == "int" else float(value)}), budget
    kind = {f.name: f.type for f in dataclasses.fields(LossBudget)}[name]
    return spec, budget.replace(**{name: int(value) if kind == "int" else float(value)})


def _evaluate(spec: SwitchSpec, budget: LossBudget, metrics, rho_in) -> dict:
    record = {}
    need_channel = any(m != "insertion_loss_db" for m in metrics)
    outcome = monte_carlo_output(rho_in, spec, workers=1) if need_channel else None
    for m in metrics:
        if m == "insertion_loss_db":
            record[m] = insertion_loss(budget)
        else:
            record[m] = getattr(outcome, m)
    return record


def run_sweep(req: SweepRequest, workers: int | None = None) -> list[dict]:
    """Evaluate every grid point; records come back in row-major grid order.

    Point k runs with seed = base seed XOR k.
    """
    rho_in = qmath.outer_product(qmath.phi_minus() if req.input_state is None else req.input_state)
    axes = req.axes()
    points = []
    if len(axes) == 1:
        for v in axes[0][1]:
            points.append(((axes[0][0], v),))
    else:
        for v1 in axes[0][1]:
            for v2 in axes[1][1]:
                points.append(((axes[0][0], v1), (axes[1][0], v2)))

    def run(indexed):
        k, assignment = indexed
        spec, budget = req.base_spec, req.budget
        for name, value in assignment:
            spec, budget = apply_parameter(spec, budget, name, value)
        spec = spec.replace(seed=req.base_spec.seed ^ k)
        record = {name: value for name, value in assignment}
        record.update(_evaluate(spec, budget, req.metrics, rho_in))
        return record

    workers = default_workers() if workers is None else max(1, int(workers))
    items = list(enumerate(points))
    if workers == 1:
        return [run(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, items))


def model_fidelity(spec: SwitchSpec, rho_in=None) -> float:
    """Deterministic fidelity: phase noise removed, single iteration."""
    rho_in = qmath.outer_product(qmath.phi_minus()) if rho_in is None else rho_in
    quiet = spec.replace(phase_sigma_rad=0.0, mc_iterations=1)
    return monte_carlo_output(rho_in, quiet).fidelity


def find_threshold(
    spec: SwitchSpec,
    parameter: str,
    target_fidelity: float,
    bracket: tuple[float, float],
    xtol: float = 1e-3,
) -> float:
    """Bisect for the parameter value where the fidelity crosses the target."""
    lo, hi = (float(b) for b in bracket)
    if not lo < hi:
        raise InvalidArgumentError(f"bracket must satisfy lo < hi, got {bracket!r}")
    budget = LossBudget()

    def excess(x: float) -> float:
        trial, _ = apply_parameter(spec, budget, parameter, x)
        return model_fidelity(trial) - target_fidelity

    f_lo, f_hi = excess(lo), excess(hi)
    if not f_lo * f_hi < 0:
        raise BracketError(
            f"fidelity - {target_fidelity} does not change sign over [{lo}, {hi}] "
            f"(values {f_lo:.3g}, {f_hi:.3g})"
        )
    while hi - lo >= xtol:
        mid = 0.5 * (lo + hi)
        f_mid = excess(mid)
        if f_mid == 0:
            return mid
        if (f_mid < 0) == (f_lo < 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def fidelity_vs_dimension(spec: SwitchSpec, n_values, budget: LossBudget | None = None) -> list[dict]:
    budget = LossBudget() if budget is None else budget
    records = []
    for n in n_values:
        trial, trial_budget = apply_parameter(spec, budget, "dimension_n", n)
        records.append({
            "dimension_n": int(n),
            "fidelity": model_fidelity(trial),
            "insertion_loss_db": insertion_loss(trial_budget),
        })
    return records


def export_csv(records: list[dict], columns: list[str] | None = None) -> str:
    """CSV text with a header row; floats written with repr() precision."""
    if columns is None:
        columns = list(records[0]) if records else []
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for rec in records:
        writer.writerow([repr(float(rec[c])) if isinstance(rec[c], float) else rec[c] for c in columns])
    return buf.getvalue()


def sweep_columns(req: SweepRequest) -> list[str]:
    return [name for name, _ in req.axes()] + list(req.metrics)
