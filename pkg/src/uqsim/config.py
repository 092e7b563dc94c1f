"""Run configuration: flat dotted keys from TOML/JSON files, presets and overrides.

A config is a flat mapping such as ``{"channel.per_db_0": 23.25,
"state.theta": -1.539}``.  Nested TOML tables are flattened, so
``[channel]\\nper_db_0 = 23.25`` and ``"channel.per_db_0" = 23.25`` are
equivalent.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .channel import SwitchSpec
from .errors import InvalidArgumentError
from .qmath import bell_phi_theta
from .rlc import RlcParams
from .scaling import METRICS, LossBudget, SweepRequest

SECTIONS = {
    "channel": set(SwitchSpec.field_names()),
    "budget": set(LossBudget.field_names()),
    "state": {"theta"},
    "target": {"theta"},
    "sweep": {"axis1", "values1", "axis2", "values2", "metrics"},
    "tomo": {"source", "werner_p", "n_per_setting", "seed", "background", "max_iters", "tol"},
    "rlc": {"inductance", "capacitance", "damping_ratio", "source_impedance", "band",
            "pre_damping_resistance"},
}

_T1_COMMON = {
    "channel.er_mzi_db": 32.24,
    "channel.dimension_n": 2,
    "channel.coupling_db": 1.87,
    "channel.phase_sigma_rad": 0.04,
    "channel.mc_iterations": 10_000,
    "channel.seed": 20251,
    "state.theta": math.pi,
}

PRESETS: dict[str, dict] = {
    "ideal": {"state.theta": math.pi},
    # Measured PRS figures; the non-coupling insertion loss is split evenly
    # over the two PRS passes.
    "table1-output1": {**_T1_COMMON, "channel.per_db_0": 23.25, "channel.per_db_1": 24.79,
                       "channel.pdl_db": 3.50, "channel.prs_loss_db": 0.77},
    "table1-output2": {**_T1_COMMON, "channel.per_db_0": 19.36, "channel.per_db_1": 19.69,
                       "channel.pdl_db": 3.30, "channel.prs_loss_db": 0.715},
    "to-switching": {**_T1_COMMON, "channel.per_db_0": 23.25, "channel.per_db_1": 24.79,
                     "channel.pdl_db": 3.50, "channel.prs_loss_db": 0.77,
                     "state.theta": -0.49 * math.pi},
    "eo-switching": {**_T1_COMMON, "channel.per_db_0": 23.25, "channel.per_db_1": 24.79,
                     "channel.pdl_db": 3.50, "channel.prs_loss_db": 0.77,
                     "state.theta": -0.58 * math.pi},
    "fig5a": {"sweep.axis1": "pdl_db",
              "sweep.values1": [round(0.05 * k, 2) for k in range(0, 71)],
              "sweep.metrics": ["fidelity", "purity", "concurrence"]},
    "fig5b": {"sweep.axis1": "per_db", "sweep.values1": [float(v) for v in range(15, 41)],
              "sweep.axis2": "er_mzi_db", "sweep.values2": [float(v) for v in range(20, 41, 2)],
              "sweep.metrics": ["fidelity", "purity", "concurrence"]},
    "fig5c": {"channel.er_mzi_db": 32.24, "sweep.axis1": "dimension_n",
              "sweep.values1": [2**k for k in range(1, 11)],
              "sweep.metrics": ["fidelity", "insertion_loss_db"]},
}


def flatten(mapping: dict, prefix: str = "") -> dict:
    flat = {}
    for key, value in mapping.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(flatten(value, name + "."))
        else:
            flat[name] = value
    return flat


def check_keys(flat: dict) -> None:
    for key in flat:
        section, _, name = key.partition(".")
        if section not in SECTIONS or name not in SECTIONS[section]:
            raise InvalidArgumentError(f"unknown config key {key!r}")


def load_file(path: str | Path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InvalidArgumentError(f"cannot read config {path}: {exc}") from exc
    try:
        if path.suffix == ".json":
            data = json.loads(text)
            # A metadata record from a previous run replays its config.
            if isinstance(data, dict) and isinstance(data.get("config"), dict):
                data = data["config"]
        else:
            data = tomllib.loads(text)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise InvalidArgumentError(f"cannot parse config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise InvalidArgumentError(f"config {path} must be a table of keys")
    flat = flatten(data)
    check_keys(flat)
    return flat


def parse_override(item: str) -> tuple[str, object]:
    key, sep, raw = item.partition("=")
    key = key.strip()
    if not sep or not key:
        raise InvalidArgumentError(f"override {item!r} is not of the form key=value")
    raw = raw.strip()
    try:
        value = tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw
    check_keys({key: value})
    return key, value


def resolve(preset: str | None = None, files=(), overrides=()) -> dict:
    """Merge preset < files < overrides into one flat config."""
    config: dict = {}
    if preset is not None:
        if preset not in PRESETS:
            raise InvalidArgumentError(f"unknown preset {preset!r}; choose from {', '.join(sorted(PRESETS))}")
        config.update(PRESETS[preset])
    for path in files:
        config.update(load_file(path))
    for item in overrides:
        key, value = parse_override(item)
        config[key] = value
    return config


def section(config: dict, name: str) -> dict:
    prefix = name + "."
    return {k[len(prefix):]: v for k, v in config.items() if k.startswith(prefix)}


def switch_spec(config: dict) -> SwitchSpec:
    values = section(config, "channel")
    try:
        return SwitchSpec.from_mapping(values)
    except TypeError as exc:
        raise InvalidArgumentError(str(exc)) from exc


def loss_budget(config: dict, dimension_n: int | None = None) -> LossBudget:
    values = section(config, "budget")
    if dimension_n is not None and "dimension_n" not in values:
        values["dimension_n"] = dimension_n
    for key in ("waveguide_loss_db_per_cm", "stage_length_cm", "coupler_loss_db_per_facet"):
        if isinstance(values.get(key), int):
            values[key] = float(values[key])
    return LossBudget(**values)


def sweep_request(config: dict) -> SweepRequest:
    values = section(config, "sweep")
    if "axis1" not in values or "values1" not in values:
        raise InvalidArgumentError("sweep needs sweep.axis1 and sweep.values1")
    spec = switch_spec(config)
    axis2 = None
    if "axis2" in values or "values2" in values:
        if "axis2" not in values or "values2" not in values:
            raise InvalidArgumentError("sweep.axis2 and sweep.values2 must be given together")
        axis2 = (str(values["axis2"]), tuple(values["values2"]))
    metrics = tuple(values.get("metrics", ("fidelity", "purity", "concurrence", "throughput")))
    if any(m not in METRICS for m in metrics):
        raise InvalidArgumentError(f"unknown metric in {metrics}; choose from {METRICS}")
    theta = float(config.get("state.theta", math.pi))
    return SweepRequest(
        base_spec=spec,
        axis1=(str(values["axis1"]), tuple(values["values1"])),
        axis2=axis2,
        metrics=metrics,
        budget=loss_budget(config, spec.dimension_n),
        input_state=tuple(bell_phi_theta(theta)),
    )


def rlc_params(config: dict) -> RlcParams:
    values = section(config, "rlc")
    missing = [k for k in ("inductance", "capacitance") if k not in values]
    if missing:
        raise InvalidArgumentError(f"rlc needs {', '.join('rlc.' + k for k in missing)}")
    return RlcParams(
        inductance=float(values["inductance"]),
        capacitance=float(values["capacitance"]),
        damping_ratio=float(values.get("damping_ratio", 0.7)),
        source_impedance=float(values.get("source_impedance", 50.0)),
    )
