"""Command-line front end: ``uqsim {simulate,sweep,tomo-generate,tomo-fit,rlc}``.

Exit status: 0 success, 2 configuration/user error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, config as cfg, qmath, rlc, scaling, tomography
from .channel import THREADS_ENV, monte_carlo_output
from .errors import (BracketError, DegenerateStateError, InsufficientDataError, InvalidArgumentError,
                     NumericError)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3

cfg.PRESETS["appendix-c"] = {
    "rlc.inductance": 2702e-9,
    "rlc.capacitance": 41.2e-12,
    "rlc.damping_ratio": 0.7,
    "rlc.source_impedance": 50.0,
}


class UsageError(InvalidArgumentError):
    pass


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _emit(text: str, output: str | None, subcommand: str, config: dict) -> None:
    if output is None:
        sys.stdout.write(text)
        return
    path = Path(output)
    try:
        path.write_text(text)
        meta = {"tool": "uqsim", "version": __version__, "subcommand": subcommand, "config": config}
        Path(str(path) + ".meta.json").write_text(_dump_json(meta))
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc}") from exc


def _state(config: dict) -> np.ndarray:
    return qmath.bell_phi_theta(float(config.get("state.theta", math.pi)))


def _target(config: dict, args) -> np.ndarray | None:
    if getattr(args, "bell_target", False):
        return qmath.phi_minus()
    if "target.theta" in config:
        return qmath.bell_phi_theta(float(config["target.theta"]))
    return None


def _resolve(args, seed_key: str | None) -> dict:
    config = cfg.resolve(args.preset, args.config or (), args.set or ())
    if seed_key is not None and args.seed is not None:
        config[seed_key] = args.seed
    return config


def cmd_simulate(args) -> int:
    config = _resolve(args, "channel.seed")
    spec = cfg.switch_spec(config)
    psi = _state(config)
    outcome = monte_carlo_output(qmath.outer_product(psi), spec, target=_target(config, args), workers=args.threads)
    doc = {
        "spec": spec.to_dict(),
        "input_theta": float(config.get("state.theta", math.pi)),
        **outcome.to_dict(),
    }
    _emit(_dump_json(doc), args.output, "simulate", config)
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = _resolve(args, "channel.seed")
    req = cfg.sweep_request(config)
    records = scaling.run_sweep(req, workers=args.threads)
    _emit(scaling.export_csv(records, scaling.sweep_columns(req)), args.output, "sweep", config)
    return EXIT_OK


def _tomo_state(config: dict) -> np.ndarray:
    source = config.get("tomo.source", "state")
    rho = qmath.outer_product(_state(config))
    if source == "state":
        return rho
    if source == "werner":
        p = float(config.get("tomo.werner_p", 1.0))
        if not 0 <= p <= 1:
            raise UsageError(f"tomo.werner_p must lie in [0, 1], got {p}")
        return qmath.werner(p, _state(config))
    if source == "channel":
        return monte_carlo_output(rho, cfg.switch_spec(config)).rho_out
    raise UsageError(f"unknown tomo.source {source!r}; choose state, werner or channel")


def cmd_tomo_generate(args) -> int:
    config = _resolve(args, "tomo.seed")
    n = int(config.get("tomo.n_per_setting", 10_000))
    seed = int(config.get("tomo.seed", 0))
    data = tomography.simulate_counts(_tomo_state(config), n, seed, float(config.get("tomo.background", 0.0)))
    _emit(data.to_csv(), args.output, "tomo-generate", config)
    return EXIT_OK


def cmd_tomo_fit(args) -> int:
    config = _resolve(args, None)
    try:
        text = Path(args.input).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {args.input}: {exc}") from exc
    data = tomography.TomographyDataset.from_csv(text)
    missing = data.missing_settings()
    if missing:
        raise UsageError("incomplete dataset, missing settings: " + ", ".join(s + i for s, i in missing))
    result = tomography.mle_reconstruct(
        data,
        max_iters=int(config.get("tomo.max_iters", 10_000)),
        tol=float(config.get("tomo.tol", 1e-10)),
    )
    target = _target(config, args)
    target = qmath.phi_minus() if target is None else target
    doc = {
        "rho": qmath.density_to_pairs(result.rho),
        "fidelity": qmath.fidelity_to_pure(result.rho, target),
        "purity": qmath.purity(result.rho),
        "concurrence": qmath.concurrence(result.rho),
        "target_state": [[float(z.real), float(z.imag)] for z in target],
        "log_likelihood": result.log_likelihood,
        "iterations": result.iterations,
        "converged": result.converged,
    }
    _emit(_dump_json(doc), args.output, "tomo-fit", config)
    return EXIT_OK


def cmd_rlc(args) -> int:
    config = _resolve(args, None)
    band = float(config.get("rlc.band", 0.02))
    report: dict = {}
    if args.trace:
        try:
            trace = rlc.StepTrace.from_csv(Path(args.trace).read_text())
        except OSError as exc:
            raise UsageError(f"cannot read {args.trace}: {exc}") from exc
        zeta, f_ring = rlc.extract_damping(trace)
        report.update({"measured_damping_ratio": zeta, "measured_f_ring_hz": f_ring})
        if "rlc.pre_damping_resistance" in config:
            L, C = rlc.estimate_lc(f_ring, rlc.decay_rate(zeta, f_ring), float(config["rlc.pre_damping_resistance"]))
            config = {**config, "rlc.inductance": L, "rlc.capacitance": C}
    if "rlc.inductance" in config or "rlc.capacitance" in config:
        report.update(rlc.design_report(cfg.rlc_params(config), band))
    elif not report:
        raise UsageError("rlc needs rlc.inductance and rlc.capacitance (or --preset appendix-c, or --trace)")
    text = "".join(f"{k} = {v!r}\n" for k, v in report.items())
    _emit(text, args.output, "rlc", config)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uqsim", description="Quantum switch channel simulator.")
    parser.add_argument("--version", action="version", version=f"uqsim {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p, seed: bool = True):
        p.add_argument("--preset", help=f"built-in configuration ({', '.join(sorted(cfg.PRESETS))})")
        p.add_argument("--config", action="append", metavar="FILE", help="TOML (or metadata JSON) config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override, e.g. channel.pdl_db=0.5")
        p.add_argument("-o", "--output", help="output file (default stdout)")
        p.add_argument("--threads", type=int, default=None,
                       help=f"worker threads (default ${THREADS_ENV} or 1); never changes results")
        if seed:
            p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("simulate", help="run the switch channel on |Phi^theta>")
    common(p)
    p.add_argument("--bell-target", action="store_true", help="fidelity against |Phi-> instead of the input")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="parameter sweep to CSV (presets fig5a, fig5b, fig5c)")
    common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("tomo-generate", help="synthetic 36-setting coincidence counts")
    common(p)
    p.set_defaults(func=cmd_tomo_generate)

    p = sub.add_parser("tomo-fit", help="maximum-likelihood reconstruction from a counts table")
    common(p, seed=False)
    p.add_argument("--input", required=True, help="CSV with columns signal_basis, idler_basis, count")
    p.add_argument("--bell-target", action="store_true", help="fidelity against |Phi-> (the default target)")
    p.set_defaults(func=cmd_tomo_fit)

    p = sub.add_parser("rlc", help="drive-circuit damping design")
    common(p, seed=False)
    p.add_argument("--trace", help="two-column step trace (time_s, volts) to extract damping from")
    p.set_defaults(func=cmd_rlc)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads is not None and args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        return args.func(args)
    except (InvalidArgumentError, BracketError, InsufficientDataError) as exc:
        print(f"uqsim {args.subcommand}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericError, DegenerateStateError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"uqsim {args.subcommand}: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
