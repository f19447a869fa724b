"""Command-line front end.

Subcommands: simulate, closed-form, optimize, sweep, validate.  Machine output
goes to files (CSV plus a JSON metadata sidecar embedding the resolved
configuration and seed); progress goes to standard error.  Exit codes:
0 success, 2 configuration error, 3 numeric error, 4 validation failed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys

import numpy as np
import yaml

from risofdm import closedform, experiments, txchain
from risofdm.configio import ConfigError, apply_overrides, config_echo, load_raw, resolve, scenario_from_mapping
from risofdm.experiments import VERSION_STRING
from risofdm.txchain import PhaseVector

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_VALIDATION = 4


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="YAML configuration file")
    parser.add_argument("--output", required=True, help="output CSV path")
    parser.add_argument("--seed", type=int, default=0, help="root seed (echoed into outputs)")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="dotted-key override applied before validation")
    parser.add_argument("--threads", type=int, default=1, help="worker-pool cap for parallel loops")
    parser.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ris-ofdm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("simulate", "Monte Carlo per-user rates"),
        ("closed-form", "closed-form per-user rates"),
        ("optimize", "max-min RIS phase design"),
        ("sweep", "parameter sweep along one axis"),
        ("validate", "empirical validation of the closed-form ingredients"),
    ):
        _common(sub.add_parser(name, help=help_text))
    return parser


def _log(args, message: str) -> None:
    if args.verbose:
        print(message, file=sys.stderr)


def _sidecar(path: str, echo: dict, args) -> None:
    body = {
        "config": echo,
        "seed": args.seed,
        "overrides": args.overrides,
        "version": VERSION_STRING,
    }
    with open(path + ".meta.json", "w") as fh:
        json.dump(body, fh, indent=2, default=str)


def _header(echo: dict, seed: int) -> str:
    digest = hashlib.sha256(json.dumps(echo, sort_keys=True, default=str).encode()).hexdigest()[:16]
    return f"# seed={seed} config_sha256={digest} version={VERSION_STRING}\n"


def _phases_for(cfg, seed: int) -> PhaseVector:
    return PhaseVector.random(cfg.n_ris_elements, np.random.default_rng(np.random.SeedSequence(seed)))


def _cmd_simulate(args, raw) -> int:
    cfg, _ = resolve(raw, args.seed)
    section = raw.get("simulate", {})
    trials = int(section.get("trials", 2000))
    phases = _phases_for(cfg, args.seed)
    _log(args, f"simulate: {trials} trials, {args.threads} worker(s)")
    report = txchain.monte_carlo_rate(
        cfg, phases, trials=trials, seed=np.random.SeedSequence(args.seed), n_workers=args.threads
    )
    echo = config_echo(cfg)
    with open(args.output, "w") as fh:
        fh.write(_header(echo, args.seed))
        keys = list(report.to_rows()[0])
        fh.write(",".join(keys) + "\n")
        for row in report.to_rows():
            fh.write(",".join(repr(row[k]) if isinstance(row[k], float) else str(row[k]) for k in keys) + "\n")
    _sidecar(args.output, echo, args)
    return EXIT_OK


def _cmd_closed_form(args, raw) -> int:
    cfg, _ = resolve(raw, args.seed)
    phases = _phases_for(cfg, args.seed)
    echo = config_echo(cfg)
    with open(args.output, "w") as fh:
        fh.write(_header(echo, args.seed))
        fh.write("user,rate_closed_form\n")
        for n in range(cfg.n_users):
            fh.write(f"{n},{closedform.rate_theorem1(cfg, phases, n)!r}\n")
    _sidecar(args.output, echo, args)
    return EXIT_OK


def _cmd_optimize(args, raw) -> int:
    cfg, _ = resolve(raw, args.seed)
    section = raw.get("optimize", {})
    restarts = int(section.get("restarts", 3))
    rng = np.random.default_rng(np.random.SeedSequence(args.seed))
    _log(args, f"optimize: {restarts} restart(s)")
    phases, _ = experiments.optimize_phases(cfg, rng, restarts=restarts)
    echo = config_echo(cfg)
    with open(args.output, "w") as fh:
        fh.write(_header(echo, args.seed))
        fh.write("element,theta\n")
        for r, value in enumerate(phases.theta):
            fh.write(f"{r},{value!r}\n")
    _sidecar(args.output, echo, args)
    return EXIT_OK


def _cmd_sweep(args, raw) -> int:
    section = raw.get("sweep")
    if not section:
        raise ConfigError("sweep subcommand needs a 'sweep' section (axis, grid, methods)")
    if "scenario" not in raw:
        raise ConfigError("sweep runs on a 'scenario' section")
    spec = scenario_from_mapping(raw["scenario"])
    result = experiments.run_sweep(
        spec,
        axis=section["axis"],
        grid=list(section["grid"]),
        methods=tuple(section.get("methods", ["closed_form"])),
        optimize=bool(section.get("optimize", False)),
        seed=args.seed,
        n_workers=args.threads,
        phase_policy=section.get("phase_policy", "random"),
    )
    result.metadata["cli_overrides"] = args.overrides
    result.write(args.output)
    failures = [r for r in result.rows if r.method == "error"]
    for r in failures:
        _log(args, f"grid point {r.grid_value} failed: {r.note}")
    return EXIT_OK if not failures else EXIT_NUMERIC


def _cmd_validate(args, raw) -> int:
    cfg, _ = resolve(raw, args.seed)
    section = raw.get("validate", {})
    draws = int(section.get("draws", 20000))
    tol = float(section.get("moment_tol", 0.05))
    _log(args, f"validate: {draws} draws at tolerance {tol}")
    report = experiments.validate_appendix(
        cfg, draws=draws, seed=args.seed, moment_tol=tol, n_workers=args.threads
    )
    report.to_csv(args.output)
    _sidecar(args.output, config_echo(cfg), args)
    return EXIT_OK if report.all_passed else EXIT_VALIDATION


_COMMANDS = {
    "simulate": _cmd_simulate,
    "closed-form": _cmd_closed_form,
    "optimize": _cmd_optimize,
    "sweep": _cmd_sweep,
    "validate": _cmd_validate,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        raw = apply_overrides(load_raw(args.config), args.overrides)
        return _COMMANDS[args.command](args, raw)
    except (ConfigError, FileNotFoundError, yaml.YAMLError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FloatingPointError, np.linalg.LinAlgError, ZeroDivisionError, OverflowError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
