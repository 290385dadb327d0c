"""Command-line entry point.

Every subcommand builds (or loads) one instance, does its job and writes
either JSON or CSV to ``--out`` (stdout when omitted). Failures exit with
status 1 and a one-line JSON error record on stderr.
"""
from __future__ import annotations

import argparse
import json
import sys

from .augment import build_augmented_pa
from .gain import SynthesisError, closed_loop_augmented, stability_report
from .harness import (ConfigError, DelaySpec, ExperimentConfig, build_instance, instance_document,
                      load_config, load_document, run_montecarlo, simulate_once, with_gain,
                      write_mse_csv)
from .linalg import spectral_radius
from .model import assign_delays, dumps
from .observability import dbar_c
from .suites import run_all


def _parse_taus(text: str) -> list[int]:
    try:
        taus = [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad delay list {text!r}") from exc
    if not taus or any(t < 0 for t in taus):
        raise argparse.ArgumentTypeError("delays must be a nonempty list of nonnegative integers")
    return taus


def _parse_delay_specs(text: str) -> list[DelaySpec]:
    """``3,8,heterogeneous:8``; a bare number means a homogeneous delay."""
    specs = []
    for item in (t.strip() for t in text.split(",")):
        if not item:
            continue
        mode, _, tau = item.rpartition(":")
        try:
            specs.append(DelaySpec(mode or "homogeneous", int(tau)))
        except ValueError as exc:
            raise argparse.ArgumentTypeError(f"bad delay spec {item!r}") from exc
    if not specs:
        raise argparse.ArgumentTypeError("empty delay list")
    return specs


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(json.dumps({"error": "UsageError", "message": message}) + "\n")
        sys.exit(2)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="delayest",
                     description="Consensus state estimation with link delays.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, delays=False):
        p.add_argument("--config", help="JSON experiment config (flat keys)")
        p.add_argument("--instance", help="instance document written by generate or design")
        p.add_argument("--seed", type=_seed, help="master seed (overrides the config)")
        p.add_argument("--out", help="output file (default stdout)")
        p.add_argument("--workers", type=int, help="worker processes (output does not depend on it)")
        if delays:
            p.add_argument("--tau", type=_parse_delay_specs,
                           help="delay specs, e.g. 0,3,8,heterogeneous:8")
            p.add_argument("--trials", type=int)
            p.add_argument("--horizon", type=int)

    common(sub.add_parser("generate", help="emit plant, network and delay profiles"), delays=True)
    common(sub.add_parser("design", help="synthesize the gain and its stability report"), delays=True)
    p = sub.add_parser("analyze", help="spectral radius, tau*, bounds and rates for a delay list")
    common(p)
    p.add_argument("--tau", type=_parse_taus, default=[0, 3, 8, 19])
    p = sub.add_parser("simulate", help="single run, per-step MSE CSV")
    common(p, delays=True)
    p.add_argument("--path", choices=("distributed", "augmented"), default="distributed")
    common(sub.add_parser("montecarlo", help="full experiment, MSE CSV"), delays=True)
    p = sub.add_parser("verify", help="run the randomized property suites")
    p.add_argument("--seeds", type=int, default=50, help="random cases per suite")
    p.add_argument("--seed", type=_seed, default=0)
    return parser


def _config(args) -> ExperimentConfig:
    config = load_config(args.config) if args.config else ExperimentConfig()
    changes = {"seed": args.seed}
    for name in ("trials", "horizon"):
        changes[name] = getattr(args, name, None)
    tau = getattr(args, "tau", None)
    if tau is not None and not isinstance(tau[0], int):
        changes["delays"] = [{"mode": d.mode, "tau_bar": d.tau_bar} for d in tau]
    return config.replace(**changes)


def _instance(args, design: bool):
    """Config and instance from ``--instance`` when given, else freshly generated."""
    if args.instance:
        config, inst = load_document(args.instance)
        if args.seed is not None or getattr(args, "tau", None) and not isinstance(args.tau[0], int):
            raise ConfigError("--seed and delay specs cannot be combined with --instance")
        for name in ("trials", "horizon"):
            if getattr(args, name, None) is not None:
                config = config.replace(**{name: getattr(args, name)})
        if design and inst.gain is None:
            inst = with_gain(inst, config)
        return config, inst
    config = _config(args)
    return config, build_instance(config, design=design)


def _emit(args, text: str) -> None:
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit_csv(args, curves) -> None:
    if args.out:
        with open(args.out, "w", newline="") as fh:
            write_mse_csv(curves, fh)
    else:
        write_mse_csv(curves, sys.stdout)


def cmd_generate(args) -> int:
    config, inst = _instance(args, design=False)
    _emit(args, dumps(instance_document(config, inst)) + "\n")
    return 0


def cmd_design(args) -> int:
    config, inst = _instance(args, design=True)
    if inst.report is None:
        dbar = dbar_c(inst.sys.c_rows)
        inst = type(inst)(inst.sys, inst.net, inst.profiles, inst.gain,
                          stability_report(inst.net.p, inst.sys.a, inst.gain, dbar))
    _emit(args, dumps(instance_document(config, inst)) + "\n")
    return 0


def cmd_analyze(args) -> int:
    config, inst = _instance(args, design=True)
    p, a, dbar = inst.net.p, inst.sys.a, dbar_c(inst.sys.c_rows)
    report = stability_report(p, a, inst.gain, dbar, taus=args.tau)
    augmented = {}
    for tau in args.tau:
        pa = build_augmented_pa(p, a, assign_delays(inst.net, "homogeneous", tau))
        augmented[str(tau)] = spectral_radius(closed_loop_augmented(pa, inst.gain, dbar))
    doc = report.to_dict()
    doc["bounds"] = {str(t): report.rho_aug_bound_by_tau[t] for t in args.tau}
    doc["rates"] = {str(t): report.rate_by_tau[t] for t in args.tau}
    doc["augmented_rho_homogeneous"] = augmented
    doc["rho_a"] = spectral_radius(a)
    _emit(args, dumps(doc) + "\n")
    return 0


def cmd_simulate(args) -> int:
    config, inst = _instance(args, design=True)
    _emit_csv(args, simulate_once(config, inst, path=args.path))
    return 0


def cmd_montecarlo(args) -> int:
    config, inst = _instance(args, design=True)
    _emit_csv(args, run_montecarlo(config, inst, workers=args.workers))
    return 0


def cmd_verify(args) -> int:
    if args.seeds < 1:
        raise ConfigError("--seeds must be positive")
    results = run_all(cases=args.seeds, seed=args.seed)
    for r in results:
        print(r.line())
    failed = [r.name for r in results if not r.passed]
    if failed:
        raise RuntimeError(f"property suites failed: {', '.join(failed)}")
    return 0


COMMANDS = {
    "generate": cmd_generate,
    "design": cmd_design,
    "analyze": cmd_analyze,
    "simulate": cmd_simulate,
    "montecarlo": cmd_montecarlo,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except Exception as exc:  # every failure becomes one machine-readable line
        record = {"error": type(exc).__name__, "command": args.command, "message": str(exc)}
        if isinstance(exc, SynthesisError):
            record["best_rho"] = exc.best_rho if exc.best_rho == exc.best_rho else None
        sys.stderr.write(json.dumps(record) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
