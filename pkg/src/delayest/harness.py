"""Monte-Carlo MSE experiments over delay settings.

One experiment fixes a plant, a network, a gain and a list of delay
profiles, then runs ``trials`` independent noise realizations. Within a
trial every delay profile sees the same plant trace, so curves are paired.
"""
from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .estimator import EstimateTrace, PlantTrace, run_augmented, run_distributed, simulate_plant
from .gain import GainMatrix, StabilityReport, design_gain, design_gain_delay_tolerant
from .model import (DELAY_MODES, DelayProfile, LtiSystem, SensorNetwork, assign_delays,
                    dumps, generate_network, generate_system, instance_from_dict,
                    instance_to_dict)

MSE_DEFINITION = "mse_k = (1/N) * sum_i ||x_k - xhat^i_{k|k}||^2 (network average, no per-state normalization)"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DelaySpec:
    mode: str
    tau_bar: int

    @property
    def label(self) -> str:
        return f"{self.mode}-tau{self.tau_bar}"


@dataclass(frozen=True)
class ExperimentConfig:
    n: int = 6
    blocks: int = 4
    target_rho: float = 1.04
    q_var: float = 0.004
    r_var: float = 0.004
    n_sensors: int = 4
    topology: str = "cycle"
    chords: int = 0
    delays: tuple = (DelaySpec("homogeneous", 0), DelaySpec("homogeneous", 3),
                     DelaySpec("homogeneous", 8), DelaySpec("heterogeneous", 8))
    design: str = "plain"
    tau_1: int = 0
    horizon: int = 200
    trials: int = 100
    seed: int = 0

    def __post_init__(self):
        delays = tuple(d if isinstance(d, DelaySpec) else DelaySpec(d["mode"], int(d["tau_bar"]))
                       for d in self.delays)
        object.__setattr__(self, "delays", delays)
        for name in ("n", "blocks", "n_sensors", "horizon", "trials"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.target_rho <= 0:
            raise ConfigError("target_rho must be positive")
        if self.q_var < 0 or self.r_var < 0:
            raise ConfigError("noise variances must be nonnegative")
        if not delays:
            raise ConfigError("at least one delay spec is required")
        for d in delays:
            if d.mode not in DELAY_MODES:
                raise ConfigError(f"unknown delay mode {d.mode!r}")
            if d.tau_bar < 0:
                raise ConfigError("tau_bar must be nonnegative")
        if self.design not in ("plain", "delay_tolerant"):
            raise ConfigError(f"unknown design mode {self.design!r}")
        if self.tau_1 < 0:
            raise ConfigError("tau_1 must be nonnegative")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**doc)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["delays"] = [{"mode": d.mode, "tau_bar": d.tau_bar} for d in self.delays]
        return out

    def replace(self, **changes) -> "ExperimentConfig":
        doc = self.to_dict()
        doc.update({k: v for k, v in changes.items() if v is not None})
        return ExperimentConfig.from_dict(doc)


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    return ExperimentConfig.from_dict(doc)


@dataclass(frozen=True)
class Instance:
    sys: LtiSystem
    net: SensorNetwork
    profiles: tuple
    gain: GainMatrix | None = None
    report: StabilityReport | None = None


def _child_seeds(seed: int, count: int) -> list[int]:
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(count)]


def build_instance(config: ExperimentConfig, design: bool = True) -> Instance:
    """Plant, network, delay profiles and (optionally) gain, all derived from ``config.seed``."""
    sys_seed, net_seed, delay_seed, design_seed = _child_seeds(config.seed, 4)
    sys = generate_system(config.n, config.blocks, config.target_rho, sys_seed,
                          n_sensors=config.n_sensors, q_var=config.q_var, r_var=config.r_var)
    net = generate_network(config.n_sensors, config.topology, net_seed, chords=config.chords)
    delay_seeds = _child_seeds(delay_seed, len(config.delays))
    profiles = tuple(assign_delays(net, d.mode, d.tau_bar, s)
                     for d, s in zip(config.delays, delay_seeds))
    inst = Instance(sys, net, profiles)
    if design:
        inst = with_gain(inst, config, design_seed)
    return inst


def with_gain(inst: Instance, config: ExperimentConfig, design_seed: int | None = None) -> Instance:
    if design_seed is None:
        design_seed = _child_seeds(config.seed, 4)[3]
    noise = (inst.sys.q_var, inst.sys.r_var)
    if config.design == "delay_tolerant":
        gain, report = design_gain_delay_tolerant(inst.net.p, inst.sys.a, inst.sys.c_rows,
                                                  config.tau_1, seed=design_seed, noise=noise)
    else:
        gain, report = design_gain(inst.net.p, inst.sys.a, inst.sys.c_rows, seed=design_seed,
                                   noise=noise)
    return Instance(inst.sys, inst.net, inst.profiles, gain, report)


def instance_document(config: ExperimentConfig, inst: Instance) -> dict:
    """Everything needed to rebuild ``inst`` without re-running the design."""
    doc = {"config": config.to_dict()}
    doc.update(instance_to_dict(inst.sys, inst.net))
    doc["profiles"] = [dict(instance_to_dict(delays=prof), label=spec.label)
                       for spec, prof in zip(config.delays, inst.profiles)]
    if inst.gain is not None:
        doc["k_blocks"] = [b.tolist() for b in inst.gain.blocks]
    if inst.report is not None:
        doc["report"] = inst.report.to_dict()
    return doc


def instance_from_document(doc: dict) -> tuple[ExperimentConfig, Instance]:
    """Inverse of :func:`instance_document`; the stability report is not restored."""
    config = ExperimentConfig.from_dict(doc["config"])
    sys, net, _ = instance_from_dict(doc)
    if sys is None or net is None:
        raise ConfigError("instance document lacks the plant or the network")
    profiles = tuple(instance_from_dict(p)[2] for p in doc.get("profiles", []))
    if len(profiles) != len(config.delays):
        raise ConfigError(f"{len(profiles)} delay profiles stored for {len(config.delays)} delay specs")
    gain = GainMatrix(tuple(np.asarray(b) for b in doc["k_blocks"])) if "k_blocks" in doc else None
    return config, Instance(sys, net, profiles, gain)


def save_document(path, doc: dict) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(doc) + "\n")


def load_document(path) -> tuple[ExperimentConfig, Instance]:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return instance_from_document(doc)


@dataclass(frozen=True)
class MseCurve:
    label: str
    values: np.ndarray
    trials: int

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if np.any(v < 0):
            raise ValueError("MSE values must be nonnegative")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)


def mse_of_trace(trace: EstimateTrace, plant: PlantTrace) -> np.ndarray:
    """Per-step network-average squared error norm."""
    if trace.posteriors.shape[0] != plant.states.shape[0]:
        raise ValueError(f"estimate trace has {trace.posteriors.shape[0]} steps, "
                         f"plant trace {plant.states.shape[0]}")
    err = plant.states[:, None, :] - trace.posteriors
    return np.mean(np.sum(err * err, axis=2), axis=1)


def _run_trial(args):
    sys, net, profiles, gain, horizon, seed, path = args
    x0_seed, noise_seed = _child_seeds(seed, 2)
    x0 = np.random.default_rng(x0_seed).standard_normal(sys.n)
    plant = simulate_plant(sys, x0, horizon, noise_seed)
    runner = run_distributed if path == "distributed" else run_augmented
    return np.array([mse_of_trace(runner(sys, net, prof, gain, plant), plant) for prof in profiles])


def default_workers() -> int:
    env = os.environ.get("DELAYEST_WORKERS")
    return max(1, int(env)) if env else 1


def run_montecarlo(config: ExperimentConfig, instance: Instance | None = None,
                   workers: int | None = None, path: str = "augmented") -> list[MseCurve]:
    """Average MSE curves, one per delay spec.

    Trial seeds come from ``config.seed`` and the reduction runs in trial
    order, so the output is bit-identical for any worker count.
    """
    if instance is None:
        instance = build_instance(config)
    elif instance.gain is None:
        instance = with_gain(instance, config)
    workers = default_workers() if workers is None else max(1, int(workers))
    trial_seeds = _child_seeds(_child_seeds(config.seed, 5)[4], config.trials)
    jobs = [(instance.sys, instance.net, instance.profiles, instance.gain, config.horizon, s, path)
            for s in trial_seeds]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_run_trial, jobs))
    else:
        results = [_run_trial(j) for j in jobs]
    total = np.zeros_like(results[0])
    for r in results:
        total += r
    mean = total / config.trials
    return [MseCurve(spec.label, mean[idx], config.trials) for idx, spec in enumerate(config.delays)]


def simulate_once(config: ExperimentConfig, instance: Instance | None = None,
                  path: str = "distributed") -> list[MseCurve]:
    """The first Monte-Carlo trial on its own, one curve per delay spec."""
    if instance is None:
        instance = build_instance(config)
    elif instance.gain is None:
        instance = with_gain(instance, config)
    seed = _child_seeds(_child_seeds(config.seed, 5)[4], config.trials)[0]
    rows = _run_trial((instance.sys, instance.net, instance.profiles, instance.gain,
                       config.horizon, seed, path))
    return [MseCurve(spec.label, rows[idx], 1) for idx, spec in enumerate(config.delays)]


def write_mse_csv(curves, fh) -> None:
    fh.write(f"# {MSE_DEFINITION}\n")
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["step", "label", "mse"])
    for curve in curves:
        for k, v in enumerate(curve.values):
            writer.writerow([k, curve.label, format(float(v), ".17g")])


def mse_csv_text(curves) -> str:
    buf = io.StringIO()
    write_mse_csv(curves, buf)
    return buf.getvalue()


def read_mse_csv(fh) -> dict:
    rows = csv.DictReader(line for line in fh if not line.startswith("#"))
    out = {}
    for row in rows:
        out.setdefault(row["label"], []).append(float(row["mse"]))
    return {k: np.array(v) for k, v in out.items()}


# ---------------------------------------------------------------------------
# curve statistics


def tail_mean(values, fraction: float = 0.25) -> float:
    """Mean over the last ``fraction`` of the curve."""
    values = np.asarray(values)
    start = int(len(values) * (1 - fraction))
    return float(np.mean(values[start:]))


def decay_slope(values, floor: float | None = None, floor_factor: float = 2.0) -> float:
    """Least-squares slope of ``log(mse)`` over the transient.

    The transient runs from step 1 until the curve first drops below
    ``floor_factor * floor``; ``floor`` defaults to the tail mean.
    """
    values = np.asarray(values, dtype=float)
    if floor is None:
        floor = tail_mean(values)
    below = np.flatnonzero(values[1:] < floor_factor * floor)
    stop = int(below[0]) + 1 if below.size else len(values)
    ks = np.arange(1, max(stop, 3))
    return float(np.polyfit(ks, np.log(values[ks]), 1)[0])
