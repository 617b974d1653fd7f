"""Experiment configuration: nested YAML files, strict parsing, named presets.

A config file maps one-to-one onto :class:`ExperimentConfig`. Every field
has a default, unknown keys are rejected, and ``dump_config`` writes every
field back out so that parse, serialize, parse returns an equal object.
"""

from __future__ import annotations

import dataclasses
import types
import typing
from dataclasses import dataclass, field, replace
from pathlib import Path

import yaml

from .errors import ConfigError
from .laws import InitialLaws, PositionLaw, VoltageDensity
from .model import ModelCoefficients, ThetaKernel
from .particles import SimConfig
from .testfunctions import TestFunction

STUDY_KINDS = ("trajectories", "pde", "spikes", "convergence", "energy", "mild_check", "mkv_check", "euler_order")


@dataclass(frozen=True)
class SimSection:
    n_particles: int = 100
    dt: float = 1e-3
    n_replicas: int = 1
    interaction: str = "exact"
    output_interval: float | None = None


@dataclass(frozen=True)
class PdeSection:
    atoms: int = 200
    cells: int = 400
    output_interval: float = 0.005
    dt_max: float | None = None


@dataclass(frozen=True)
class TestFunctionSpec:
    """Serializable subset of :class:`TestFunction` (no spatial weight)."""

    __test__ = False

    kind: str = "cos"
    k: int = 1
    center: float = 0.5
    width: float = 0.25

    def build(self) -> TestFunction:
        return TestFunction(self.kind, self.k, self.center, self.width)


@dataclass(frozen=True)
class StudySection:
    kind: str = "trajectories"
    n_values: tuple = (100, 1000, 10000)
    n_replicas: int = 10
    times: tuple = (1.0,)
    # energy study: mollifier scale alpha_N = N ** -alpha_exponent (1/3 uses the exact cube-root rule)
    alpha_exponent: float = 1.0 / 3.0
    energy_cells: int = 256
    energy_interval: float = 0.05
    time_regularity_alpha: float = 0.25
    martingale_phi: TestFunctionSpec = field(default_factory=TestFunctionSpec)
    fourier_kmax: int = 4
    mkv_samples: int = 10000
    dt_levels: tuple = (0.008, 0.004, 0.002, 0.001)
    cascade_window: float = 0.3
    cluster_split: float = 0.5
    joint_max_atoms: int = 1000
    joint_cells: int = 16


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelCoefficients = field(default_factory=ModelCoefficients)
    laws: InitialLaws = field(default_factory=InitialLaws)
    sim: SimSection = field(default_factory=SimSection)
    pde: PdeSection = field(default_factory=PdeSection)
    study: StudySection = field(default_factory=StudySection)
    seed: int = 0
    output_dir: str = "out"
    plot: bool = False

    def __post_init__(self):
        if self.study.kind not in STUDY_KINDS:
            raise ConfigError(f"study.kind must be one of {STUDY_KINDS}")
        if not (0 <= self.seed < 2**64):
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.pde.atoms < 1 or self.pde.cells < 2 or self.pde.output_interval <= 0:
            raise ConfigError("pde needs atoms >= 1, cells >= 2 and a positive output interval")
        st = self.study
        if not st.n_values or any(int(n) < 1 for n in st.n_values) or st.n_replicas < 1:
            raise ConfigError("study.n_values and study.n_replicas must be positive")
        if any(not (0 <= t <= self.model.horizon) for t in st.times):
            raise ConfigError("study.times must lie in [0, horizon]")
        if st.cascade_window <= 0 or st.energy_interval <= 0 or st.fourier_kmax < 1:
            raise ConfigError("study windows, intervals and fourier_kmax must be positive")
        st.martingale_phi.build()
        self.sim_config()

    def sim_config(self, n_particles: int | None = None, seed: int | None = None) -> SimConfig:
        s = self.sim
        return SimConfig(
            n_particles=int(s.n_particles if n_particles is None else n_particles),
            dt=s.dt,
            seed=self.seed if seed is None else seed,
            n_replicas=s.n_replicas,
            coeffs=self.model,
            laws=self.laws,
            interaction=s.interaction,
            output_interval=s.output_interval,
        )

    def with_seed(self, seed: int) -> ExperimentConfig:
        return replace(self, seed=int(seed))


# ---------------------------------------------------------------- (de)serialization

def _plain(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, (tuple, list)):
        return [_plain(x) for x in obj]
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, int):
        return int(obj)
    return float(obj)


def _tupled(x):
    return tuple(_tupled(e) for e in x) if isinstance(x, list) else x


def _build(cls, data, where: str):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")
    kwargs = {}
    for name, value in data.items():
        hint = hints[name]
        if dataclasses.is_dataclass(hint):
            kwargs[name] = _build(hint, value, f"{where}.{name}")
        elif hint is float and isinstance(value, int) and not isinstance(value, bool):
            kwargs[name] = float(value)
        elif hint is int and not (isinstance(value, int) and not isinstance(value, bool)):
            raise ConfigError(f"{where}.{name}: expected an integer")
        elif hint is bool and not isinstance(value, bool):
            raise ConfigError(f"{where}.{name}: expected true or false")
        elif hint is str and not isinstance(value, str):
            raise ConfigError(f"{where}.{name}: expected a string")
        else:
            if typing.get_origin(hint) in (typing.Union, types.UnionType) and float in typing.get_args(hint) \
                    and isinstance(value, int) and not isinstance(value, bool):
                value = float(value)
            kwargs[name] = _tupled(value)
    try:
        return cls(**kwargs)
    except ConfigError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def config_to_dict(cfg: ExperimentConfig) -> dict:
    return _plain(cfg)


def config_from_dict(data) -> ExperimentConfig:
    return _build(ExperimentConfig, data, "config")


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False, default_flow_style=None)


def parse_config(text: str) -> ExperimentConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from None
    return config_from_dict(data)


def load_config(path) -> ExperimentConfig:
    """Load a YAML file, or a preset when ``path`` names one (e.g. ``fig2``)."""
    p = Path(path)
    if not p.exists():
        if str(path) in PRESETS:
            return preset(str(path))
        raise ConfigError(f"config file {path} not found and not a preset name")
    return parse_config(p.read_text())


# ---------------------------------------------------------------- presets

_FULL = {
    "model": {
        "lambda_hat": 1.0, "epsilon": 0.02, "delta": 0.3, "sigma_bump": 0.1, "horizon": 1.0,
        "theta_kernel": {"kind": "gaussian", "theta0": 2.0, "length": 0.5},
    },
    "laws": {"nu": {"kind": "uniform_box"}, "rho0": {"kind": "uniform"}},
    "sim": {"n_particles": 1000, "dt": 1e-3},
    "pde": {"atoms": 50, "cells": 400, "output_interval": 0.005},
    "study": {"kind": "convergence", "n_values": [100, 1000, 10000], "n_replicas": 20, "times": [0.5, 1.0]},
}

# Strong all-to-all coupling: a neuron in its firing window lifts every charging
# neuron's drift by theta0 / N = 30, so one spike recruits the rest within ~0.05.
# Weak leak and a start in [0.3, 1) make a first spontaneous spike likely.
_FIG2 = {
    "model": {
        "lambda_hat": 0.05, "epsilon": 0.02, "delta": 0.3, "horizon": 3.0,
        "theta_kernel": {"kind": "constant", "theta0": 300.0},
    },
    "laws": {
        "nu": {"kind": "uniform_box"},
        "rho0": {"kind": "piecewise_constant", "edges": [0.0, 0.3, 1.0, 2.0], "values": [0.0, 1.0, 0.0]},
    },
    "sim": {"n_particles": 10, "dt": 1e-3},
    "study": {"kind": "spikes", "n_replicas": 10, "cascade_window": 0.3},
}

_A, _C, _B = [0.25, 0.5, 0.5], [0.3, 0.5, 0.5], [0.75, 0.5, 0.5]

# Two subnetworks; only the bridge neuron (atom C) of the first one projects to the second.
_FIG3 = {
    "model": {
        "lambda_hat": 0.05, "epsilon": 0.02, "delta": 0.3, "horizon": 3.0,
        "theta_kernel": {
            "kind": "block",
            "atoms": [_A, _C, _B],
            "matrix": [[300.0, 300.0, 0.0], [300.0, 300.0, 0.0], [0.0, 600.0, 300.0]],
        },
    },
    "laws": {
        "nu": {"kind": "atoms", "atoms": [_A] * 10 + [_C] + [_B] * 10, "assign": "enumerate"},
        "rho0": {"kind": "piecewise_constant", "edges": [0.0, 0.3, 1.0, 2.0], "values": [0.0, 1.0, 0.0]},
    },
    "sim": {"n_particles": 21, "dt": 1e-3, "interaction": "binned"},
    "study": {"kind": "spikes", "n_replicas": 10, "cluster_split": 0.5},
}

_FIG1 = {
    "model": {
        "lambda_hat": 1.0, "epsilon": 0.02, "delta": 0.3, "sigma_bump": 0.1, "horizon": 2.0,
        "theta_kernel": {"kind": "gaussian", "theta0": 20.0, "length": 0.3},
    },
    "laws": {"nu": {"kind": "uniform_box"}, "rho0": {"kind": "uniform"}},
    "sim": {"n_particles": 100, "dt": 1e-3, "output_interval": 0.01},
    "study": {"kind": "trajectories", "times": [0.5, 1.0, 2.0]},
}


def _with(base: dict, **overrides) -> dict:
    out = {k: (dict(v) if isinstance(v, dict) else v) for k, v in base.items()}
    for path, value in overrides.items():
        node = out
        keys = path.split("__")
        for k in keys[:-1]:
            node[k] = dict(node.get(k, {}))
            node = node[k]
        node[keys[-1]] = value
    return out


PRESETS = {
    "full": _FULL,
    "fig1": _FIG1,
    "fig2": _FIG2,
    "fig2_uncoupled": _with(_FIG2, model__theta_kernel={"kind": "constant", "theta0": 0.0}),
    "fig3": _FIG3,
    "free": _with(_FULL, model__theta_kernel={"kind": "constant", "theta0": 0.0}),
    # C^1 discharge drift and constant noise, for the strong-order study
    "euler": _with(_FULL, model__drift_variant="smooth", model__sigma_bump=0.0, sim__n_particles=100,
                   study__kind="euler_order"),
}


def preset(name: str) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return config_from_dict(PRESETS[name])


__all__ = [
    "ExperimentConfig", "SimSection", "PdeSection", "StudySection", "TestFunctionSpec",
    "PRESETS", "preset", "parse_config", "dump_config", "load_config",
    "config_to_dict", "config_from_dict", "ThetaKernel", "PositionLaw", "VoltageDensity",
]
