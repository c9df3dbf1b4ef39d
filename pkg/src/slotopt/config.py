"""YAML run configuration with line-aware error messages.

Schema (all sections optional unless a command needs them)::

    problem: slot | synthetic          # required for optimize/benchmark
    seed: 0
    machine:    {MachineSpec fields}
    material:   {MaterialModel fields}
    operating_point: {OperatingPoint fields}
    constraints: {ConstraintBounds fields}
    thermal:    {ThermalModel fields}
    evaluator:  {layers, clearance, strand_diameter, winding, costs, segments, f_op}
    synthetic:  {bias, costs}
    optimizer:  {budget (required), seed_count, zeta, gamma, beta_scale, ...}
    benchmark:  {methods, seeds, target_fraction, value_range, nsga2: {...}, pso: {...}}
    pack:       {scenario: benchmark | keystone, layers, clearance, strand_diameter, design}
    sample:     {matrix, size}
"""

from __future__ import annotations

import dataclasses
from importlib import resources

import numpy as np
import yaml

from . import machine
from .baselines import EvolutionConfig
from .pibo import FidelityConfig, RunConfig
from .synthetic import SyntheticProblem


class ConfigError(ValueError):
    """Configuration could not be parsed or is missing a required key."""


class Config:
    """Parsed mapping plus the source line of every key."""

    def __init__(self, data: dict, lines: dict, path: str = "<string>"):
        self.data = data
        self.lines = lines
        self.path = path

    @classmethod
    def from_text(cls, text: str, path: str = "<string>") -> Config:
        try:
            node = yaml.compose(text, Loader=yaml.SafeLoader)
            data = yaml.safe_load(text)
        except yaml.YAMLError as err:
            raise ConfigError(f"{path}: {err}") from err
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        lines = {(): 1}
        _collect_lines(node, (), lines)
        return cls(data, lines, path)

    @classmethod
    def load(cls, path) -> Config:
        with open(path) as fh:
            return cls.from_text(fh.read(), str(path))

    def line(self, keys: tuple) -> int:
        while keys not in self.lines:
            keys = keys[:-1]
        return self.lines[keys]

    def section(self, name: str, required: bool = False) -> dict:
        if name not in self.data:
            if required:
                raise ConfigError(f"{self.path}: missing key '{name}' (line {self.line(())})")
            return {}
        value = self.data[name]
        if value is None:
            return {}
        if not isinstance(value, dict):
            raise ConfigError(f"{self.path}: '{name}' must be a mapping (line {self.line((name,))})")
        return value

    def require(self, *keys):
        node = self.data
        for i, k in enumerate(keys):
            if not isinstance(node, dict) or k not in node:
                where = ".".join(keys[:i]) or "top level"
                raise ConfigError(
                    f"{self.path}: missing key '{k}' in {where} (line {self.line(tuple(keys[:i]))})"
                )
            node = node[k]
        return node

    def get(self, *keys, default=None):
        try:
            return self.require(*keys)
        except ConfigError:
            return default


def _collect_lines(node, prefix: tuple, lines: dict) -> None:
    if isinstance(node, yaml.MappingNode):
        for key_node, value_node in node.value:
            path = prefix + (key_node.value,)
            lines[path] = key_node.start_mark.line + 1
            _collect_lines(value_node, path, lines)


def _build(cls, cfg: Config, section: str, base=None):
    values = cfg.section(section)
    names = {f.name for f in dataclasses.fields(cls)}
    for key in values:
        if key not in names:
            raise ConfigError(f"{cfg.path}: unknown key '{key}' in {section} (line {cfg.line((section, key))})")
    values = {k: tuple(v) if isinstance(v, list) else v for k, v in values.items()}
    try:
        return dataclasses.replace(base, **values) if base is not None else cls(**values)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"{cfg.path}: invalid {section} (line {cfg.line((section,))}): {err}") from err


def build_slot_evaluator(cfg: Config) -> machine.SlotDesignEvaluator:
    ev = machine.SlotDesignEvaluator(
        spec=_build(machine.MachineSpec, cfg, "machine"),
        material=_build(machine.MaterialModel, cfg, "material"),
        op=_build(machine.OperatingPoint, cfg, "operating_point"),
        bounds=_build(machine.ConstraintBounds, cfg, "constraints"),
        thermal=_build(machine.ThermalModel, cfg, "thermal"),
    )
    allowed = {"layers", "clearance", "strand_diameter", "winding", "benchmark_clearance", "costs", "segments", "f_op"}
    section = cfg.section("evaluator")
    for key in section:
        if key not in allowed:
            raise ConfigError(f"{cfg.path}: unknown key '{key}' in evaluator (line {cfg.line(('evaluator', key))})")
    return _build(machine.SlotDesignEvaluator, cfg, "evaluator", ev)


def build_evaluator(cfg: Config):
    problem = cfg.require("problem")
    if problem == "slot":
        return build_slot_evaluator(cfg)
    if problem == "synthetic":
        return _build(SyntheticProblem, cfg, "synthetic")
    raise ConfigError(f"{cfg.path}: unknown problem {problem!r} (line {cfg.line(('problem',))})")


def build_run_config(cfg: Config, evaluator, seed: int) -> RunConfig:
    opt = dict(cfg.section("optimizer", required=True))
    cfg.require("optimizer", "budget")
    fid = FidelityConfig(
        zeta=tuple(opt.pop("zeta", (0.0,) * evaluator.n_fidelities)),
        gamma=tuple(opt.pop("gamma", (0.0,) * evaluator.n_fidelities)),
        costs=tuple(evaluator.costs),
    )
    names = {f.name for f in dataclasses.fields(RunConfig)} - {"fidelity", "random_seed"}
    for key in opt:
        if key not in names:
            raise ConfigError(f"{cfg.path}: unknown key '{key}' in optimizer (line {cfg.line(('optimizer', key))})")
    opt = {k: tuple(v) if isinstance(v, list) else v for k, v in opt.items()}
    try:
        return RunConfig(fidelity=fid, random_seed=seed, **opt)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"{cfg.path}: invalid optimizer (line {cfg.line(('optimizer',))}): {err}") from err


def build_evolution_config(cfg: Config, method: str, seed: int) -> EvolutionConfig:
    values = dict(cfg.get("benchmark", method, default={}) or {})
    names = {f.name for f in dataclasses.fields(EvolutionConfig)} - {"random_seed"}
    for key in values:
        if key not in names:
            raise ConfigError(f"{cfg.path}: unknown key '{key}' in benchmark.{method} (line {cfg.line(('benchmark', method, key))})")
    return EvolutionConfig(random_seed=seed, **values)


def design_vector(cfg: Config, keys: tuple) -> np.ndarray:
    from .space import INITIAL

    value = cfg.get(*keys)
    if value is None:
        return INITIAL.copy()
    x = np.asarray(value, dtype=float)
    if x.shape != INITIAL.shape:
        raise ConfigError(f"{cfg.path}: {'.'.join(keys)} needs {INITIAL.size} numbers (line {cfg.line(keys)})")
    return x


def bundled(name: str) -> str:
    """Text of a config shipped with the package (e.g. 'reference.yaml')."""
    return resources.files("slotopt").joinpath("configs", name).read_text()
