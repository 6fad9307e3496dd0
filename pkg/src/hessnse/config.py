"""Run configuration: YAML on disk, nested dataclasses in memory.

Every section has defaults, so an empty file is a valid config. Invalid
values raise :class:`ConfigError` naming the offending field path, for
example ``time.dt: must be positive``.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .fields import FIELD_KINDS
from .inequalities import LEMMA_AXES

SUBCOMMANDS = ("verify-identities", "verify-inequalities", "simulate", "monitor", "convergence")


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads ``1e-3`` (no dot) as a float."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
    |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
    |\.[0-9_]+(?:[eE][-+][0-9]+)?
    |[-+]?\.(?:inf|Inf|INF)
    |\.(?:nan|NaN|NAN))$""", re.X),
    list("-+0123456789."),
)


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class GridConfig:
    n: int = 32
    nu: float = 0.05

    def validate(self, path):
        _int(self.n, f"{path}.n")
        if self.n < 8 or self.n % 2:
            raise ConfigError(f"{path}.n", "n must be even >= 8")
        if not _num(self.nu, f"{path}.nu") > 0:
            raise ConfigError(f"{path}.nu", "must be positive")


@dataclass
class InitialConditionConfig:
    kind: str = "random_solenoidal"
    seed: int = 0
    amplitude: float = 1.0
    kmax: int | None = None
    decay: float = 2.0

    def validate(self, path):
        if self.kind not in FIELD_KINDS or self.kind in ("bump_compact", "random_unprojected"):
            raise ConfigError(f"{path}.kind", f"unsupported initial condition {self.kind!r}")
        _int(self.seed, f"{path}.seed")
        _num(self.amplitude, f"{path}.amplitude")
        if self.kmax is not None and _int(self.kmax, f"{path}.kmax") < 1:
            raise ConfigError(f"{path}.kmax", "must be >= 1")
        _num(self.decay, f"{path}.decay")


@dataclass
class TimeConfig:
    dt: float = 1e-3
    t_end: float = 1.0
    sample_stride: int = 1
    snapshot_stride: int = 10
    cfl: float = 0.5

    def validate(self, path):
        for name in ("dt", "t_end", "cfl"):
            if not _num(getattr(self, name), f"{path}.{name}") > 0:
                raise ConfigError(f"{path}.{name}", "must be positive")
        for name in ("sample_stride", "snapshot_stride"):
            if _int(getattr(self, name), f"{path}.{name}") < 1:
                raise ConfigError(f"{path}.{name}", "must be >= 1")
        steps = self.t_end / self.dt
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ConfigError(f"{path}.t_end", "must be an integer multiple of dt")


@dataclass
class CriterionSection:
    betas: list = field(default_factory=lambda: [2.0, math.inf])
    triple: list = field(default_factory=lambda: [1, 2, 3])
    tau: float = 0.0
    epsilon: float = 0.1
    serrin_betas: list = field(default_factory=lambda: [math.inf])

    def validate(self, path):
        for m, b in enumerate(_list(self.betas, f"{path}.betas")):
            if not _num(b, f"{path}.betas[{m}]") > 1:
                raise ConfigError(f"{path}.betas[{m}]", "beta must exceed 1")
        for m, b in enumerate(_list(self.serrin_betas, f"{path}.serrin_betas")):
            if not _num(b, f"{path}.serrin_betas[{m}]") >= 3:
                raise ConfigError(f"{path}.serrin_betas[{m}]", "Serrin beta must be >= 3")
        if sorted(_list(self.triple, f"{path}.triple")) != [1, 2, 3]:
            raise ConfigError(f"{path}.triple", "must be a permutation of [1, 2, 3]")
        if not _num(self.tau, f"{path}.tau") >= 0:
            raise ConfigError(f"{path}.tau", "must be nonnegative")
        if not _num(self.epsilon, f"{path}.epsilon") > 0:
            raise ConfigError(f"{path}.epsilon", "must be positive")


@dataclass
class IdentitiesConfig:
    seeds: list = field(default_factory=lambda: [0, 1, 2])
    n_values: list = field(default_factory=lambda: [32])
    tolerance: float = 1e-10
    negative_control_threshold: float = 1e-3

    def validate(self, path):
        if not _list(self.seeds, f"{path}.seeds"):
            raise ConfigError(f"{path}.seeds", "must not be empty")
        for m, s in enumerate(self.seeds):
            _int(s, f"{path}.seeds[{m}]")
        for m, n in enumerate(_list(self.n_values, f"{path}.n_values")):
            if _int(n, f"{path}.n_values[{m}]") < 8 or n % 2:
                raise ConfigError(f"{path}.n_values[{m}]", "n must be even >= 8")
        _num(self.tolerance, f"{path}.tolerance")
        _num(self.negative_control_threshold, f"{path}.negative_control_threshold")


@dataclass
class InequalitiesConfig:
    lemmas: list = field(default_factory=lambda: ["2.2", "2.3"])
    r_values: list = field(default_factory=lambda: [1.25, 1.5, 2.0, 2.5, 3.0])
    family_size: int = 100
    seed: int = 0
    n: int = 32

    def validate(self, path):
        for m, lemma in enumerate(_list(self.lemmas, f"{path}.lemmas")):
            if str(lemma) not in LEMMA_AXES:
                raise ConfigError(f"{path}.lemmas[{m}]", f"unknown lemma {lemma!r}")
        for m, r in enumerate(_list(self.r_values, f"{path}.r_values")):
            if not 1 < _num(r, f"{path}.r_values[{m}]") <= 3:
                raise ConfigError(f"{path}.r_values[{m}]", "r must satisfy 1 < r <= 3")
        if _int(self.family_size, f"{path}.family_size") < 1:
            raise ConfigError(f"{path}.family_size", "must be >= 1")
        _int(self.seed, f"{path}.seed")
        if _int(self.n, f"{path}.n") < 8 or self.n % 2:
            raise ConfigError(f"{path}.n", "n must be even >= 8")


@dataclass
class ConvergenceConfig:
    kind: str = "taylor_green_3d"
    n: int = 32
    nu: float = 0.1
    t_end: float = 1.0
    dts: list = field(default_factory=lambda: [0.04, 0.02, 0.01, 0.005])
    dt_ref: float | None = None
    order_range: list = field(default_factory=lambda: [3.7, 4.1])

    def validate(self, path):
        if self.kind not in ("taylor_green_2d", "taylor_green_3d", "abc_flow", "random_solenoidal"):
            raise ConfigError(f"{path}.kind", f"unsupported kind {self.kind!r}")
        if _int(self.n, f"{path}.n") < 8 or self.n % 2:
            raise ConfigError(f"{path}.n", "n must be even >= 8")
        if not _num(self.nu, f"{path}.nu") > 0:
            raise ConfigError(f"{path}.nu", "must be positive")
        if len(_list(self.dts, f"{path}.dts")) < 2:
            raise ConfigError(f"{path}.dts", "need at least two time steps")
        for m, dt in enumerate(self.dts):
            if not _num(dt, f"{path}.dts[{m}]") > 0:
                raise ConfigError(f"{path}.dts[{m}]", "must be positive")
        if self.dt_ref is not None and not _num(self.dt_ref, f"{path}.dt_ref") > 0:
            raise ConfigError(f"{path}.dt_ref", "must be positive")
        if len(_list(self.order_range, f"{path}.order_range")) != 2:
            raise ConfigError(f"{path}.order_range", "must be [low, high]")


@dataclass
class OutputConfig:
    directory: str = "out"
    save_snapshots: bool = False

    def validate(self, path):
        if not isinstance(self.directory, str) or not self.directory:
            raise ConfigError(f"{path}.directory", "must be a non-empty string")
        if not isinstance(self.save_snapshots, bool):
            raise ConfigError(f"{path}.save_snapshots", "must be true or false")


@dataclass
class RunConfig:
    subcommand: str | None = None
    grid: GridConfig = field(default_factory=GridConfig)
    initial_condition: InitialConditionConfig = field(default_factory=InitialConditionConfig)
    time: TimeConfig = field(default_factory=TimeConfig)
    criterion: CriterionSection = field(default_factory=CriterionSection)
    identities: IdentitiesConfig = field(default_factory=IdentitiesConfig)
    inequalities: InequalitiesConfig = field(default_factory=InequalitiesConfig)
    convergence: ConvergenceConfig = field(default_factory=ConvergenceConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def validate(self) -> "RunConfig":
        if self.subcommand is not None and self.subcommand not in SUBCOMMANDS:
            raise ConfigError("subcommand", f"unknown subcommand {self.subcommand!r}")
        for f in dataclasses.fields(self):
            if f.name != "subcommand":
                getattr(self, f.name).validate(f.name)
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    def digest(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, allow_nan=True)
        return hashlib.sha256(canonical.encode()).hexdigest()


def _int(x, path) -> int:
    if isinstance(x, bool) or not isinstance(x, int):
        raise ConfigError(path, f"expected an integer, got {x!r}")
    return x


def _num(x, path) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ConfigError(path, f"expected a number, got {x!r}")
    return float(x)


def _list(x, path) -> list:
    if not isinstance(x, list):
        raise ConfigError(path, f"expected a list, got {x!r}")
    return x


def _build(cls, data, path):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(path or "<root>", f"expected a mapping, got {type(data).__name__}")
    known = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        sub = f"{path}.{key}" if path else str(key)
        if key not in known:
            raise ConfigError(sub, "unknown field")
        default = known[key].default_factory() if known[key].default_factory is not dataclasses.MISSING else None
        if dataclasses.is_dataclass(default):
            kwargs[key] = _build(type(default), value, sub)
        else:
            kwargs[key] = value
    return cls(**kwargs)


def from_dict(data) -> RunConfig:
    return _build(RunConfig, data, "").validate()


def parse_yaml(text: str) -> RunConfig:
    try:
        data = yaml.load(text, Loader=_Loader)
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"invalid YAML: {exc}") from None
    return from_dict(data)


def load(path) -> RunConfig:
    return parse_yaml(Path(path).read_text())


def reference_markdown() -> str:
    """Reference page listing every field with its default."""
    lines = ["# Configuration reference", "",
             "Generated by `hessnse defaults --markdown`. Every field is optional.", ""]
    defaults = RunConfig()
    for f in dataclasses.fields(defaults):
        value = getattr(defaults, f.name)
        if not dataclasses.is_dataclass(value):
            lines += [f"- `{f.name}`: `{value!r}`", ""]
            continue
        lines += [f"## `{f.name}`", "", "| field | default |", "|---|---|"]
        for g in dataclasses.fields(value):
            lines.append(f"| `{g.name}` | `{yaml.safe_dump(getattr(value, g.name), default_flow_style=True).strip().removesuffix('...').strip()}` |")
        lines.append("")
    return "\n".join(lines)
