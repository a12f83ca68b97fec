"""Experiment configuration: strict key=value files with sections.

Unknown sections or keys are rejected (typos in experiment parameters must
fail loudly, not silently fall back to defaults), every numeric constraint of
the domain types is re-validated at load time by actually constructing them,
and a parsed config serializes back to a semantically identical file.  Run
manifests are configs with an extra ``[provenance]`` section, so a manifest
can be fed straight back to the CLI to reproduce a run.
"""

from __future__ import annotations

import configparser
import io
import time
from dataclasses import dataclass, field, fields

from . import fastmath
from .effective import EffectiveDrift
from .errors import ConfigError
from .pim import PimSchedule
from .systems import DRIFT_REGISTRY, SlowFastSystem, make_system

_SCHEMA = {
    "system": {
        "name": str, "alpha1": float, "alpha2": float,
        "sigma1": float, "sigma2": float, "epsilon": float,
    },
    "initial": {"x0": float, "y0": float},
    "pim": {
        "macro_dt": float, "micro_dt": float, "micro_count": int,
        "horizon": float, "burn_in": int, "restart": str,
    },
    "analysis": {
        "p": float, "paths": int, "l_max": int, "budget": int,
        "drift_mode": str,
    },
    "run": {"master_seed": int, "output_dir": str},
    # written by the CLI, accepted back on reload, never interpreted
    "provenance": {
        "version": str, "command": str, "backend": str, "created": str,
        "rejected_paths": str, "threads": int,
    },
}


@dataclass
class ExperimentConfig:
    """Resolved experiment parameters (defaults follow the worked example:
    x0 = y0 = 10, alpha = 1.5, macro_dt = 1e-3, M = 100, micro_dt = macro_dt/M,
    unit horizon)."""

    name: str = "paper_example"
    alpha1: float = 1.5
    alpha2: float = 1.5
    sigma1: float = 1.0
    sigma2: float = 1.0
    epsilon: float = 0.1
    x0: float = 10.0
    y0: float = 10.0
    macro_dt: float = 1e-3
    micro_dt: float = 0.0          # 0 means macro_dt / micro_count
    micro_count: int = 100
    horizon: float = 1.0
    burn_in: int = 0
    restart: str = "warm"
    p: float = 1.4
    paths: int = 1000
    l_max: int = 5
    budget: int = 10_000_000
    drift_mode: str = "quadrature_example"
    master_seed: int = 12345
    output_dir: str = "levypim-out"
    provenance: dict = field(default_factory=dict)

    _SECTION_OF = {
        "name": "system", "alpha1": "system", "alpha2": "system",
        "sigma1": "system", "sigma2": "system", "epsilon": "system",
        "x0": "initial", "y0": "initial",
        "macro_dt": "pim", "micro_dt": "pim", "micro_count": "pim",
        "horizon": "pim", "burn_in": "pim", "restart": "pim",
        "p": "analysis", "paths": "analysis", "l_max": "analysis",
        "budget": "analysis", "drift_mode": "analysis",
        "master_seed": "run", "output_dir": "run",
    }

    def system(self) -> SlowFastSystem:
        return make_system(self.name, alpha=self.alpha1, alpha2=self.alpha2,
                           sigma1=self.sigma1, sigma2=self.sigma2,
                           epsilon=self.epsilon)

    def schedule(self) -> PimSchedule:
        micro_dt = self.micro_dt if self.micro_dt > 0.0 \
            else self.macro_dt / self.micro_count
        return PimSchedule(macro_dt=self.macro_dt, micro_dt=micro_dt,
                           micro_count=self.micro_count, horizon=self.horizon,
                           burn_in=self.burn_in, restart=self.restart)

    def effective(self) -> EffectiveDrift:
        if self.drift_mode == "quadrature_example":
            return EffectiveDrift.quadrature_example(self.alpha1)
        if self.drift_mode == "empirical":
            return EffectiveDrift.empirical()
        raise ConfigError(f"unknown drift_mode {self.drift_mode!r}",
                          key="drift_mode")

    def validate(self) -> "ExperimentConfig":
        # constructing the domain objects re-checks every invariant
        if self.name not in DRIFT_REGISTRY:
            raise ConfigError(
                f"unknown system name {self.name!r}; registered: "
                f"{sorted(DRIFT_REGISTRY)}", key="name")
        self.system()
        self.schedule()
        if not 1.0 < self.p < 2.0:
            raise ConfigError(f"p must be in (1, 2), got {self.p}", key="p")
        if self.paths < 1:
            raise ConfigError(f"paths must be >= 1, got {self.paths}", key="paths")
        if self.l_max < 1:
            raise ConfigError(f"l_max must be >= 1, got {self.l_max}", key="l_max")
        if self.master_seed < 0 or self.master_seed >= 2 ** 64:
            raise ConfigError("master_seed must fit in 64 bits", key="master_seed")
        return self


def _find_line(text: str, token: str):
    for i, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped.startswith(token) or stripped.startswith(f"[{token}]"):
            return i
    return None


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate config text; unknown keys name their line."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax error: {exc}") from exc

    cfg = ExperimentConfig()
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]", key=section,
                              line=_find_line(text, section))
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]",
                                  key=key, line=_find_line(text, key))
            if section == "provenance":
                cfg.provenance[key] = raw
                continue
            caster = _SCHEMA[section][key]
            try:
                value = caster(raw)
            except ValueError as exc:
                raise ConfigError(
                    f"cannot parse {key} = {raw!r} as {caster.__name__}",
                    key=key, line=_find_line(text, key)) from exc
            setattr(cfg, key, value)
    return cfg.validate()


def load_config(path) -> ExperimentConfig:
    with open(path, "r") as f:
        return parse_config(f.read())


def serialize_config(cfg: ExperimentConfig, provenance: dict = None) -> str:
    """Emit config text that parses back to the same values."""
    out = io.StringIO()
    last_section = None
    for f in fields(cfg):
        if f.name == "provenance":
            continue
        section = cfg._SECTION_OF[f.name]
        if section != last_section:
            if last_section is not None:
                out.write("\n")
            out.write(f"[{section}]\n")
            last_section = section
        value = getattr(cfg, f.name)
        if isinstance(value, float):
            value = repr(value)  # repr round-trips float64 exactly
        out.write(f"{f.name} = {value}\n")
    prov = dict(cfg.provenance)
    if provenance:
        prov.update(provenance)
    if prov:
        out.write("\n[provenance]\n")
        for k, v in prov.items():
            out.write(f"{k} = {v}\n")
    return out.getvalue()


def write_manifest(cfg: ExperimentConfig, path, command: str,
                   rejected_paths: int = 0, threads: int = 1) -> None:
    from . import __version__

    prov = {
        "version": f"levypim-{__version__}",
        "command": command,
        "backend": fastmath.active_backend(),
        "created": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "rejected_paths": str(rejected_paths),
        "threads": threads,
    }
    with open(path, "w") as f:
        f.write(serialize_config(cfg, prov))
