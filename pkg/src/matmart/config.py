"""Experiment configuration: a single JSON document with every default materialized."""

from __future__ import annotations

import dataclasses
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .mart_sim import DEPENDENCE_MODES, ENTRY_LAWS, MartingaleModel
from .moment_bounds import MomentProfile
from .normed_space import DEFAULT_CLOUD_SIZE, DEFAULT_EPS_GRID, NormSpec

DEFAULT_T_GRID = np.geomspace(math.e, 1e6, 48)


class ConfigError(ValueError):
    def __init__(self, message: str, key: Optional[str] = None):
        super().__init__(message)
        self.key = key


@dataclass
class ModelConfig:
    d: int = 2
    n: int = 100
    entry_law: str = "rademacher"
    params: dict = field(default_factory=dict)
    dependence: str = "independent"


@dataclass
class NormConfig:
    family: str = "l2"


@dataclass
class KappaConfig:
    mode: str = "analytic"
    # analytic mode: None means 0 for l1/linf and 2(d-1) otherwise
    value: Optional[float] = None
    eps_grid: list = field(default_factory=lambda: DEFAULT_EPS_GRID.tolist())
    cloud_size: int = DEFAULT_CLOUD_SIZE


@dataclass
class OutputConfig:
    format: str = "csv"
    path: str = "out"


@dataclass
class ExperimentConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    norm: NormConfig = field(default_factory=NormConfig)
    kappa_mode: KappaConfig = field(default_factory=KappaConfig)
    # {"family": "model"} derives entry moments from the simulated law
    moment_profile: dict = field(default_factory=lambda: {"family": "model"})
    p_grid: Optional[list] = None
    p_values: list = field(default_factory=lambda: [4.0, 6.0, 8.0])
    t_grid: list = field(default_factory=lambda: DEFAULT_T_GRID.tolist())
    paths: int = 10_000
    tail_paths: Optional[int] = None
    seed: int = 0
    # multiplies beta; values below 1 are negative controls
    beta_scale: float = 1.0
    output: OutputConfig = field(default_factory=OutputConfig)

    # -- derived objects

    def martingale_model(self) -> MartingaleModel:
        m = self.model
        return MartingaleModel(m.d, m.n, m.entry_law, dict(m.params), m.dependence)

    def norm_spec(self) -> NormSpec:
        return NormSpec.parse(self.model.d, self.norm.family)

    def entry_profile(self) -> Optional[MomentProfile]:
        """Explicit entry-level moment profile, or None to derive it from the model."""
        prm = dict(self.moment_profile)
        fam = prm.pop("family")
        if fam == "model":
            return None
        if fam == "power_log":
            return MomentProfile.power_log(prm["C"], prm["delta"])
        if fam == "heavy":
            return MomentProfile.heavy(prm["b"], prm.get("gamma", 0.0), prm.get("S", "one"),
                                       prm.get("scale", 1.0))
        if fam == "tabulated":
            return MomentProfile.tabulated(prm["p"], prm["mu"])
        raise ConfigError(f"unknown moment profile family {fam!r}", "family")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_PROFILE_KEYS = {
    "model": set(),
    "power_log": {"C", "delta"},
    "heavy": {"b", "gamma", "S", "scale"},
    "tabulated": {"p", "mu"},
}
_PROFILE_REQUIRED = {"power_log": {"C", "delta"}, "heavy": {"b"}, "tabulated": {"p", "mu"}}


def _build(cls, data: Any, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'} must be an object")
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(names))
    if unknown:
        raise ConfigError(f"unknown key {unknown[0]!r} in {where or 'config'}", unknown[0])
    kwargs = {}
    for key, value in data.items():
        sub = _NESTED.get((cls, key))
        kwargs[key] = _build(sub, value, f"{where}.{key}".lstrip(".")) if sub else value
    return cls(**kwargs)


_NESTED = {
    (ExperimentConfig, "model"): ModelConfig,
    (ExperimentConfig, "norm"): NormConfig,
    (ExperimentConfig, "kappa_mode"): KappaConfig,
    (ExperimentConfig, "output"): OutputConfig,
}


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def validate(cfg: ExperimentConfig) -> None:
    m = cfg.model
    if not _is_int(m.d) or m.d < 1:
        raise ConfigError("model.d must be a positive integer", "d")
    if not _is_int(m.n) or m.n < 1:
        raise ConfigError("model.n must be a positive integer", "n")
    if m.entry_law not in ENTRY_LAWS + ("zero",):
        raise ConfigError(f"unknown entry law {m.entry_law!r}", "entry_law")
    if m.dependence not in DEPENDENCE_MODES:
        raise ConfigError(f"unknown dependence mode {m.dependence!r}", "dependence")
    try:
        cfg.martingale_model()
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid model parameters: {exc}", "params") from None
    try:
        cfg.norm_spec()
    except ValueError as exc:
        raise ConfigError(str(exc), "family") from None
    k = cfg.kappa_mode
    if k.mode not in ("analytic", "estimated"):
        raise ConfigError(f"kappa_mode.mode must be 'analytic' or 'estimated', got {k.mode!r}", "mode")
    if k.value is not None and not (isinstance(k.value, (int, float)) and k.value >= 0):
        raise ConfigError("kappa_mode.value must be a nonnegative number", "value")
    prof = cfg.moment_profile
    if not isinstance(prof, dict) or prof.get("family") not in _PROFILE_KEYS:
        raise ConfigError(f"moment_profile.family must be one of {sorted(_PROFILE_KEYS)}", "moment_profile")
    extra = sorted(set(prof) - {"family"} - _PROFILE_KEYS[prof["family"]])
    if extra:
        raise ConfigError(f"unknown key {extra[0]!r} in moment_profile", extra[0])
    missing = sorted(_PROFILE_REQUIRED.get(prof["family"], set()) - set(prof))
    if missing:
        raise ConfigError(f"moment_profile is missing {missing[0]!r}", "moment_profile")
    try:
        cfg.entry_profile()
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid moment profile: {exc}", "moment_profile") from None
    for name in ("paths",):
        if not _is_int(getattr(cfg, name)) or getattr(cfg, name) < 1:
            raise ConfigError(f"{name} must be a positive integer", name)
    if cfg.tail_paths is not None and (not _is_int(cfg.tail_paths) or cfg.tail_paths < 1):
        raise ConfigError("tail_paths must be a positive integer or null", "tail_paths")
    if not _is_int(cfg.seed) or cfg.seed < 0 or cfg.seed >= 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer", "seed")
    if not (isinstance(cfg.beta_scale, (int, float)) and cfg.beta_scale > 0):
        raise ConfigError("beta_scale must be positive", "beta_scale")
    if any(t < math.e * (1 - 1e-12) for t in cfg.t_grid):
        raise ConfigError("t_grid values must be >= e", "t_grid")
    if any(p < 1 for p in cfg.p_values):
        raise ConfigError("p_values must be >= 1", "p_values")
    if cfg.output.format not in ("csv", "json"):
        raise ConfigError("output.format must be 'csv' or 'json'", "format")


def parse_config(data: dict) -> ExperimentConfig:
    cfg = _build(ExperimentConfig, data, "")
    validate(cfg)
    return cfg


def _line_of(text: str, key: Optional[str]) -> int:
    if key is None:
        return 1
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else 1


def load_config(path) -> ExperimentConfig:
    """Parse a JSON config file; errors are ConfigError with a ``path:line:`` prefix."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}:1: cannot read config: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from None
    try:
        return parse_config(data)
    except ConfigError as exc:
        raise ConfigError(f"{path}:{_line_of(text, exc.key)}: {exc}", exc.key) from None
