"""Run configuration: every tunable of the pipeline in one flat record.

Config files are ``key = value`` lines; ``#`` starts a comment.
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .features import FeatureMode, FeatureSpec
from .prefilter import PrefilterParams
from .preprocess import AheParams, PrefilterPreprocessParams


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    # pre-screening
    s_prescreen: int = 5
    t: float = 10
    feature_mode: str = "combined"
    ahe_tile_grid: int = 8
    ahe_clip_fraction: float = 0.01
    keep: int = 11  # 0 disables backward elimination
    # shared
    fov_threshold: int = 10
    # pre-filtering
    background_median: int = 25
    denoise_median: int = 13
    unsharp_amount: float = 1.0
    unsharp_radius: float = 2.0
    s_prefilter: int = 75
    n: int = 30
    connectivity: int = 8
    exclusion_margin: int = 12
    # execution
    workers: int = 1

    def __post_init__(self):
        try:
            self.feature_spec
            self.ahe_params
            self.prefilter_preprocess_params
            self.prefilter_params
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.keep < 0:
            raise ConfigError(f"keep must be >= 0, got {self.keep}")
        if not 0 <= self.fov_threshold <= 255:
            raise ConfigError(f"fov_threshold must be in [0, 255], got {self.fov_threshold}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")

    @property
    def feature_spec(self) -> FeatureSpec:
        return FeatureSpec(FeatureMode(self.feature_mode), self.s_prescreen, self.t)

    @property
    def ahe_params(self) -> AheParams:
        return AheParams(self.ahe_tile_grid, self.ahe_clip_fraction)

    @property
    def prefilter_preprocess_params(self) -> PrefilterPreprocessParams:
        return PrefilterPreprocessParams(
            self.background_median, self.denoise_median, self.unsharp_amount, self.unsharp_radius
        )

    @property
    def prefilter_params(self) -> PrefilterParams:
        return PrefilterParams(self.s_prefilter, self.n, self.connectivity, self.exclusion_margin)

    def as_dict(self) -> dict:
        return asdict(self)

    def with_overrides(self, overrides: dict) -> "RunConfig":
        return replace(self, **coerce(overrides))


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def coerce(raw: dict) -> dict:
    out = {}
    for key, value in raw.items():
        if key not in _TYPES:
            raise ConfigError(f"unknown config key {key!r}")
        typ = _TYPES[key]
        if not isinstance(value, str):
            out[key] = value
            continue
        try:
            if typ == "int":
                out[key] = int(value)
            elif typ == "float":
                num = float(value)
                out[key] = int(num) if num.is_integer() and "." not in value and "e" not in value.lower() else num
            else:
                out[key] = value
        except ValueError:
            raise ConfigError(f"{key}: cannot parse {value!r} as {typ}") from None
    return out


def parse_config(text: str) -> RunConfig:
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        raw[key] = value
    try:
        return RunConfig(**coerce(raw))
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str | os.PathLike | None) -> RunConfig:
    if path is None:
        return RunConfig()
    return parse_config(Path(path).read_text(encoding="utf-8"))


def format_config(cfg: RunConfig) -> str:
    return "".join(f"{k} = {v}\n" for k, v in cfg.as_dict().items())
