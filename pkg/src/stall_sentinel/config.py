"""Pipeline configuration: one flat `key = value` file shared by all CLI
subcommands. Every field is validated on load and the error names the
offending field."""

from __future__ import annotations

import dataclasses
from pathlib import Path

from .background import MixtureParams
from .errors import ConfigError


@dataclasses.dataclass(frozen=True)
class PipelineConfig:
    # frame intake
    mean_threshold: float = 5.0
    sample_period_s: float = 30.0
    # background modeling
    snapshot_interval: int = 120
    max_components: int = 5
    learning_rate: float = 0.05
    var_init: float = 225.0
    var_floor: float = 4.0
    match_threshold_sq: float = 9.0
    background_ratio: float = 0.9
    # detection cleanup
    nms_iou: float = 0.5
    misclass_k: int = 20
    misclass_dist_px: float = 5.0
    slow_k: int = 2
    slow_dist_px: float = 20.0
    # candidate selection
    elbow_k_max: int = 8
    elbow_min_scale_px: float = 12.0
    roi_margin: float = 8.0
    # similarity evidence
    ssim_window: int = 8
    stride: int = 10
    savgol_window: int = 9
    savgol_order: int = 2
    onset_threshold: float = 0.5
    onset_persistence: int = 3
    # sequential detector
    significance: float = 0.05
    alarm_threshold: float = 1.0
    localize_threshold: float | None = None
    calibration_fraction: float = 0.3
    calibration_path: str = ""
    # evaluation
    match_window_s: float = 10.0
    delay_cap_s: float = 300.0
    # misc
    seed: int = 0
    workers: int = 1

    def __post_init__(self) -> None:
        def err(field: str, expect: str) -> None:
            raise ConfigError(f"{field} must be {expect}, got {getattr(self, field)}")

        if not 0.0 <= self.mean_threshold <= 255.0:
            err("mean_threshold", "in [0, 255]")
        if self.sample_period_s <= 0:
            err("sample_period_s", "> 0")
        if self.snapshot_interval < 1:
            err("snapshot_interval", ">= 1")
        if not 1 <= self.max_components <= 16:
            err("max_components", "in [1, 16]")
        if not 0.0 < self.learning_rate < 1.0:
            err("learning_rate", "in (0, 1)")
        if self.var_init <= 0:
            err("var_init", "> 0")
        if self.var_floor <= 0:
            err("var_floor", "> 0")
        if self.match_threshold_sq <= 0:
            err("match_threshold_sq", "> 0")
        if not 0.0 < self.background_ratio < 1.0:
            err("background_ratio", "in (0, 1)")
        if not 0.0 <= self.nms_iou <= 1.0:
            err("nms_iou", "in [0, 1]")
        if self.misclass_k < 1:
            err("misclass_k", ">= 1")
        if self.misclass_dist_px < 0:
            err("misclass_dist_px", ">= 0")
        if self.slow_k < 1:
            err("slow_k", ">= 1")
        if self.slow_dist_px <= 0:
            err("slow_dist_px", "> 0")
        if self.elbow_k_max < 1:
            err("elbow_k_max", ">= 1")
        if self.elbow_min_scale_px < 0:
            err("elbow_min_scale_px", ">= 0")
        if self.roi_margin < 0:
            err("roi_margin", ">= 0")
        if self.ssim_window < 4:
            err("ssim_window", ">= 4")
        if self.stride < 1:
            err("stride", ">= 1")
        if self.savgol_window < 3 or self.savgol_window % 2 == 0:
            err("savgol_window", "odd and >= 3")
        if not 0 <= self.savgol_order < self.savgol_window:
            err("savgol_order", "in [0, savgol_window)")
        if not -1.0 <= self.onset_threshold <= 1.0:
            err("onset_threshold", "in [-1, 1]")
        if self.onset_persistence < 1:
            err("onset_persistence", ">= 1")
        if not 0.0 < self.significance < 1.0:
            err("significance", "in (0, 1)")
        if self.alarm_threshold <= 0:
            err("alarm_threshold", "> 0")
        if self.localize_threshold is not None and not 0.0 <= self.localize_threshold <= 1.0:
            err("localize_threshold", "in [0, 1] or none")
        if not 0.0 < self.calibration_fraction < 1.0:
            err("calibration_fraction", "in (0, 1)")
        if self.match_window_s < 0:
            err("match_window_s", ">= 0")
        if self.delay_cap_s <= 0:
            err("delay_cap_s", "> 0")
        if self.seed < 0:
            err("seed", ">= 0")
        if self.workers < 1:
            err("workers", ">= 1")

    def mixture_params(self) -> MixtureParams:
        return MixtureParams(
            max_components=self.max_components,
            learning_rate=self.learning_rate,
            var_init=self.var_init,
            var_floor=self.var_floor,
            match_threshold_sq=self.match_threshold_sq,
            background_ratio=self.background_ratio,
        )


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(PipelineConfig)}


def parse_config(text: str, source: str = "<string>") -> PipelineConfig:
    """Parse `key = value` lines; `#` starts a comment; unknown or duplicate
    keys are errors."""
    values: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key = key.strip()
        raw = raw.strip()
        if not sep or not key:
            raise ConfigError(f"{source}:{lineno}: expected `key = value`, got {line!r}")
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{source}:{lineno}: unknown config key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate config key {key!r}")
        kind = _FIELD_TYPES[key]
        try:
            if key == "localize_threshold":
                values[key] = None if raw.lower() == "none" else float(raw)
            elif kind == "int":
                values[key] = int(raw)
            elif kind == "float":
                values[key] = float(raw)
            else:
                values[key] = raw
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {raw!r}") from exc
    return PipelineConfig(**values)


def load_config(path: str | Path) -> PipelineConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"), source=str(path))


def format_config(config: PipelineConfig) -> str:
    """Canonical text form listing every field; parse_config round-trips it."""
    lines = []
    for field in dataclasses.fields(PipelineConfig):
        value = getattr(config, field.name)
        if value is None:
            value = "none"
        lines.append(f"{field.name} = {value}")
    return "".join(line + "\n" for line in lines)
