"""Experiment configuration: defaults, config-file loading and merging.

Every baseline value defaults to the reference setup (4096 GPUs,
8-GPU servers, 64-port switches, 9:1 tiered ratio, single plane), so a
plain ``dissect`` run needs no configuration at all.  The config file is
JSON with the same keys as :class:`ExperimentConfig`.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .workloads import DenseAnchors, MoeAnchors

SWEEP_AXES = ("tiered-ratio", "server-size", "inc", "cluster-scale")


@dataclass
class ExperimentConfig:
    arch: str = "both"  # torus | rail | both
    model: str = "both"  # dense | moe | both
    scale: int = 4096
    sweep: str | None = None
    weighting: str = "duration"  # duration | equal
    out_dir: str | None = None
    jobs: int = 1
    inc: bool = False
    figures: bool = True

    # network parameters
    gpus_per_server: int = 8
    switch_radix: int = 64
    tiered_ratio: float = 9.0
    plane_count: int = 1
    torus_a2a: str = "unidirectional"  # or "bidirectional"

    # sweep value grids (baseline ranges)
    ratio_values: list[float] = field(
        default_factory=lambda: [1, 3, 5, 7, 9, 11, 13, 15, 17]
    )
    server_sizes: list[int] = field(
        default_factory=lambda: [8, 16, 32, 64, 128, 256]
    )
    scale_values: list[int] = field(
        default_factory=lambda: [512, 1024, 2048, 4096, 8192, 16384, 32768, 65536]
    )
    plane_values: list[int] = field(default_factory=lambda: [1, 2, 4, 8])

    dense_anchors: DenseAnchors = field(default_factory=DenseAnchors)
    moe_anchors: MoeAnchors = field(default_factory=MoeAnchors)

    def __post_init__(self):
        if self.arch not in ("torus", "rail", "both"):
            raise ConfigError(f"arch must be torus|rail|both, got {self.arch!r}")
        if self.model not in ("dense", "moe", "both"):
            raise ConfigError(f"model must be dense|moe|both, got {self.model!r}")
        if self.sweep is not None and self.sweep not in SWEEP_AXES:
            raise ConfigError(
                f"sweep must be one of {', '.join(SWEEP_AXES)}, got {self.sweep!r}"
            )
        if self.weighting not in ("duration", "equal"):
            raise ConfigError(f"weighting must be duration|equal, got {self.weighting!r}")
        if self.torus_a2a not in ("unidirectional", "bidirectional"):
            raise ConfigError(f"invalid torus_a2a mode {self.torus_a2a!r}")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")

    @property
    def archs(self) -> list[str]:
        return ["torus", "rail"] if self.arch == "both" else [self.arch]

    @property
    def models(self) -> list[str]:
        return ["dense", "moe"] if self.model == "both" else [self.model]

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        return d


def config_from_dict(data: dict) -> ExperimentConfig:
    data = dict(data)
    try:
        if "dense_anchors" in data:
            data["dense_anchors"] = DenseAnchors(**data["dense_anchors"])
        if "moe_anchors" in data:
            data["moe_anchors"] = MoeAnchors(**data["moe_anchors"])
        return ExperimentConfig(**data)
    except TypeError as exc:
        raise ConfigError(f"bad configuration: {exc}") from exc


def load_config_file(path: str | Path) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {p} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config file {p} must hold a JSON object")
    return data


def merge_config(
    file_data: dict | None, overrides: dict | None
) -> ExperimentConfig:
    """File values override defaults; explicit CLI values override both."""
    merged: dict = {}
    if file_data:
        merged.update(file_data)
    if overrides:
        merged.update({k: v for k, v in overrides.items() if v is not None})
    return config_from_dict(merged)
