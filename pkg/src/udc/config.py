"""Run configuration: a YAML tree with every field defaulted, flag
overrides, and lossless round-tripping of the materialized result."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml

from .corpus import DATASET_FORMATS, SplitSpec
from .errors import ConfigError
from .evaluation import DEFAULT_RATIOS, MODES
from .metric import MetricConfig
from .training import TrainConfig
from .uncertainty import SCORER_KINDS, ScorerConfig


@dataclass
class DatasetConfig:
    path: str = ""
    format: str = "jsonl"
    strip_headers: bool = False

    def __post_init__(self):
        if self.format not in DATASET_FORMATS:
            raise ConfigError(f"dataset.format must be one of {DATASET_FORMATS}")


@dataclass
class VocabConfig:
    min_count: int = 2


@dataclass
class EmbeddingConfig:
    path: str | None = None  # None: random initialization
    dim: int = 200
    seed: int = 0


@dataclass
class EncoderSettings:
    embed_dim: int = 200
    kernel_sizes: list[int] = field(default_factory=lambda: [3, 4, 5])
    filters_per_kernel: int = 100
    dropout_p: float = 0.5
    max_len: int = 200
    freeze_embedding: bool = False


@dataclass
class MetricSettings:
    enable: bool = True
    margin: float = 0.5
    lambda_weight: float = 0.1

    def to_metric_config(self) -> MetricConfig | None:
        return MetricConfig(self.margin, self.lambda_weight) if self.enable else None


@dataclass
class DeferralConfig:
    ratios: list[float] = field(default_factory=lambda: list(DEFAULT_RATIOS))
    modes: list[str] = field(default_factory=lambda: list(MODES))
    random_trials: int = 100

    def __post_init__(self):
        for m in self.modes:
            if m not in MODES:
                raise ConfigError(f"unknown deferral mode {m!r}")


@dataclass
class SweepPoint:
    margin: float
    lambda_weight: float


@dataclass
class RunConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    split: SplitSpec = field(default_factory=SplitSpec)
    vocab: VocabConfig = field(default_factory=VocabConfig)
    embeddings: EmbeddingConfig = field(default_factory=EmbeddingConfig)
    encoder: EncoderSettings = field(default_factory=EncoderSettings)
    train: TrainConfig = field(default_factory=TrainConfig)
    metric: MetricSettings = field(default_factory=MetricSettings)
    scorers: list[ScorerConfig] = field(
        default_factory=lambda: [ScorerConfig(kind) for kind in SCORER_KINDS]
    )
    deferral: DeferralConfig = field(default_factory=DeferralConfig)
    sweep: list[SweepPoint] = field(default_factory=list)
    output_dir: str = "out"
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


_SECTIONS = {
    "dataset": DatasetConfig,
    "split": SplitSpec,
    "vocab": VocabConfig,
    "embeddings": EmbeddingConfig,
    "encoder": EncoderSettings,
    "train": TrainConfig,
    "metric": MetricSettings,
    "deferral": DeferralConfig,
}


def _build_section(cls, data, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


_SEEDED_SECTIONS = ("split", "train", "embeddings")


def config_from_dict(data: dict) -> RunConfig:
    data = dict(data or {})
    master_seed = int(data.get("seed", 0))
    # Sections that do not pin their own seed inherit the master seed.
    for key in _SEEDED_SECTIONS:
        section = data.get(key)
        if isinstance(section, dict):
            section.setdefault("seed", master_seed)
        elif key not in data:
            data[key] = {"seed": master_seed}
    kwargs = {}
    for key, cls in _SECTIONS.items():
        if key in data:
            kwargs[key] = _build_section(cls, data.pop(key), key)
    if "scorers" in data:
        raw = data.pop("scorers")
        if not isinstance(raw, list):
            raise ConfigError("scorers: expected a list")
        for s in raw:
            if isinstance(s, dict):
                s.setdefault("seed", master_seed)
        kwargs["scorers"] = [_build_section(ScorerConfig, s, "scorers") for s in raw]
    else:
        kwargs["scorers"] = [
            ScorerConfig(kind, seed=master_seed) for kind in SCORER_KINDS
        ]
    if "sweep" in data:
        raw = data.pop("sweep")
        kwargs["sweep"] = [_build_section(SweepPoint, s, "sweep") for s in raw]
    for key in ("output_dir", "seed"):
        if key in data:
            kwargs[key] = data.pop(key)
    if data:
        raise ConfigError(f"unknown config keys: {sorted(data)}")
    return RunConfig(**kwargs)


def load_run_config(path: str | Path | None, overrides: dict | None = None) -> RunConfig:
    """Load YAML (or start from defaults), then apply flag overrides
    (seed, output_dir)."""
    data = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        loaded = yaml.safe_load(p.read_text(encoding="utf-8"))
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"{p}: top level must be a mapping")
        data = loaded
    cfg = config_from_dict(data)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key == "seed":
            cfg.seed = int(value)
            cfg.split.seed = int(value)
            cfg.train.seed = int(value)
            cfg.embeddings.seed = int(value)
            for s in cfg.scorers:
                s.seed = int(value)
        elif key == "output_dir":
            cfg.output_dir = str(value)
        else:
            raise ConfigError(f"unknown override {key!r}")
    return cfg


def write_effective_config(cfg: RunConfig, path: str | Path) -> None:
    """Emit the fully materialized configuration (all defaults filled)."""
    Path(path).write_text(
        yaml.safe_dump(cfg.to_dict(), sort_keys=True), encoding="utf-8"
    )


def read_effective_config(path: str | Path) -> RunConfig:
    return config_from_dict(yaml.safe_load(Path(path).read_text(encoding="utf-8")))
