"""Experiment configuration, loaded from a small YAML file.

Example::

    seed: 1234
    out: runs/desk
    frontend: {sample_rate_hz: 44100, win_len: 2048, hop: 512, n_mels: 128}
    dataset:
      counts: {train: 500, val: 100, C1: 50, C2: 50, C3: 50, C4: 50}
      duration_s: 2.0
      adapt_s: 1.0
    train: {profile: desk, epochs: 30, batch_size: 16, lr: 0.001}
    variants: [M1, M1+, M2, M2+]
    eval: {filter_len: 512}
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import yaml

from .errors import DataError
from .frontend import FrontendConfig
from .neural.model import get_variant
from .neural.train import TrainConfig
from .seeding import derive_seed
from .synth import DEFAULT_ROSTER, SPLITS, load_roster

DESK_COUNTS = {"train": 500, "val": 100, "C1": 50, "C2": 50, "C3": 50, "C4": 50}


@dataclass
class DatasetConfig:
    counts: dict = field(default_factory=lambda: dict(DESK_COUNTS))
    duration_s: float = 2.0
    adapt_s: float = 1.0
    roster: list | None = None  # raw class entries; None = built-in procedural roster

    def classes(self):
        return DEFAULT_ROSTER if self.roster is None else load_roster(self.roster)


@dataclass
class ExperimentConfig:
    seed: int
    out: Path = Path("runs/desk")
    frontend: FrontendConfig = field(default_factory=FrontendConfig)
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    train: TrainConfig = field(default_factory=lambda: TrainConfig(lr=1e-3))
    variants: list = field(default_factory=lambda: ["M1", "M1+", "M2", "M2+"])
    filter_len: int = 512

    def __post_init__(self):
        if self.seed is None:
            raise DataError("a master seed is required")
        self.seed = int(self.seed)
        self.out = Path(self.out)
        for v in self.variants:
            get_variant(v)
        for split in self.dataset.counts:
            if split not in SPLITS:
                raise DataError(f"unknown split {split!r} in dataset counts")
        for cls in self.dataset.classes():
            for p in cls.pool:
                if not Path(p).is_file():
                    raise DataError(f"class {cls.name}: pool file {p} not found")

    def train_config(self, variant: str) -> TrainConfig:
        return replace(self.train, variant=variant, seed=derive_seed(self.seed, "train", variant))

    @property
    def manifest_path(self) -> Path:
        return self.out / "data" / "manifest.jsonl"

    def checkpoint_path(self, variant: str) -> Path:
        return self.out / "models" / f"{variant}.ckpt"

    def estimates_dir(self, tag: str) -> Path:
        return self.out / "estimates" / tag

    def to_dict(self) -> dict:
        d = asdict(self)
        d["out"] = str(self.out)
        return d


def _build(cls, raw, where):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise DataError(f"config section {where!r} must be a mapping")
    known = {f.name for f in fields(cls)}
    unknown = set(raw) - known
    if unknown:
        raise DataError(f"unknown keys in {where!r}: {sorted(unknown)}")
    try:
        return cls(**raw)
    except (TypeError, ValueError) as exc:
        raise DataError(f"invalid {where!r} section: {exc}") from exc


def config_from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise DataError("config file must contain a mapping")
    raw = dict(raw)
    allowed = {"seed", "out", "frontend", "dataset", "train", "variants", "eval"}
    unknown = set(raw) - allowed
    if unknown:
        raise DataError(f"unknown config keys: {sorted(unknown)}")
    train_raw = {"lr": 1e-3, **(raw.get("train") or {})}
    evaluation = raw.get("eval") or {}
    kwargs = dict(
        seed=raw.get("seed"),
        frontend=_build(FrontendConfig, raw.get("frontend"), "frontend"),
        dataset=_build(DatasetConfig, raw.get("dataset"), "dataset"),
        train=_build(TrainConfig, train_raw, "train"),
        filter_len=int(evaluation.get("filter_len", 512)),
    )
    if "out" in raw:
        kwargs["out"] = raw["out"]
    if "variants" in raw:
        kwargs["variants"] = list(raw["variants"])
    try:
        return ExperimentConfig(**kwargs)
    except ValueError as exc:
        raise DataError(str(exc)) from exc


def load_config(path, **overrides) -> ExperimentConfig:
    """Read a YAML config; non-None ``overrides`` replace top-level keys (e.g. ``seed``)."""
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise DataError(f"{path}: cannot read config ({exc.strerror})") from exc
    except yaml.YAMLError as exc:
        raise DataError(f"{path}: invalid YAML ({exc})") from exc
    if raw is not None and not isinstance(raw, dict):
        raise DataError(f"{path}: config file must contain a mapping")
    raw = dict(raw or {})
    raw.update({k: v for k, v in overrides.items() if v is not None})
    return config_from_dict(raw)
