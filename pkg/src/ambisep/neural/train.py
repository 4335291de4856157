"""Training loop for the four model variants.

Every random choice (batch order, crop offsets, dropout masks, initial
weights) is derived from ``TrainConfig.seed`` and the epoch/batch index, so a
run resumed from an epoch-boundary state replays the same trajectory.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..audio_io import read_wav
from ..errors import CheckpointError, DataError
from ..features import SceneFeatures, adaptation_input, mel_spectrogram, network_input
from ..frontend import FrontendConfig
from ..seeding import derive_seed
from . import model
from .checkpoint import load_checkpoint, save_checkpoint
from .optim import AdamState, adam_step

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    variant: str = "M1"
    profile: str = "desk"
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    segment_frames: int = 170
    dropout: float = 0.2
    epochs: int = 30
    batch_size: int = 16
    seed: int = 0

    def __post_init__(self):
        model.get_variant(self.variant)
        if self.profile not in model.PROFILES:
            raise ValueError(f"unknown size profile {self.profile!r}")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must be in [0, 1)")
        if self.segment_frames < 1 or self.batch_size < 1 or self.epochs < 0:
            raise ValueError("segment_frames, batch_size must be positive and epochs non-negative")

    def size_profile(self, n_mels: int = 128) -> model.SizeProfile:
        prof = model.PROFILES[self.profile]
        return prof if prof.n_mels == n_mels else model.SizeProfile(**{**asdict(prof), "n_mels": n_mels})


@dataclass
class TrainResult:
    params: dict
    aux: dict | None
    curve: list = field(default_factory=list)  # (epoch, train_loss, val_loss)
    best_epoch: int = 0
    best_val: float = float("inf")


def scene_features(record, cfg: FrontendConfig, variant: model.Variant) -> SceneFeatures:
    mix = read_wav(record.mix_path)
    fg = read_wav(record.fg_path)
    for clip, p in ((mix, record.mix_path), (fg, record.fg_path)):
        if clip.sample_rate_hz != cfg.sample_rate_hz:
            raise DataError(f"{p}: sample rate {clip.sample_rate_hz}, frontend expects {cfg.sample_rate_hz}")
    mix_mel = mel_spectrogram(mix, cfg)
    adapt = None
    if variant.uses_aux:
        if record.adapt_path is None:
            raise DataError(f"scene {record.id}: variant {variant.name} needs an adaptation segment")
        adapt = adaptation_input(read_wav(record.adapt_path), cfg)
    return SceneFeatures(record.id, mix_mel, mel_spectrogram(fg, cfg),
                         network_input(mix_mel, variant.features), adapt)


def _batch(scenes, seg, offsets, dtype):
    def stack(get):
        return np.stack([get(s)[o:o + seg] for s, o in zip(scenes, offsets)]).astype(dtype)
    x = stack(lambda s: s.inputs)
    mix = stack(lambda s: s.mix_mel)
    fg = stack(lambda s: s.fg_mel)
    adapt = None
    if scenes[0].adapt is not None:
        na = min(s.adapt.shape[0] for s in scenes)
        adapt = np.stack([s.adapt[:na] for s in scenes]).astype(dtype)
    return x, mix, fg, adapt


def _evaluate(params, aux, scenes, seg, batch_size) -> float:
    dtype = params["out.W"].dtype
    total = 0.0
    for i in range(0, len(scenes), batch_size):
        chunk = scenes[i:i + batch_size]
        x, mix, fg, adapt = _batch(chunk, seg, [0] * len(chunk), dtype)
        lam = model.aux_forward(aux, adapt) if aux is not None else None
        mask = model.forward(params, x, lam, mode="eval")
        total += model.loss(mask, mix, fg) * len(chunk)
    return total / len(scenes)


def _state_tensors(state: AdamState, best: dict) -> dict:
    out = {f"adam.m.{k}": v for k, v in state.m.items()}
    out.update({f"adam.v.{k}": v for k, v in state.v.items()})
    out.update({f"best.{k}": v for k, v in best.items()})
    return out


def fit(train_scenes: list, val_scenes: list, config: TrainConfig, n_mels: int = 128,
        checkpoint_path=None, state_path=None, resume: bool = False, dtype=np.float32) -> TrainResult:
    """Optimise a fresh (or resumed) network on pre-computed scene features."""
    if not train_scenes or not val_scenes:
        raise DataError("training needs non-empty train and val splits")
    variant = model.get_variant(config.variant)
    profile = config.size_profile(n_mels)
    seg = min(config.segment_frames, min(s.n_frames for s in train_scenes + val_scenes))
    if seg < config.segment_frames:
        log.info("scenes shorter than %d frames: using %d-frame segments", config.segment_frames, seg)

    params = model.init_mask_net(profile, derive_seed(config.seed, "init", "main"), dtype)
    aux = model.init_aux_net(profile, derive_seed(config.seed, "init", "aux"), dtype) if variant.uses_aux else None
    trainable = {**params, **(aux or {})}
    state = AdamState.zeros_like(trainable)
    result = TrainResult(params, aux)
    best = {k: v.copy() for k, v in trainable.items()}
    start_epoch = 1
    run_meta = {"train": asdict(config)}

    if resume and state_path is not None and Path(state_path).exists():
        ck = load_checkpoint(state_path, expect_variant=config.variant)
        if ck.meta.get("train") != asdict(config):
            raise CheckpointError(f"{state_path}: training configuration differs from the resumed run")
        for k in trainable:
            trainable[k][...] = (ck.aux if k.startswith("aux.") else ck.params)[k]
            state.m[k][...] = ck.extra[f"adam.m.{k}"]
            state.v[k][...] = ck.extra[f"adam.v.{k}"]
            best[k] = ck.extra[f"best.{k}"].copy()
        state.step = ck.meta["step"]
        result.curve = [tuple(row) for row in ck.meta["curve"]]
        result.best_epoch, result.best_val = ck.meta["best_epoch"], ck.meta["best_val"]
        start_epoch = ck.meta["epoch"] + 1
        log.info("resumed %s at epoch %d", config.variant, start_epoch)

    n = len(train_scenes)
    for epoch in range(start_epoch, config.epochs + 1):
        rng = np.random.default_rng(derive_seed(config.seed, "epoch", epoch))
        order = rng.permutation(n)
        running, seen = 0.0, 0
        for b, start in enumerate(range(0, n, config.batch_size)):
            chunk = [train_scenes[i] for i in order[start:start + config.batch_size]]
            offsets = [int(rng.integers(0, s.n_frames - seg + 1)) for s in chunk]
            x, mix, fg, adapt = _batch(chunk, seg, offsets, dtype)
            lam, aux_cache = model.aux_forward(aux, adapt, return_cache=True) if aux is not None else (None, None)
            _, cache = model.forward(params, x, lam, mode="train", dropout=config.dropout,
                                     dropout_seed=derive_seed(config.seed, "dropout", epoch, b),
                                     return_cache=True)
            value, grads = model.backward(params, cache, mix, fg, aux, aux_cache)
            adam_step(trainable, grads, state, config.lr, config.beta1, config.beta2, config.adam_eps)
            running += value * len(chunk)
            seen += len(chunk)
        train_loss = running / seen
        val_loss = _evaluate(params, aux, val_scenes, seg, config.batch_size)
        result.curve.append((epoch, train_loss, val_loss))
        log.info("%s epoch %d: train %.6g val %.6g", config.variant, epoch, train_loss, val_loss)

        if val_loss < result.best_val:
            result.best_val, result.best_epoch = val_loss, epoch
            best = {k: v.copy() for k, v in trainable.items()}
            if checkpoint_path is not None:
                _save_best(checkpoint_path, best, variant, profile, run_meta, result)
        if state_path is not None:
            meta = {**run_meta, "epoch": epoch, "step": state.step, "curve": result.curve,
                    "best_epoch": result.best_epoch, "best_val": result.best_val}
            save_checkpoint(state_path, params, aux, config.variant, profile, meta, _state_tensors(state, best))

    result.params = {k: v for k, v in best.items() if not k.startswith("aux.")}
    result.aux = {k: v for k, v in best.items() if k.startswith("aux.")} if aux is not None else None
    if checkpoint_path is not None:
        _save_best(checkpoint_path, best, variant, profile, run_meta, result)
    return result


def _save_best(path, best, variant, profile, run_meta, result):
    params = {k: v for k, v in best.items() if not k.startswith("aux.")}
    aux = {k: v for k, v in best.items() if k.startswith("aux.")} if variant.uses_aux else None
    meta = {**run_meta, "best_epoch": result.best_epoch, "best_val": result.best_val}
    save_checkpoint(path, params, aux, variant.name, profile, meta)


def train(manifest, config: TrainConfig, frontend: FrontendConfig = FrontendConfig(), **kwargs) -> TrainResult:
    variant = model.get_variant(config.variant)
    train_recs, val_recs = manifest.split("train"), manifest.split("val")
    if not train_recs or not val_recs:
        raise DataError("manifest needs non-empty train and val splits")
    train_scenes = [scene_features(r, frontend, variant) for r in train_recs]
    val_scenes = [scene_features(r, frontend, variant) for r in val_recs]
    return fit(train_scenes, val_scenes, config, frontend.n_mels, **kwargs)
