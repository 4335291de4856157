"""Oracle and model-driven mask separation.

Both maskers produce a Mel-domain mask; from there the path is shared:
project the mask onto STFT bins, scale the complex mixture STFT by the mask
and its complement (keeping the mixture phase), and invert both branches.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio_io import AudioClip
from .errors import DataError
from .features import adaptation_input, filterbank_for, network_input
from .frontend import ComplexSpectrogram, FrontendConfig, istft, mel_mask_to_stft, stft, to_mel
from .neural import model
from .neural.checkpoint import Checkpoint


@dataclass(frozen=True, eq=False)
class TFMask:
    values: np.ndarray
    domain: str  # "mel" or "stft"

    def __post_init__(self):
        if self.domain not in ("mel", "stft"):
            raise ValueError(f"unknown mask domain {self.domain!r}")
        v = np.asarray(self.values, dtype=np.float64)
        if not np.all((v >= 0) & (v <= 1)):
            raise ValueError("mask entries must lie in [0, 1]")
        object.__setattr__(self, "values", v)


@dataclass(eq=False)
class SeparationResult:
    fg_estimate: AudioClip
    bg_estimate: AudioClip
    mask_mel: TFMask
    mask_stft: TFMask


def irm(fg_mel, bg_mel, eps: float = 1e-12) -> TFMask:
    fg_mel, bg_mel = np.asarray(fg_mel), np.asarray(bg_mel)
    if fg_mel.shape != bg_mel.shape:
        raise DataError(f"shape mismatch: {fg_mel.shape} vs {bg_mel.shape}")
    return TFMask(fg_mel / (fg_mel + bg_mel + eps), "mel")


def apply_mask(mask: TFMask, mix: ComplexSpectrogram):
    """Split the mixture STFT into foreground and background with a shared phase."""
    m = mask.values if isinstance(mask, TFMask) else np.asarray(mask, dtype=np.float64)
    if isinstance(mask, TFMask) and mask.domain != "stft":
        raise ValueError("apply_mask needs an STFT-domain mask")
    if m.shape != mix.values.shape:
        raise DataError(f"mask shape {m.shape} does not match spectrogram {mix.values.shape}")
    if not np.all((m >= 0) & (m <= 1)):
        raise ValueError("mask entries must lie in [0, 1]")
    return (ComplexSpectrogram(m * mix.values, mix.config),
            ComplexSpectrogram((1.0 - m) * mix.values, mix.config))


class OracleMasker:
    """Ideal ratio mask on Mel magnitudes of the true sources."""

    def __init__(self, fg: AudioClip, bg: AudioClip, eps: float = 1e-12):
        self.fg, self.bg, self.eps = fg, bg, eps

    def mel_mask(self, mix: AudioClip, mix_spec: ComplexSpectrogram, cfg: FrontendConfig) -> np.ndarray:
        if len(self.fg) != len(mix) or len(self.bg) != len(mix):
            raise DataError("oracle references are not aligned with the mixture")
        fb = filterbank_for(cfg)
        fg_mel = to_mel(np.abs(stft(self.fg, cfg).values), fb)
        bg_mel = to_mel(np.abs(stft(self.bg, cfg).values), fb)
        return irm(fg_mel, bg_mel, self.eps).values


class ModelMasker:
    """Mask predicted by a trained network (variant M1, M1+, M2 or M2+)."""

    def __init__(self, checkpoint: Checkpoint, adaptation: AudioClip | None = None):
        self.ck = checkpoint
        self.variant = model.get_variant(checkpoint.variant)
        if self.variant.uses_aux and adaptation is None:
            raise DataError(f"variant {self.variant.name} requires an adaptation clip")
        if self.variant.uses_aux and checkpoint.aux is None:
            raise DataError(f"checkpoint for {self.variant.name} has no auxiliary network")
        self.adaptation = adaptation if self.variant.uses_aux else None

    def mel_mask(self, mix: AudioClip, mix_spec: ComplexSpectrogram, cfg: FrontendConfig) -> np.ndarray:
        mel = to_mel(np.abs(mix_spec.values), filterbank_for(cfg))
        lam = None
        if self.adaptation is not None:
            lam = model.aux_forward(self.ck.aux, adaptation_input(self.adaptation, cfg))
        mask = model.forward(self.ck.params, network_input(mel, self.variant.features), lam, mode="eval")
        return np.asarray(mask, dtype=np.float64)


def separate(mix: AudioClip, masker, cfg: FrontendConfig = FrontendConfig()) -> SeparationResult:
    if mix.sample_rate_hz != cfg.sample_rate_hz:
        raise DataError(f"mixture rate {mix.sample_rate_hz} Hz, frontend configured for {cfg.sample_rate_hz} Hz")
    spec = stft(mix, cfg)
    mask_mel = TFMask(masker.mel_mask(mix, spec, cfg), "mel")
    mask_stft = TFMask(mel_mask_to_stft(mask_mel.values, filterbank_for(cfg)), "stft")
    fg_spec, bg_spec = apply_mask(mask_stft, spec)
    n = len(mix)
    return SeparationResult(istft(fg_spec, cfg, n), istft(bg_spec, cfg, n), mask_mel, mask_stft)
