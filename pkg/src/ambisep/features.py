"""Network inputs shared by training and separation."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .audio_io import AudioClip
from .frontend import FrontendConfig, PcenParams, log_compress, mel_filterbank, pcen, stft, to_mel

LOG_FLOOR = 1e-5


@lru_cache(maxsize=8)
def filterbank_for(cfg: FrontendConfig):
    return mel_filterbank(cfg)


def mel_spectrogram(clip: AudioClip, cfg: FrontendConfig) -> np.ndarray:
    return to_mel(np.abs(stft(clip, cfg).values), filterbank_for(cfg))


def network_input(mel: np.ndarray, mode: str, pcen_params: PcenParams = PcenParams()) -> np.ndarray:
    if mode == "log":
        return log_compress(mel, LOG_FLOOR)
    if mode == "pcen":
        return pcen(mel, pcen_params)
    raise ValueError(f"unknown feature mode {mode!r}")


def adaptation_input(clip: AudioClip, cfg: FrontendConfig) -> np.ndarray:
    # the summary network always sees log-Mel frames, whatever the main input is
    return log_compress(mel_spectrogram(clip, cfg), LOG_FLOOR)


@dataclass
class SceneFeatures:
    scene_id: str
    mix_mel: np.ndarray
    fg_mel: np.ndarray
    inputs: np.ndarray
    adapt: np.ndarray | None = None

    @property
    def n_frames(self) -> int:
        return self.mix_mel.shape[0]
