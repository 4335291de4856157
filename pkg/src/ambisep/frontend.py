"""STFT analysis/synthesis, Mel projection, log and PCEN compression.

Conventions: spectrograms are ``(frames, bins)`` arrays, i.e. time along
axis 0. The STFT uses a periodic Hann window and centres frames with
``win_len // 2`` samples of reflect padding on both sides.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio_io import AudioClip
from .errors import DataError


@dataclass(frozen=True)
class FrontendConfig:
    win_len: int = 2048
    hop: int = 512
    n_mels: int = 128
    fmin: float = 0.0
    fmax: float | None = None
    sample_rate_hz: int = 44100

    def __post_init__(self):
        if self.win_len <= 0 or self.win_len & (self.win_len - 1):
            raise ValueError(f"win_len must be a power of two, got {self.win_len}")
        if not 0 < self.hop <= self.win_len:
            raise ValueError(f"hop must be in (0, win_len], got {self.hop}")
        if self.n_mels < 1:
            raise ValueError("n_mels must be positive")
        if not 0 <= self.fmin < self.f_max <= self.sample_rate_hz / 2:
            raise ValueError(f"need 0 <= fmin < fmax <= Nyquist, got {self.fmin}, {self.f_max}")

    @property
    def f_max(self) -> float:
        return self.sample_rate_hz / 2 if self.fmax is None else float(self.fmax)

    @property
    def n_bins(self) -> int:
        return self.win_len // 2 + 1

    def n_frames(self, n_samples: int) -> int:
        return math.ceil(n_samples / self.hop)


@dataclass(frozen=True, eq=False)
class ComplexSpectrogram:
    values: np.ndarray
    config: FrontendConfig

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[1] != self.config.n_bins:
            raise DataError(
                f"spectrogram shape {self.values.shape} inconsistent with {self.config.n_bins} bins")

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.values)


@dataclass(frozen=True)
class PcenParams:
    s: float = 0.025
    eps: float = 1e-6
    alpha: float = 0.98
    delta: float = 2.0
    r: float = 0.5

    def __post_init__(self):
        if not (0 < self.s <= 1 and self.eps > 0 and 0 < self.alpha <= 1
                and self.delta >= 0 and 0 < self.r <= 1):
            raise ValueError(f"invalid PCEN parameters {self}")


@dataclass(frozen=True, eq=False)
class MelFilterbank:
    weights: np.ndarray  # (n_mels, n_bins)
    center_hz: np.ndarray = field(repr=False)


def hann_periodic(n: int) -> np.ndarray:
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def _samples(clip) -> np.ndarray:
    if isinstance(clip, AudioClip):
        return clip.samples
    return np.asarray(clip, dtype=np.float64)


def stft(clip, cfg: FrontendConfig = FrontendConfig()) -> ComplexSpectrogram:
    x = _samples(clip)
    n = x.size
    if n < cfg.win_len:
        raise DataError(f"clip of {n} samples is shorter than one window ({cfg.win_len})")
    half = cfg.win_len // 2
    padded = np.pad(x, half, mode="reflect")
    n_frames = cfg.n_frames(n)
    frames = np.lib.stride_tricks.sliding_window_view(padded, cfg.win_len)[::cfg.hop][:n_frames]
    spec = np.fft.rfft(frames * hann_periodic(cfg.win_len), axis=1)
    return ComplexSpectrogram(spec, cfg)


def istft(spec: ComplexSpectrogram, cfg: FrontendConfig | None = None,
          out_len: int | None = None) -> AudioClip:
    cfg = spec.config if cfg is None else cfg
    values = np.asarray(spec.values if isinstance(spec, ComplexSpectrogram) else spec)
    if values.ndim != 2 or values.shape[1] != cfg.n_bins:
        raise DataError(f"spectrogram shape {values.shape} inconsistent with {cfg.n_bins} bins")
    n_frames = values.shape[0]
    if out_len is None:
        out_len = n_frames * cfg.hop
    if cfg.n_frames(out_len) != n_frames:
        raise DataError(f"{n_frames} frames cannot produce {out_len} samples at hop {cfg.hop}")

    win = hann_periodic(cfg.win_len)
    frames = np.fft.irfft(values, n=cfg.win_len, axis=1) * win
    total = (n_frames - 1) * cfg.hop + cfg.win_len
    y = np.zeros(total)
    norm = np.zeros(total)
    sq = win * win
    for t in range(n_frames):
        s = t * cfg.hop
        y[s:s + cfg.win_len] += frames[t]
        norm[s:s + cfg.win_len] += sq
    half = cfg.win_len // 2
    y = y[half:half + out_len]
    norm = norm[half:half + out_len]
    tiny = np.finfo(np.float64).tiny
    y = np.where(norm > tiny, y / np.maximum(norm, tiny), 0.0)
    return AudioClip(y, cfg.sample_rate_hz)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(cfg: FrontendConfig = FrontendConfig()) -> MelFilterbank:
    """Triangular filters with peak 1, centres evenly spaced on the HTK Mel scale."""
    edges = mel_to_hz(np.linspace(hz_to_mel(cfg.fmin), hz_to_mel(cfg.f_max), cfg.n_mels + 2))
    bin_hz = cfg.sample_rate_hz / cfg.win_len
    centers = edges[1:-1]
    nearest = np.round(centers / bin_hz)
    if np.any(np.diff(nearest) == 0):
        k = int(np.flatnonzero(np.diff(nearest) == 0)[0])
        raise ValueError(
            f"n_mels={cfg.n_mels} too large for the frequency range: filters {k} and {k + 1} "
            f"both centre on STFT bin {int(nearest[k])}")

    freqs = np.arange(cfg.n_bins) * bin_hz
    lower, center, upper = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs - lower) / (center - lower)
    falling = (upper - freqs) / (upper - center)
    weights = np.maximum(0.0, np.minimum(rising, falling))
    return MelFilterbank(weights, centers)


def to_mel(mag: np.ndarray, fb: MelFilterbank) -> np.ndarray:
    mag = np.asarray(mag)
    if mag.shape[-1] != fb.weights.shape[1]:
        raise DataError(f"magnitude has {mag.shape[-1]} bins, filterbank expects {fb.weights.shape[1]}")
    return mag @ fb.weights.T


def log_compress(mel: np.ndarray, floor: float = 1e-5) -> np.ndarray:
    if floor <= 0:
        raise ValueError("floor must be positive")
    return np.log(np.asarray(mel) + floor)


def pcen(mel: np.ndarray, p: PcenParams = PcenParams()) -> np.ndarray:
    """Per-channel energy normalisation along the frame axis (axis 0)."""
    mel = np.asarray(mel, dtype=np.float64)
    smooth = np.empty_like(mel)
    smooth[0] = mel[0]
    for n in range(1, mel.shape[0]):
        smooth[n] = (1.0 - p.s) * smooth[n - 1] + p.s * mel[n]
    return (mel / (p.eps + smooth) ** p.alpha + p.delta) ** p.r - p.delta ** p.r


def mel_mask_to_stft(mask_mel: np.ndarray, fb: MelFilterbank) -> np.ndarray:
    """Spread a Mel-band mask onto STFT bins by a column-normalised filterbank."""
    mask_mel = np.asarray(mask_mel, dtype=np.float64)
    w = fb.weights
    if mask_mel.shape[-1] != w.shape[0]:
        raise DataError(f"mask has {mask_mel.shape[-1]} bands, filterbank has {w.shape[0]}")
    col = w.sum(axis=0)
    covered = np.flatnonzero(col > 0)
    norm = np.zeros_like(w)
    norm[:, covered] = w[:, covered] / col[covered]
    out = mask_mel @ norm
    if covered.size < w.shape[1]:
        bins = np.arange(w.shape[1])
        pos = np.searchsorted(covered, bins).clip(1, covered.size - 1)
        left, right = covered[pos - 1], covered[pos]
        nearest = np.where(np.abs(bins - left) <= np.abs(right - bins), left, right)
        if covered.size == 1:
            nearest = np.full_like(bins, covered[0])
        out = out[..., nearest]
    return np.clip(out, 0.0, 1.0)


def dump_matrix(path, matrix: np.ndarray) -> None:
    """Write ``rows, cols`` (uint32) then row-major float32, all little-endian."""
    m = np.asarray(matrix)
    if m.ndim != 2:
        raise ValueError("only 2-D matrices can be dumped")
    Path(path).write_bytes(struct.pack("<II", *m.shape) + m.astype("<f4").tobytes())


def load_matrix(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < 8:
        raise DataError(f"{path}: truncated matrix header")
    rows, cols = struct.unpack_from("<II", data)
    if len(data) != 8 + 4 * rows * cols:
        raise DataError(f"{path}: expected {rows}x{cols} floats, file has {len(data) - 8} bytes")
    return np.frombuffer(data, dtype="<f4", offset=8).reshape(rows, cols).astype(np.float64)
