"""Mono WAV input/output and simple clip conditioning.

Only the two encodings used throughout the project are handled: 16-bit
little-endian PCM and 32-bit IEEE float. Anything else is rejected with
a :class:`~ambisep.errors.WavFormatError` naming the offending offset.
"""
from __future__ import annotations

import logging
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, WavFormatError

log = logging.getLogger(__name__)

PCM16_SCALE = 32768.0
_FMT_PCM = 0x0001
_FMT_FLOAT = 0x0003


@dataclass(frozen=True, eq=False)
class AudioClip:
    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.float64)
        if x.ndim != 1:
            raise DataError(f"AudioClip must be single channel, got shape {x.shape}")
        if x.size < 1:
            raise DataError("empty clip")
        if not np.all(np.isfinite(x)):
            raise DataError("AudioClip contains non-finite samples")
        if int(self.sample_rate_hz) <= 0:
            raise DataError(f"sample rate must be positive, got {self.sample_rate_hz}")
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))

    def __len__(self):
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz


def read_wav(path) -> AudioClip:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise DataError(f"{path}: cannot read ({exc.strerror})") from exc

    if len(data) < 12 or data[0:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise WavFormatError(f"{path}: malformed header at offset 0 (not RIFF/WAVE)")

    fmt = None
    pcm = None
    pos = 12
    while pos + 8 <= len(data):
        chunk_id = data[pos:pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body = pos + 8
        if body + size > len(data):
            raise WavFormatError(
                f"{path}: malformed header at offset {pos} "
                f"(chunk {chunk_id!r} claims {size} bytes, file truncated)")
        if chunk_id == b"fmt ":
            if size < 16:
                raise WavFormatError(f"{path}: malformed header at offset {pos} (fmt chunk too short)")
            fmt = struct.unpack_from("<HHIIHH", data, body) + (pos,)
        elif chunk_id == b"data":
            pcm = (body, size)
        pos = body + size + (size & 1)

    if fmt is None:
        raise WavFormatError(f"{path}: malformed header (no fmt chunk)")
    if pcm is None:
        raise WavFormatError(f"{path}: malformed header (no data chunk)")

    tag, channels, rate, _, block_align, bits, fmt_pos = fmt
    if channels != 1:
        raise WavFormatError(f"{path}: multichannel input ({channels} channels) at offset {fmt_pos + 10}")
    if tag == _FMT_PCM and bits == 16:
        dtype = "<i2"
    elif tag == _FMT_FLOAT and bits == 32:
        dtype = "<f4"
    else:
        raise WavFormatError(
            f"{path}: unsupported encoding at offset {fmt_pos + 8} (format tag {tag}, {bits} bits)")

    start, size = pcm
    n = size // block_align
    if n == 0:
        raise WavFormatError(f"{path}: empty clip (zero-length data chunk at offset {start - 8})")
    raw = np.frombuffer(data, dtype=dtype, count=n, offset=start)
    if dtype == "<i2":
        samples = raw.astype(np.float64) / PCM16_SCALE
    else:
        samples = raw.astype(np.float64)
    return AudioClip(samples, rate)


def write_wav(path, clip: AudioClip, encoding: str = "float32") -> None:
    x = clip.samples
    if encoding == "pcm16":
        over = int(np.count_nonzero((x < -1.0) | (x > 1.0)))
        if over:
            log.warning("%s: %d samples outside [-1, 1] clamped", path, over)
        codes = np.clip(np.round(np.clip(x, -1.0, 1.0) * PCM16_SCALE), -32768, 32767)
        payload = codes.astype("<i2").tobytes()
        tag, bits = _FMT_PCM, 16
    elif encoding == "float32":
        payload = x.astype("<f4").tobytes()
        tag, bits = _FMT_FLOAT, 32
    else:
        raise ValueError(f"unknown encoding {encoding!r}")

    block = bits // 8
    rate = clip.sample_rate_hz
    header = b"RIFF" + struct.pack("<I", 36 + len(payload)) + b"WAVE"
    header += b"fmt " + struct.pack("<IHHIIHH", 16, tag, 1, rate, rate * block, block, bits)
    header += b"data" + struct.pack("<I", len(payload))
    try:
        Path(path).write_bytes(header + payload)
    except OSError as exc:
        raise DataError(f"{path}: cannot write ({exc.strerror})") from exc


def fit_to_duration(clip: AudioClip, seconds: float) -> AudioClip:
    """Loop or truncate ``clip`` to exactly ``round(seconds * rate)`` samples."""
    if seconds <= 0:
        raise ValueError("seconds must be positive")
    n = int(round(seconds * clip.sample_rate_hz))
    x = clip.samples
    if x.size == n:
        return clip
    if x.size < n:
        x = np.tile(x, math.ceil(n / x.size))
    return AudioClip(x[:n].copy(), clip.sample_rate_hz)


def rms(clip) -> float:
    x = clip.samples if isinstance(clip, AudioClip) else np.asarray(clip, dtype=np.float64)
    return float(np.sqrt(np.mean(np.square(x))))
