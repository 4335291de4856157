"""Procedural foreground/background sounds, SNR mixing and dataset generation.

Foreground classes are short transient events placed in silence (bursts,
chirps, clicks, alarms). Background classes are quasi-stationary noise and
hum textures. The roster mirrors the split structure of the DESED/Audioset
evaluation protocol: 5 seen + 5 unseen foreground classes, 10 seen + 5
unseen background classes. Classes may instead draw from a pool of
user-supplied WAV files (``generator="pool"``).
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .audio_io import AudioClip, fit_to_duration, read_wav, rms, write_wav
from .errors import DataError
from .seeding import derive_seed

log = logging.getLogger(__name__)

SPLITS = ("train", "val", "C1", "C2", "C3", "C4")
EVAL_SPLITS = ("C1", "C2", "C3", "C4")
SNR_RANGE_DB = (-3.0, 3.0)

# (foreground seen?, background seen?) for each split
SPLIT_POOLS = {
    "train": (True, True),
    "val": (True, True),
    "C1": (True, True),
    "C2": (True, False),
    "C3": (False, True),
    "C4": (False, False),
}


@dataclass(frozen=True)
class SoundClass:
    name: str
    kind: str
    seen: bool
    generator: str
    params: Mapping = field(default_factory=dict, hash=False, compare=False)
    pool: tuple = field(default=(), hash=False, compare=False)

    def __post_init__(self):
        if self.kind not in ("foreground", "background"):
            raise ValueError(f"{self.name}: kind must be foreground or background")


@dataclass(frozen=True)
class SceneSpec:
    fg_class: SoundClass
    bg_class: SoundClass
    snr_db: float
    seed: int
    split: str
    duration_s: float = 2.0

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ValueError(f"unknown split {self.split!r}")
        if not SNR_RANGE_DB[0] <= self.snr_db <= SNR_RANGE_DB[1]:
            raise ValueError(f"snr {self.snr_db} dB outside {SNR_RANGE_DB}")
        want_fg, want_bg = SPLIT_POOLS[self.split]
        if self.fg_class.seen != want_fg or self.bg_class.seen != want_bg:
            raise ValueError(f"classes {self.fg_class.name}/{self.bg_class.name} not allowed in {self.split}")


@dataclass(eq=False)
class SceneMixture:
    foreground: AudioClip
    background: AudioClip
    mixture: AudioClip
    bg_gain: float
    snr_db: float
    spec: SceneSpec | None = None

    def achieved_snr_db(self) -> float:
        return 20.0 * np.log10(rms(self.foreground) / rms(self.background.samples * self.bg_gain))


# --- procedural families -------------------------------------------------

def _draw(rng, v):
    """Resolve a parameter: ``(lo, hi)`` draws uniformly, scalars pass through."""
    if isinstance(v, (tuple, list)) and len(v) == 2:
        return float(rng.uniform(v[0], v[1]))
    return v


def _draw_int(rng, v):
    if isinstance(v, (tuple, list)) and len(v) == 2:
        return int(rng.integers(v[0], v[1] + 1))
    return int(v)


def _envelope(n, sr, attack_s=0.005, release_s=0.02):
    env = np.ones(n)
    a = min(n // 2, max(1, int(attack_s * sr)))
    r = min(n - a, max(1, int(release_s * sr)))
    env[:a] = np.sin(0.5 * np.pi * np.arange(a) / a) ** 2
    env[n - r:] *= np.cos(0.5 * np.pi * np.arange(r) / r) ** 2
    return env


def _band_noise(rng, n, sr, lo, hi, tilt=0.0):
    spec = np.fft.rfft(rng.standard_normal(n))
    f = np.fft.rfftfreq(n, 1.0 / sr)
    width = 0.1
    rise = 0.5 * (1 + np.tanh((np.log2(np.maximum(f, 1.0)) - np.log2(lo)) / width))
    fall = 0.5 * (1 - np.tanh((np.log2(np.maximum(f, 1.0)) - np.log2(hi)) / width))
    shape = rise * fall * np.maximum(f, 20.0) ** (-tilt / 2.0)
    x = np.fft.irfft(spec * shape, n=n)
    return x / (np.std(x) + 1e-12)


def _harmonic(rng, t, freq_fn, n_harm, decay):
    """Sum of harmonics of an instantaneous frequency track ``freq_fn(t)``."""
    phase = 2 * np.pi * np.cumsum(freq_fn(t)) * (t[1] - t[0] if t.size > 1 else 0.0)
    out = np.zeros_like(t)
    for k in range(1, n_harm + 1):
        out += decay ** (k - 1) * np.sin(k * phase + rng.uniform(0, 2 * np.pi))
    return out


def _place(rng, event, n):
    """Put ``event`` at a random onset inside ``n`` samples of silence."""
    out = np.zeros(n)
    m = min(event.size, n)
    start = int(rng.integers(0, n - m + 1))
    out[start:start + m] = event[:m]
    return out


def _sequence(rng, sr, n_parts, part_s, gap_s, make_part):
    pieces = []
    for i in range(n_parts):
        m = max(8, int(_draw(rng, part_s) * sr))
        pieces.append(make_part(i, m) * _envelope(m, sr))
        if i < n_parts - 1:
            pieces.append(np.zeros(int(_draw(rng, gap_s) * sr)))
    return np.concatenate(pieces)


def _fg_tone_burst(rng, p, sr):
    f0 = _draw(rng, p["f0"])
    n_harm = _draw_int(rng, p.get("n_harm", 4))
    decay = _draw(rng, p.get("decay", 0.6))
    glide = p.get("glide", 0.0)

    def part(i, m):
        t = np.arange(m) / sr
        g = _draw(rng, glide)
        f_start = f0 * (1 + _draw(rng, p.get("f0_jitter", 0.0)) * rng.uniform(-1, 1))
        return _harmonic(rng, t, lambda tt: f_start * (1 + g * tt / max(tt[-1], 1e-9)), n_harm, decay)

    return _sequence(rng, sr, _draw_int(rng, p["n_bursts"]), p["burst_s"], p["gap_s"], part)


def _fg_chirp(rng, p, sr, exponential):
    n_harm = _draw_int(rng, p.get("n_harm", 1))
    decay = _draw(rng, p.get("decay", 0.5))

    def part(i, m):
        t = np.arange(m) / sr
        f_a, f_b = _draw(rng, p["f_start"]), _draw(rng, p["f_end"])
        T = max(t[-1], 1e-9)
        if exponential:
            track = lambda tt: f_a * (f_b / f_a) ** (tt / T)
        else:
            track = lambda tt: f_a + (f_b - f_a) * tt / T
        return _harmonic(rng, t, track, n_harm, decay)

    return _sequence(rng, sr, _draw_int(rng, p.get("n_reps", 1)), p["dur_s"], p.get("gap_s", 0.1), part)


def _fg_click_train(rng, p, sr):
    n_clicks = _draw_int(rng, p["n_clicks"])
    period = _draw(rng, p["period_s"])
    jitter = p.get("jitter", 0.0)
    decay_s = _draw(rng, p["decay_s"])
    n_partials = _draw_int(rng, p.get("n_partials", 2))
    ring = int(6 * decay_s * sr)
    onsets = np.cumsum([0.0] + [period * (1 + jitter * rng.uniform(-1, 1)) for _ in range(n_clicks - 1)])
    out = np.zeros(int(onsets[-1] * sr) + ring + 1)
    t = np.arange(ring) / sr
    for onset in onsets:
        click = np.zeros(ring)
        for _ in range(n_partials):
            click += np.sin(2 * np.pi * _draw(rng, p["freq"]) * t + rng.uniform(0, 2 * np.pi))
        click *= np.exp(-t / decay_s) * rng.uniform(0.6, 1.0)
        s = int(onset * sr)
        out[s:s + ring] += click
    return out


def _fg_noise_burst(rng, p, sr):
    lo, hi = _draw(rng, p["lo"]), _draw(rng, p["hi"])

    def part(i, m):
        env = np.sin(np.pi * np.arange(m) / m) ** _draw(rng, p.get("shape", 2.0))
        return _band_noise(rng, m, sr, lo, max(hi, lo * 1.5)) * env

    return _sequence(rng, sr, _draw_int(rng, p["n_bursts"]), p["burst_s"], p["gap_s"], part)


def _fg_two_tone(rng, p, sr):
    f1, f2 = _draw(rng, p["f1"]), _draw(rng, p["f2"])
    n_harm = _draw_int(rng, p.get("n_harm", 3))

    def part(i, m):
        t = np.arange(m) / sr
        f = f1 if i % 2 == 0 else f2
        return _harmonic(rng, t, lambda tt: np.full_like(tt, f), n_harm, 0.5)

    return _sequence(rng, sr, _draw_int(rng, p["n_tones"]), p["tone_s"], p.get("gap_s", 0.0), part)


def _bg_colored(rng, p, n, sr):
    return _band_noise(rng, n, sr, 20.0, sr / 2, tilt=_draw(rng, p.get("exponent", 0.0)))


def _bg_band(rng, p, n, sr):
    return _band_noise(rng, n, sr, _draw(rng, p["lo"]), _draw(rng, p["hi"]), _draw(rng, p.get("tilt", 0.0)))


def _bg_hum(rng, p, n, sr):
    t = np.arange(n) / sr
    f0 = _draw(rng, p["f0"])
    n_harm = _draw_int(rng, p.get("n_harm", 6))
    decay = _draw(rng, p.get("decay", 0.7))
    hum = _harmonic(rng, t, lambda tt: np.full_like(tt, f0), n_harm, decay)
    hum /= np.std(hum) + 1e-12
    floor = _draw(rng, p.get("noise_floor", 0.1))
    if floor > 0:
        hum = hum + floor * _band_noise(rng, n, sr, _draw(rng, p.get("floor_lo", 50.0)),
                                         min(_draw(rng, p.get("floor_hi", 8000.0)), 0.45 * sr), 1.0)
    return hum


def _bg_am_noise(rng, p, n, sr):
    t = np.arange(n) / sr
    x = _band_noise(rng, n, sr, _draw(rng, p["lo"]), _draw(rng, p["hi"]), _draw(rng, p.get("tilt", 0.0)))
    rate, depth = _draw(rng, p["rate_hz"]), _draw(rng, p["depth"])
    return x * (1 + depth * np.sin(2 * np.pi * rate * t + rng.uniform(0, 2 * np.pi)))


FOREGROUND_FAMILIES = {
    "tone_burst": _fg_tone_burst,
    "chirp_linear": lambda rng, p, sr: _fg_chirp(rng, p, sr, exponential=False),
    "chirp_exp": lambda rng, p, sr: _fg_chirp(rng, p, sr, exponential=True),
    "click_train": _fg_click_train,
    "noise_burst": _fg_noise_burst,
    "two_tone": _fg_two_tone,
}

BACKGROUND_FAMILIES = {
    "colored_noise": _bg_colored,
    "band_noise": _bg_band,
    "hum": _bg_hum,
    "am_noise": _bg_am_noise,
}


def _fg(name, seen, family, **params):
    return SoundClass(name, "foreground", seen, family, params)


def _bg(name, seen, family, **params):
    return SoundClass(name, "background", seen, family, params)


DEFAULT_ROSTER: tuple[SoundClass, ...] = (
    # seen foreground (stand-ins for dog, speech, cat, dishes, alarm bell)
    _fg("dog", True, "tone_burst", f0=(350, 700), n_harm=(4, 7), decay=(0.5, 0.8),
        n_bursts=(2, 4), burst_s=(0.08, 0.2), gap_s=(0.1, 0.3), glide=(-0.3, 0.0)),
    _fg("speech", True, "tone_burst", f0=(100, 240), n_harm=(8, 14), decay=(0.7, 0.9),
        n_bursts=(3, 6), burst_s=(0.12, 0.3), gap_s=(0.04, 0.15), glide=(-0.25, 0.25), f0_jitter=0.15),
    _fg("cat", True, "chirp_exp", f_start=(500, 900), f_end=(300, 600), n_harm=(3, 6), decay=0.6,
        dur_s=(0.4, 0.9), n_reps=(1, 2), gap_s=(0.1, 0.3)),
    _fg("dishes", True, "click_train", n_clicks=(3, 8), period_s=(0.06, 0.2), jitter=0.5,
        decay_s=(0.01, 0.04), freq=(2000, 6000), n_partials=(2, 4)),
    _fg("alarm_bell_ringing", True, "two_tone", f1=(700, 1200), f2=(1300, 2200), n_harm=(2, 4),
        n_tones=(4, 10), tone_s=(0.06, 0.15), gap_s=(0.0, 0.03)),
    # unseen foreground (stand-ins for door, slam, squeak, coins, chopping food)
    _fg("door", False, "noise_burst", lo=(80, 200), hi=(600, 1500), n_bursts=(1, 2),
        burst_s=(0.15, 0.4), gap_s=(0.1, 0.3), shape=(1.0, 3.0)),
    _fg("slam", False, "click_train", n_clicks=(1, 2), period_s=(0.1, 0.3), jitter=0.2,
        decay_s=(0.04, 0.1), freq=(80, 400), n_partials=(3, 5)),
    _fg("squeak", False, "chirp_linear", f_start=(1800, 3500), f_end=(2500, 5000), n_harm=(1, 3),
        decay=0.4, dur_s=(0.1, 0.4), n_reps=(1, 3), gap_s=(0.05, 0.2)),
    _fg("coins", False, "click_train", n_clicks=(5, 14), period_s=(0.03, 0.09), jitter=0.7,
        decay_s=(0.005, 0.02), freq=(4000, 9000), n_partials=(2, 3)),
    _fg("chopping_food", False, "noise_burst", lo=(800, 1500), hi=(3000, 6000), n_bursts=(4, 8),
        burst_s=(0.03, 0.07), gap_s=(0.1, 0.25), shape=(2.0, 4.0)),
    # seen background
    _bg("vacuum_cleaner", True, "hum", f0=(150, 260), n_harm=(8, 14), decay=(0.75, 0.9),
        noise_floor=(0.8, 1.5), floor_lo=60.0, floor_hi=(8000.0, 20000.0)),
    _bg("blender", True, "hum", f0=(250, 400), n_harm=(5, 10), decay=(0.6, 0.85),
        noise_floor=(0.5, 1.0), floor_lo=300.0, floor_hi=(5000.0, 16000.0)),
    _bg("frying", True, "band_noise", lo=(800, 3000), hi=(10000, 20000), tilt=(-0.3, 0.8)),
    _bg("running_water", True, "am_noise", lo=(80, 300), hi=(5000, 16000), tilt=(0.2, 1.2),
        rate_hz=(2.0, 5.0), depth=(0.1, 0.25)),
    _bg("electric_shaver_toothbrush", True, "hum", f0=(90, 150), n_harm=(10, 20), decay=(0.8, 0.95),
        noise_floor=(0.1, 0.3)),
    _bg("bathtub", True, "am_noise", lo=(30, 150), hi=(2500, 10000), tilt=(1.0, 1.8),
        rate_hz=(1.5, 4.0), depth=(0.1, 0.25)),
    _bg("mechanical_fan", True, "hum", f0=(40, 70), n_harm=(3, 6), decay=(0.5, 0.7),
        noise_floor=(1.0, 2.0), floor_lo=30.0, floor_hi=6000.0),
    _bg("microwave_oven", True, "hum", f0=(55, 65), n_harm=(6, 10), decay=(0.7, 0.85),
        noise_floor=(0.3, 0.7), floor_lo=100.0, floor_hi=3000.0),
    _bg("hair_dryer", True, "band_noise", lo=(60, 200), hi=(8000, 20000), tilt=(0.0, 1.2)),
    _bg("drill", True, "hum", f0=(300, 600), n_harm=(4, 8), decay=(0.6, 0.8),
        noise_floor=(0.2, 0.5), floor_lo=500.0, floor_hi=(6000.0, 16000.0)),
    # unseen background (pink noise, white noise, noise, waterfall, vibration)
    _bg("pink_noise", False, "colored_noise", exponent=1.0),
    _bg("white_noise", False, "colored_noise", exponent=0.0),
    _bg("noise", False, "colored_noise", exponent=(1.5, 2.0)),
    _bg("waterfall", False, "am_noise", lo=(60, 150), hi=(10000, 16000), tilt=(0.3, 0.8),
        rate_hz=(1.0, 3.0), depth=(0.05, 0.15)),
    _bg("vibration", False, "hum", f0=(20, 45), n_harm=(2, 5), decay=(0.4, 0.7),
        noise_floor=(0.05, 0.2), floor_lo=20.0, floor_hi=400.0),
)

FG_PEAK = 0.5
BG_RMS = 0.1


def _from_pool(cls: SoundClass, seed: int, duration_s: float, sample_rate_hz: int) -> AudioClip:
    if not cls.pool:
        raise DataError(f"class {cls.name}: empty audio pool")
    rng = np.random.default_rng(seed)
    path = cls.pool[int(rng.integers(len(cls.pool)))]
    clip = read_wav(path)
    if clip.sample_rate_hz != sample_rate_hz:
        raise DataError(f"{path}: sample rate {clip.sample_rate_hz} != {sample_rate_hz} (no resampling)")
    return fit_to_duration(clip, duration_s)


def synth_event(cls: SoundClass, seed: int, duration_s: float = 2.0,
                sample_rate_hz: int = 44100) -> AudioClip:
    if cls.kind != "foreground":
        raise ValueError(f"{cls.name} is not a foreground class")
    if cls.generator == "pool":
        return _from_pool(cls, seed, duration_s, sample_rate_hz)
    try:
        family = FOREGROUND_FAMILIES[cls.generator]
    except KeyError:
        raise DataError(f"unknown foreground family {cls.generator!r}") from None
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * sample_rate_hz))
    event = family(rng, cls.params, sample_rate_hz)
    event = event / (np.max(np.abs(event)) + 1e-12) * FG_PEAK * rng.uniform(0.6, 1.0)
    return AudioClip(_place(rng, event, n), sample_rate_hz)


def synth_background(cls: SoundClass, seed: int, duration_s: float = 2.0,
                     sample_rate_hz: int = 44100) -> AudioClip:
    if cls.kind != "background":
        raise ValueError(f"{cls.name} is not a background class")
    if cls.generator == "pool":
        return _from_pool(cls, seed, duration_s, sample_rate_hz)
    try:
        family = BACKGROUND_FAMILIES[cls.generator]
    except KeyError:
        raise DataError(f"unknown background family {cls.generator!r}") from None
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * sample_rate_hz))
    x = family(rng, cls.params, n, sample_rate_hz)
    return AudioClip(x * (BG_RMS / (rms(x) + 1e-12)), sample_rate_hz)


def mix_at_snr(fg: AudioClip, bg: AudioClip, snr_db: float, spec: SceneSpec | None = None) -> SceneMixture:
    """Scale the background so the full-clip foreground/background RMS ratio hits ``snr_db``."""
    if fg.sample_rate_hz != bg.sample_rate_hz:
        raise DataError(f"sample rate mismatch: {fg.sample_rate_hz} vs {bg.sample_rate_hz}")
    if len(fg) != len(bg):
        raise DataError(f"length mismatch: {len(fg)} vs {len(bg)}")
    rf, rb = rms(fg), rms(bg)
    if rf == 0 or rb == 0:
        raise DataError("silent source: cannot mix at a target SNR")
    gain = rf / rb * 10.0 ** (-snr_db / 20.0)
    f, b = fg.samples, bg.samples
    mix = f + gain * b
    peak = np.max(np.abs(mix))
    if peak > 1.0:
        c = 0.999 / peak
        f, b = f * c, b * c
        mix = f + gain * b
    sr = fg.sample_rate_hz
    return SceneMixture(AudioClip(f, sr), AudioClip(b, sr), AudioClip(mix, sr), float(gain), float(snr_db), spec)


def carve_adaptation_segment(bg: AudioClip, seconds: float = 1.0, seed: int = 0) -> AudioClip:
    n = int(round(seconds * bg.sample_rate_hz))
    if n < 1 or n >= len(bg):
        raise DataError(f"background of {len(bg)} samples too short for a {n}-sample adaptation segment")
    start = int(np.random.default_rng(seed).integers(0, len(bg) - n + 1))
    return AudioClip(bg.samples[start:start + n].copy(), bg.sample_rate_hz)


# --- datasets --------------------------------------------------------------

@dataclass
class SceneRecord:
    id: str
    split: str
    fg_class: str
    bg_class: str
    snr_db: float
    bg_gain: float
    fg_path: Path
    bg_path: Path
    mix_path: Path
    adapt_path: Path | None
    seed: int
    fg_seed: int | None = None
    bg_seed: int | None = None

    def to_json(self, root: Path) -> dict:
        def rel(p):
            return None if p is None else Path(p).relative_to(root).as_posix()
        return {
            "id": self.id, "split": self.split, "fg_class": self.fg_class, "bg_class": self.bg_class,
            "snr_db": self.snr_db, "bg_gain": self.bg_gain,
            "fg_path": rel(self.fg_path), "bg_path": rel(self.bg_path), "mix_path": rel(self.mix_path),
            "adapt_path": rel(self.adapt_path), "seed": self.seed,
            "fg_seed": self.fg_seed, "bg_seed": self.bg_seed,
        }


@dataclass
class DatasetManifest:
    records: list
    path: Path | None = None

    def split(self, name: str) -> list:
        return [r for r in self.records if r.split == name]

    def counts(self) -> dict:
        out = {}
        for r in self.records:
            out[r.split] = out.get(r.split, 0) + 1
        return out

    def write(self, path) -> None:
        path = Path(path)
        root = path.parent
        with open(path, "w") as fh:
            for r in self.records:
                fh.write(json.dumps(r.to_json(root), sort_keys=True) + "\n")
        self.path = path


_REQUIRED_FIELDS = ("id", "split", "fg_class", "bg_class", "snr_db", "bg_gain",
                    "fg_path", "bg_path", "mix_path", "adapt_path", "seed")


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: manifest not found")
    root = path.parent
    records, seen_ids = [], set()
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            d = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
        missing = [k for k in _REQUIRED_FIELDS if k not in d]
        if missing:
            raise DataError(f"{path}:{lineno}: missing fields {missing}")
        if d["id"] in seen_ids:
            raise DataError(f"{path}:{lineno}: duplicate scene id {d['id']}")
        seen_ids.add(d["id"])
        for key in ("fg_path", "bg_path", "mix_path", "adapt_path"):
            if d[key] is not None and not (root / d[key]).is_file():
                raise DataError(f"{path}:{lineno}: {key} {d[key]} does not exist")
        records.append(SceneRecord(
            id=d["id"], split=d["split"], fg_class=d["fg_class"], bg_class=d["bg_class"],
            snr_db=float(d["snr_db"]), bg_gain=float(d["bg_gain"]),
            fg_path=root / d["fg_path"], bg_path=root / d["bg_path"], mix_path=root / d["mix_path"],
            adapt_path=None if d["adapt_path"] is None else root / d["adapt_path"],
            seed=int(d["seed"]), fg_seed=d.get("fg_seed"), bg_seed=d.get("bg_seed"),
        ))
    return DatasetManifest(records, path)


def load_roster(entries: Sequence[Mapping]) -> tuple:
    """Build classes from plain dicts (e.g. parsed from a config file)."""
    out = []
    for e in entries:
        params = {k: tuple(v) if isinstance(v, list) else v for k, v in dict(e.get("params", {})).items()}
        out.append(SoundClass(e["name"], e["kind"], bool(e["seen"]), e.get("generator", "pool"),
                              params, tuple(e.get("pool", ()))))
    return tuple(out)


def class_pools(roster: Sequence[SoundClass], split: str):
    want_fg, want_bg = SPLIT_POOLS[split]
    fgs = [c for c in roster if c.kind == "foreground" and c.seen == want_fg]
    bgs = [c for c in roster if c.kind == "background" and c.seen == want_bg]
    if not fgs or not bgs:
        raise DataError(f"empty class pool for split {split}: {len(fgs)} foreground, {len(bgs)} background")
    return fgs, bgs


def make_scene(split: str, index: int, roster: Sequence[SoundClass], master_seed: int,
               duration_s: float = 2.0, adapt_s: float = 1.0, sample_rate_hz: int = 44100):
    """Build one scene; everything random derives from ``(master_seed, split, index)``."""
    scene_id = f"{split}-{index:05d}"
    seed = derive_seed(master_seed, "scene", scene_id)
    rng = np.random.default_rng(seed)
    fgs, bgs = class_pools(roster, split)
    fg_cls = fgs[int(rng.integers(len(fgs)))]
    bg_cls = bgs[int(rng.integers(len(bgs)))]
    snr = float(rng.uniform(*SNR_RANGE_DB))
    fg_seed = derive_seed(seed, "fg")
    bg_seed = derive_seed(seed, "bg")
    spec = SceneSpec(fg_cls, bg_cls, snr, seed, split, duration_s)

    fg = synth_event(fg_cls, fg_seed, duration_s, sample_rate_hz)
    bg = synth_background(bg_cls, bg_seed, duration_s, sample_rate_hz)
    scene = mix_at_snr(fg, bg, snr, spec)

    adapt = None
    if adapt_s > 0:
        # separate background draw so the adaptation audio never overlaps the mixed region
        extra = synth_background(bg_cls, derive_seed(seed, "adapt-bg"), duration_s, sample_rate_hz)
        level = scene.bg_gain * (rms(scene.background) / rms(bg))
        adapt = carve_adaptation_segment(AudioClip(extra.samples * level, sample_rate_hz),
                                         adapt_s, derive_seed(seed, "adapt-crop"))
    return scene_id, scene, adapt, fg_seed, bg_seed


def generate_dataset(counts: Mapping[str, int], roster: Sequence[SoundClass] = DEFAULT_ROSTER,
                     master_seed: int = 0, out_dir=".", duration_s: float = 2.0, adapt_s: float = 1.0,
                     sample_rate_hz: int = 44100) -> DatasetManifest:
    out_dir = Path(out_dir)
    for split, n in counts.items():
        if split not in SPLITS:
            raise DataError(f"unknown split {split!r}")
        if n:
            class_pools(roster, split)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"{out_dir}: cannot create ({exc.strerror})") from exc

    records = []
    for split in SPLITS:
        n = int(counts.get(split, 0))
        if not n:
            continue
        split_dir = out_dir / split
        split_dir.mkdir(exist_ok=True)
        for i in range(n):
            scene_id, scene, adapt, fg_seed, bg_seed = make_scene(
                split, i, roster, master_seed, duration_s, adapt_s, sample_rate_hz)
            paths = {k: split_dir / f"{scene_id}_{k}.wav" for k in ("fg", "bg", "mix", "adapt")}
            write_wav(paths["fg"], scene.foreground)
            write_wav(paths["bg"], scene.background)
            write_wav(paths["mix"], scene.mixture)
            if adapt is not None:
                write_wav(paths["adapt"], adapt)
            records.append(SceneRecord(
                scene_id, split, scene.spec.fg_class.name, scene.spec.bg_class.name, scene.snr_db,
                scene.bg_gain, paths["fg"], paths["bg"], paths["mix"],
                paths["adapt"] if adapt is not None else None, scene.spec.seed, fg_seed, bg_seed))
        log.info("generated %d %s scenes", n, split)

    manifest = DatasetManifest(records)
    manifest.write(out_dir / "manifest.jsonl")
    return manifest


def spectral_flux(clip: AudioClip, block_frames: int = 8, cfg=None) -> float:
    """Energy-weighted spectral flux between ~90 ms blocks of Mel power.

    Returns a value in [0, 1]; transient events score high, stationary
    textures low because block averaging suppresses noise fluctuations.
    """
    from .frontend import FrontendConfig, mel_filterbank, stft, to_mel

    cfg = cfg or FrontendConfig(sample_rate_hz=clip.sample_rate_hz)
    power = to_mel(np.abs(stft(clip, cfg).values), mel_filterbank(cfg)) ** 2
    nb = power.shape[0] // block_frames
    blocks = power[:nb * block_frames].reshape(nb, block_frames, -1).mean(axis=1)
    denom = (blocks[1:] + blocks[:-1]).sum()
    return float(np.abs(np.diff(blocks, axis=0)).sum() / denom) if denom > 0 else 0.0
