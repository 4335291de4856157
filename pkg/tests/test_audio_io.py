import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ambisep.audio_io import AudioClip, fit_to_duration, read_wav, rms, write_wav
from ambisep.errors import DataError, WavFormatError


def _raw_wav(path, payload, tag=1, channels=1, bits=16, rate=44100):
    block = channels * bits // 8
    fmt = struct.pack("<IHHIIHH", 16, tag, channels, rate, rate * block, block, bits)
    data = b"RIFF" + struct.pack("<I", 36 + len(payload)) + b"WAVE" + b"fmt " + fmt
    data += b"data" + struct.pack("<I", len(payload)) + payload
    path.write_bytes(data)
    return path


def test_pcm16_scaling(tmp_path):
    p = _raw_wav(tmp_path / "a.wav", np.array([0, 16384, -16384], "<i2").tobytes())
    clip = read_wav(p)
    assert clip.samples.tolist() == [0.0, 0.5, -0.5]
    assert clip.sample_rate_hz == 44100


def test_empty_data_chunk(tmp_path):
    p = _raw_wav(tmp_path / "e.wav", b"")
    with pytest.raises(WavFormatError, match="empty clip"):
        read_wav(p)


def test_float32_identity(tmp_path):
    p = _raw_wav(tmp_path / "f.wav", np.array([0.25], "<f4").tobytes(), tag=3, bits=32)
    clip = read_wav(p)
    assert clip.samples.tolist() == [0.25]
    assert clip.sample_rate_hz == 44100


def test_rejects_multichannel_and_other_encodings(tmp_path):
    stereo = _raw_wav(tmp_path / "s.wav", np.zeros(4, "<i2").tobytes(), channels=2)
    with pytest.raises(WavFormatError, match="multichannel"):
        read_wav(stereo)
    pcm24 = _raw_wav(tmp_path / "p.wav", b"\0" * 6, bits=24)
    with pytest.raises(WavFormatError, match="unsupported encoding"):
        read_wav(pcm24)
    junk = tmp_path / "j.wav"
    junk.write_bytes(b"RIFX....WAVE")
    with pytest.raises(WavFormatError, match="malformed header"):
        read_wav(junk)


def test_truncated_chunk_reports_offset(tmp_path):
    p = _raw_wav(tmp_path / "t.wav", np.zeros(100, "<i2").tobytes())
    p.write_bytes(p.read_bytes()[:-20])
    with pytest.raises(WavFormatError, match="offset 36"):
        read_wav(p)


def test_float32_roundtrip_is_exact(tmp_path):
    x = np.random.default_rng(0).uniform(-1, 1, 1000).astype(np.float32).astype(np.float64)
    write_wav(tmp_path / "r.wav", AudioClip(x, 16000), "float32")
    back = read_wav(tmp_path / "r.wav")
    assert np.array_equal(back.samples, x)
    assert back.sample_rate_hz == 16000


def test_pcm16_values_and_clamp(tmp_path, caplog):
    write_wav(tmp_path / "h.wav", AudioClip([0.5, 1.5, -2.0], 8000), "pcm16")
    raw = np.frombuffer((tmp_path / "h.wav").read_bytes()[44:], "<i2")
    assert raw.tolist() == [16384, 32767, -32768]
    assert "2 samples outside" in caplog.text
    back = read_wav(tmp_path / "h.wav").samples
    assert back[0] == 0.5
    assert back[1] == pytest.approx(1.0, abs=1 / 32768)


def test_pcm16_roundtrip_all_codes(tmp_path):
    codes = np.arange(-32768, 32768)
    clip = AudioClip(codes / 32768.0, 8000)
    write_wav(tmp_path / "all.wav", clip, "pcm16")
    back = read_wav(tmp_path / "all.wav")
    assert np.max(np.abs(back.samples - clip.samples)) <= 1 / 32768
    assert np.array_equal(back.samples, clip.samples)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=1, max_size=200))
def test_pcm16_roundtrip_error_bound(tmp_path_factory, values):
    path = tmp_path_factory.mktemp("wav") / "x.wav"
    write_wav(path, AudioClip(values, 8000), "pcm16")
    assert np.max(np.abs(read_wav(path).samples - np.array(values))) <= 1 / 32768


def test_unwritable_path(tmp_path):
    with pytest.raises(DataError):
        write_wav(tmp_path / "missing" / "x.wav", AudioClip([0.0], 8000))


def test_clip_invariants():
    with pytest.raises(DataError):
        AudioClip([], 8000)
    with pytest.raises(DataError):
        AudioClip([0.0, np.nan], 8000)
    with pytest.raises(DataError):
        AudioClip(np.zeros((2, 3)), 8000)


def test_fit_to_duration():
    sr = 100
    one = AudioClip(np.arange(100) / 100.0, sr)
    two = fit_to_duration(one, 2.0)
    assert np.array_equal(two.samples, np.concatenate([one.samples, one.samples]))
    assert fit_to_duration(two, 2.0) is two
    three = AudioClip(np.arange(300) / 300.0, sr)
    assert np.array_equal(fit_to_duration(three, 2.0).samples, three.samples[:200])
    odd = fit_to_duration(AudioClip(np.arange(30.0), sr), 1.0)
    assert len(odd) == 100 and odd.samples[30] == 0.0 and odd.samples[99] == 9.0


@given(st.integers(1, 500), st.floats(0.01, 5.0))
def test_fit_to_duration_length_and_idempotence(n, seconds):
    clip = AudioClip(np.linspace(-1, 1, n), 100)
    out = fit_to_duration(clip, seconds)
    assert len(out) == round(seconds * 100)
    assert np.array_equal(fit_to_duration(out, len(out) / 100).samples, out.samples)


def test_rms():
    assert rms(AudioClip(np.full(10, 0.5), 8)) == 0.5
    assert rms(AudioClip(np.zeros(10), 8)) == 0.0
    t = np.arange(8000) / 8000
    assert abs(rms(AudioClip(np.sin(2 * np.pi * 50 * t), 8000)) - 1 / np.sqrt(2)) < 1e-9
