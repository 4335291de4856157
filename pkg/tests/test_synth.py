import hashlib
import json
from collections import defaultdict

import numpy as np
import pytest

from ambisep.audio_io import AudioClip, read_wav, rms, write_wav
from ambisep.errors import DataError
from ambisep.synth import (DEFAULT_ROSTER, SPLIT_POOLS, SceneSpec, SoundClass, carve_adaptation_segment,
                           class_pools, generate_dataset, load_manifest, load_roster, make_scene,
                           mix_at_snr, spectral_flux, synth_background, synth_event)

FG = [c for c in DEFAULT_ROSTER if c.kind == "foreground"]
BG = [c for c in DEFAULT_ROSTER if c.kind == "background"]
SR = 44100


def test_roster_pool_sizes():
    assert sum(c.seen for c in FG) == 5 and sum(not c.seen for c in FG) == 5
    assert sum(c.seen for c in BG) == 10 and sum(not c.seen for c in BG) == 5
    assert len({c.name for c in DEFAULT_ROSTER}) == 25


@pytest.mark.parametrize("cls", DEFAULT_ROSTER, ids=lambda c: c.name)
def test_determinism(cls):
    make = synth_event if cls.kind == "foreground" else synth_background
    a, b = make(cls, 1234), make(cls, 1234)
    assert np.array_equal(a.samples, b.samples)
    assert len(a) == 2 * SR
    assert not np.array_equal(a.samples, make(cls, 1235).samples)


def test_kind_checks_and_unknown_family():
    with pytest.raises(ValueError):
        synth_event(BG[0], 0)
    with pytest.raises(ValueError):
        synth_background(FG[0], 0)
    with pytest.raises(DataError, match="unknown"):
        synth_event(SoundClass("x", "foreground", True, "theremin"), 0)
    with pytest.raises(DataError, match="unknown"):
        synth_background(SoundClass("x", "background", True, "ocean"), 0)


def test_click_train_clusters():
    cls = SoundClass("clk", "foreground", True, "click_train",
                     dict(n_clicks=4, period_s=0.1, decay_s=0.002, freq=3000.0, n_partials=1))
    x = synth_event(cls, 7).samples
    nz = np.flatnonzero(x)
    breaks = np.flatnonzero(np.diff(nz) > 1)
    starts = np.concatenate([[nz[0]], nz[breaks + 1]])
    ends = np.concatenate([nz[breaks], [nz[-1]]])
    assert len(starts) == 4
    assert np.all(np.abs(np.diff(starts) - 0.1 * SR) <= 1)
    assert np.all(ends - starts < 6 * 0.002 * SR + 2)


def test_hum_is_a_line_spectrum():
    cls = SoundClass("hum", "background", True, "hum", dict(f0=100.0, n_harm=5, decay=0.8, noise_floor=0.0))
    x = synth_background(cls, 3).samples
    power = np.abs(np.fft.rfft(x)) ** 2
    freqs = np.fft.rfftfreq(x.size, 1 / SR)
    top = freqs[np.argsort(power)[-5:]]
    assert sorted(np.round(top)) == [100.0, 200.0, 300.0, 400.0, 500.0]
    assert power[np.isin(np.round(freqs), [100, 200, 300, 400, 500])].sum() / power.sum() > 0.999


def test_white_noise_flat_in_octave_bands():
    white = next(c for c in BG if c.name == "white_noise")
    acc = 0
    for seed in range(50):
        acc = acc + np.abs(np.fft.rfft(synth_background(white, seed).samples)) ** 2
    freqs = np.fft.rfftfreq(2 * SR, 1 / SR)
    edges = [100, 200, 400, 800, 1600, 3200, 6400, 10000]
    levels = [10 * np.log10(acc[(freqs >= lo) & (freqs < hi)].mean()) for lo, hi in zip(edges, edges[1:])]
    assert max(levels) - np.mean(levels) <= 2.0
    assert np.mean(levels) - min(levels) <= 2.0


@pytest.mark.parametrize("cls", BG, ids=lambda c: c.name)
def test_background_stationarity(cls):
    for seed in range(10):
        x = synth_background(cls, seed).samples
        r = [np.sqrt(np.mean(x[i * SR:(i + 1) * SR] ** 2)) for i in range(2)]
        assert abs(20 * np.log10(r[0] / r[1])) < 3.0


def test_foreground_flux_exceeds_background_flux():
    # 100 seeded draws per family, cycling over the classes that use it
    by_family = defaultdict(list)
    for c in DEFAULT_ROSTER:
        by_family[(c.kind, c.generator)].append(c)
    mean_flux = {}
    for (kind, family), classes in by_family.items():
        make = synth_event if kind == "foreground" else synth_background
        vals = [spectral_flux(make(classes[i % len(classes)], 10_000 + i)) for i in range(100)]
        mean_flux[(kind, family)] = np.mean(vals)
    fg = [v for (k, _), v in mean_flux.items() if k == "foreground"]
    bg = [v for (k, _), v in mean_flux.items() if k == "background"]
    assert len(fg) == 6 and len(bg) == 4
    assert min(fg) > max(bg), mean_flux


def _clip(x):
    return AudioClip(np.asarray(x, dtype=np.float64), 100)


def test_mix_at_snr_gain():
    rng = np.random.default_rng(0)
    a = rng.standard_normal(1000) * 0.1
    b = rng.standard_normal(1000)
    b *= rms(a) / rms(b)
    assert mix_at_snr(_clip(a), _clip(b), 0.0).bg_gain == pytest.approx(1.0, rel=1e-12)
    scene = mix_at_snr(_clip(a), _clip(b), 6.02)
    assert scene.bg_gain == pytest.approx(10 ** (-6.02 / 20), rel=1e-12)
    assert scene.bg_gain == pytest.approx(0.5, abs=1e-3)
    assert abs(scene.achieved_snr_db() - 6.02) < 0.01
    assert np.array_equal(scene.mixture.samples, scene.foreground.samples + scene.bg_gain * scene.background.samples)


def test_mix_rescales_on_clipping():
    rng = np.random.default_rng(1)
    a, b = rng.standard_normal(500), rng.standard_normal(500)
    scene = mix_at_snr(_clip(a), _clip(b), -3.0)
    assert np.max(np.abs(scene.mixture.samples)) == pytest.approx(0.999, rel=1e-12)
    assert abs(scene.achieved_snr_db() + 3.0) < 1e-9
    assert np.array_equal(scene.mixture.samples, scene.foreground.samples + scene.bg_gain * scene.background.samples)


def test_mix_errors():
    with pytest.raises(DataError, match="silent"):
        mix_at_snr(_clip(np.zeros(10)), _clip(np.ones(10)), 0.0)
    with pytest.raises(DataError, match="length"):
        mix_at_snr(_clip(np.ones(10)), _clip(np.ones(11)), 0.0)
    with pytest.raises(DataError, match="rate"):
        mix_at_snr(_clip(np.ones(10)), AudioClip(np.ones(10), 200), 0.0)


def test_scene_spec_split_consistency():
    seen_fg = next(c for c in FG if c.seen)
    unseen_bg = next(c for c in BG if not c.seen)
    SceneSpec(seen_fg, unseen_bg, 0.0, 1, "C2")
    with pytest.raises(ValueError):
        SceneSpec(seen_fg, unseen_bg, 0.0, 1, "C1")
    with pytest.raises(ValueError):
        SceneSpec(seen_fg, unseen_bg, 3.5, 1, "C2")


def test_adaptation_segment():
    bg = synth_background(BG[0], 5)
    seg = carve_adaptation_segment(bg, 1.0, seed=9)
    assert len(seg) == SR
    assert np.array_equal(seg.samples, carve_adaptation_segment(bg, 1.0, seed=9).samples)
    assert abs(20 * np.log10(rms(seg) / rms(bg))) < 3.0
    with pytest.raises(DataError, match="too short"):
        carve_adaptation_segment(bg, 2.0, seed=1)


@pytest.mark.parametrize("cls", BG, ids=lambda c: c.name)
def test_adaptation_crop_level(cls):
    bg = synth_background(cls, 77)
    for seed in range(5):
        assert abs(20 * np.log10(rms(carve_adaptation_segment(bg, 1.0, seed)) / rms(bg))) < 3.0


def test_make_scene_additivity_and_snr():
    for i in range(20):
        _, scene, adapt, _, _ = make_scene("train", i, DEFAULT_ROSTER, master_seed=3)
        m = scene.mixture.samples - (scene.foreground.samples + scene.bg_gain * scene.background.samples)
        assert not np.any(m)
        assert abs(scene.achieved_snr_db() - scene.snr_db) < 0.01
        assert -3 <= scene.snr_db <= 3
        assert len(adapt) == SR


def test_class_pools_follow_split_table():
    for split, (want_fg, want_bg) in SPLIT_POOLS.items():
        fgs, bgs = class_pools(DEFAULT_ROSTER, split)
        assert {c.seen for c in fgs} == {want_fg}
        assert {c.seen for c in bgs} == {want_bg}
    with pytest.raises(DataError, match="empty class pool"):
        class_pools([c for c in DEFAULT_ROSTER if c.seen], "C4")


COUNTS = {"train": 6, "val": 2, "C1": 2, "C2": 3, "C3": 2, "C4": 2}


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("ds")
    return generate_dataset(COUNTS, DEFAULT_ROSTER, master_seed=11, out_dir=out), out


def test_generate_dataset_counts_and_files(dataset):
    manifest, out = dataset
    assert len(manifest.records) == sum(COUNTS.values())
    assert manifest.counts() == COUNTS
    lines = (out / "manifest.jsonl").read_text().splitlines()
    assert len(lines) == 17
    rec = json.loads(lines[0])
    for key in ("id", "split", "fg_class", "bg_class", "snr_db", "bg_gain", "fg_path", "bg_path",
                "mix_path", "adapt_path", "seed"):
        assert key in rec
    loaded = load_manifest(out / "manifest.jsonl")
    assert len({r.id for r in loaded.records}) == 17
    for r in loaded.records:
        for p in (r.fg_path, r.bg_path, r.mix_path, r.adapt_path):
            assert p.is_file()


def test_generated_files_respect_snr(dataset):
    manifest, _ = dataset
    for r in manifest.records:
        fg, bg = read_wav(r.fg_path), read_wav(r.bg_path)
        achieved = 20 * np.log10(rms(fg) / rms(bg.samples * r.bg_gain))
        assert abs(achieved - r.snr_db) < 0.01


def test_c2_uses_seen_fg_and_unseen_bg(dataset):
    manifest, _ = dataset
    seen = {c.name: c.seen for c in DEFAULT_ROSTER}
    for r in manifest.split("C2"):
        assert seen[r.fg_class] and not seen[r.bg_class]
    for r in manifest.split("C4"):
        assert not seen[r.fg_class] and not seen[r.bg_class]


def test_split_hygiene(dataset):
    manifest, _ = dataset
    pairs = defaultdict(set)
    for r in manifest.records:
        pairs[r.split].add((r.fg_class, r.fg_seed))
        pairs[r.split].add((r.bg_class, r.bg_seed))
    splits = list(pairs)
    for i, a in enumerate(splits):
        for b in splits[i + 1:]:
            assert not pairs[a] & pairs[b]


def _digest(out):
    h = hashlib.sha256()
    for p in sorted(out.rglob("*")):
        if p.is_file():
            h.update(p.relative_to(out).as_posix().encode())
            h.update(p.read_bytes())
    return h.hexdigest()


def test_regeneration_is_identical(dataset, tmp_path):
    _, out = dataset
    generate_dataset(COUNTS, DEFAULT_ROSTER, master_seed=11, out_dir=tmp_path)
    assert _digest(tmp_path) == _digest(out)


def test_generate_dataset_errors(tmp_path):
    with pytest.raises(DataError, match="empty class pool"):
        generate_dataset({"C3": 1}, [c for c in DEFAULT_ROSTER if c.seen], 0, tmp_path)
    with pytest.raises(DataError, match="unknown split"):
        generate_dataset({"test": 1}, DEFAULT_ROSTER, 0, tmp_path)
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(DataError):
        generate_dataset({"C1": 1}, DEFAULT_ROSTER, 0, blocker / "sub")


def test_external_pool_classes(tmp_path):
    rng = np.random.default_rng(0)
    paths = {}
    for name in ("bark", "hum"):
        p = tmp_path / f"{name}.wav"
        write_wav(p, AudioClip(rng.uniform(-0.5, 0.5, 8000), 8000))
        paths[name] = str(p)
    roster = load_roster([
        {"name": "bark", "kind": "foreground", "seen": True, "pool": [paths["bark"]]},
        {"name": "hum", "kind": "background", "seen": True, "generator": "pool", "pool": [paths["hum"]]},
    ])
    manifest = generate_dataset({"C1": 2}, roster, 1, tmp_path / "ds", duration_s=2.0, adapt_s=0.5,
                                sample_rate_hz=8000)
    fg = read_wav(manifest.records[0].fg_path)
    assert len(fg) == 16000
    raw = read_wav(paths["bark"]).samples
    scale = fg.samples[0] / raw[0]
    assert np.allclose(fg.samples, scale * np.tile(raw, 2), atol=1e-6)
    with pytest.raises(DataError, match="no resampling"):
        generate_dataset({"C1": 1}, roster, 1, tmp_path / "ds2", sample_rate_hz=16000)


def test_manifest_validation(dataset, tmp_path):
    _, out = dataset
    lines = (out / "manifest.jsonl").read_text().splitlines()
    rec = json.loads(lines[0])
    for key in ("fg_path", "bg_path", "mix_path", "adapt_path"):
        rec[key] = str(out / rec[key])
    bad = tmp_path / "manifest.jsonl"
    bad.write_text(2 * (json.dumps(rec) + "\n"))
    with pytest.raises(DataError, match="duplicate"):
        load_manifest(bad)
    rec.pop("snr_db")
    bad.write_text(json.dumps(rec) + "\n")
    with pytest.raises(DataError, match="missing fields"):
        load_manifest(bad)
    bad.write_text("{not json\n")
    with pytest.raises(DataError, match="invalid JSON"):
        load_manifest(bad)
    bad.write_text(lines[0] + "\n")  # paths are relative to the manifest, which moved
    with pytest.raises(DataError, match="does not exist"):
        load_manifest(bad)
    with pytest.raises(DataError, match="not found"):
        load_manifest(tmp_path / "none.jsonl")
