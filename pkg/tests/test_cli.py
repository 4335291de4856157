import csv
import hashlib
import json
import statistics

import numpy as np
import pytest
import yaml

from ambisep.cli import main
from ambisep.config import config_from_dict, load_config
from ambisep.errors import DataError
from ambisep.report import quartiles, read_scene_csv, summarize, write_scene_csv

SPLITS = ("C1", "C2", "C3", "C4")
TINY = {
    "seed": 77,
    "dataset": {"counts": {"train": 4, "val": 2, "C1": 2, "C2": 2, "C3": 2, "C4": 2}},
    "train": {"epochs": 2, "batch_size": 2},
    "variants": ["M1", "M1+"],
    "eval": {"filter_len": 64},
}


def _write_config(path, **changes):
    raw = {**TINY, **changes}
    path.write_text(yaml.safe_dump(raw))
    return path


def _digest(paths):
    h = hashlib.sha256()
    for p in sorted(paths):
        h.update(p.read_bytes())
    return h.hexdigest()


@pytest.fixture(scope="module")
def run(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    out = root / "nested" / "out"
    cfg = _write_config(root / "exp.yaml", out=str(out))
    base = ["--config", str(cfg)]
    assert main(["synth", *base]) == 0
    for v in ("M1", "M1+"):
        assert main(["train", *base, "--variant", v]) == 0
    for split in SPLITS:
        assert main(["separate", *base, "--oracle", "--split", split]) == 0
        assert main(["evaluate", *base, "--variant", "IRM", "--split", split]) == 0
        for v in ("M1", "M1+"):
            assert main(["separate", *base, "--checkpoint", str(out / "models" / f"{v}.ckpt"), "--split", split]) == 0
            assert main(["evaluate", *base, "--variant", v, "--split", split]) == 0
    assert main(["report", *base]) == 0
    return root, out, cfg


def test_synth_counts_and_created_dirs(run, capsys):
    _, out, _ = run
    lines = (out / "data" / "manifest.jsonl").read_text().splitlines()
    splits = [json.loads(l)["split"] for l in lines]
    assert {s: splits.count(s) for s in set(splits)} == TINY["dataset"]["counts"]


def test_synth_rerun_is_identical(run, tmp_path):
    _, out, _ = run
    cfg = _write_config(tmp_path / "again.yaml", out=str(tmp_path / "again"))
    assert main(["synth", "--config", str(cfg)]) == 0
    a = list((out / "data").rglob("*.*"))
    b = list((tmp_path / "again" / "data").rglob("*.*"))
    assert len(a) == len(b) and _digest(a) == _digest(b)


def test_train_outputs(run):
    from ambisep.neural.checkpoint import load_checkpoint
    _, out, _ = run
    assert load_checkpoint(out / "models" / "M1.ckpt").aux is None
    assert load_checkpoint(out / "models" / "M1+.ckpt").aux is not None
    rows = list(csv.DictReader(open(out / "models" / "M1_loss.csv")))
    assert [int(r["epoch"]) for r in rows] == [1, 2]
    assert set(rows[0]) == {"epoch", "train_loss", "val_loss"}


def test_resume_reproduces_curve(run, tmp_path):
    _, out, cfg = run
    import shutil
    shutil.copytree(out / "data", tmp_path / "data")
    short = _write_config(tmp_path / "short.yaml", out=str(tmp_path), train={"epochs": 1, "batch_size": 2})
    assert main(["train", "--config", str(short), "--variant", "M1"]) == 0
    # extend the same run to two epochs: the saved state carries the one-epoch config, so rewrite it
    from dataclasses import asdict
    from ambisep.neural.checkpoint import load_checkpoint, save_checkpoint
    state = load_checkpoint(tmp_path / "models" / "M1.state")
    full_cfg = load_config(_write_config(tmp_path / "full.yaml", out=str(tmp_path)))
    meta = {**state.meta, "train": asdict(full_cfg.train_config("M1"))}
    save_checkpoint(tmp_path / "models" / "M1.state", state.params, None, "M1", state.profile, meta, state.extra)
    assert main(["train", "--config", str(tmp_path / "full.yaml"), "--variant", "M1", "--resume"]) == 0
    assert (tmp_path / "models" / "M1_loss.csv").read_text() == (out / "models" / "M1_loss.csv").read_text()
    assert (tmp_path / "models" / "M1.ckpt").read_bytes() == (out / "models" / "M1.ckpt").read_bytes()


def test_separate_names_and_coverage(run):
    _, out, _ = run
    for tag in ("IRM", "M1", "M1+"):
        for split in SPLITS:
            names = sorted(p.name for p in (out / "estimates" / tag / split).iterdir())
            assert names == sorted(f"{split}-{i:05d}_{b}.wav" for i in range(2) for b in ("fg", "bg"))


def test_separate_aux_variant_needs_adaptation(run, tmp_path):
    _, out, cfg = run
    lines = [json.loads(l) for l in (out / "data" / "manifest.jsonl").read_text().splitlines()]
    for rec in lines:
        rec["adapt_path"] = None
        for k in ("fg_path", "bg_path", "mix_path"):
            rec[k] = str(out / "data" / rec[k])
    manifest = tmp_path / "manifest.jsonl"
    manifest.write_text("".join(json.dumps(r) + "\n" for r in lines))
    code = main(["separate", "--config", str(cfg), "--checkpoint", str(out / "models" / "M1+.ckpt"),
                 "--split", "C1", "--manifest", str(manifest), "--estimates", str(tmp_path / "est")])
    assert code == 2
    code = main(["separate", "--config", str(cfg), "--checkpoint", str(out / "models" / "M1.ckpt"),
                 "--split", "C1", "--manifest", str(manifest), "--estimates", str(tmp_path / "est")])
    assert code == 0


def test_evaluate_rows_and_determinism(run, tmp_path):
    _, out, cfg = run
    rows = read_scene_csv(out / "metrics" / "M1_C2.csv")
    assert [r["scene_id"] for r in rows] == ["C2-00000", "C2-00001"]
    assert all(r["status"] == "ok" and r["filter_len"] == "64" for r in rows)
    again = tmp_path / "again.csv"
    assert main(["evaluate", "--config", str(cfg), "--variant", "M1", "--split", "C2", "--csv", str(again)]) == 0
    assert again.read_bytes() == (out / "metrics" / "M1_C2.csv").read_bytes()


def test_evaluate_flags_missing_estimate(run, tmp_path):
    import shutil
    _, out, cfg = run
    est = tmp_path / "est"
    shutil.copytree(out / "estimates" / "M1" / "C3", est)
    (est / "C3-00001_fg.wav").unlink()
    csv_path = tmp_path / "m.csv"
    assert main(["evaluate", "--config", str(cfg), "--variant", "M1", "--split", "C3",
                 "--estimates", str(est), "--csv", str(csv_path)]) == 0
    rows = read_scene_csv(csv_path)
    assert [r["status"] for r in rows] == ["ok", "missing_estimate"]
    assert rows[1]["sdr_i"] is None


def test_report_grid_and_independent_medians(run):
    _, out, _ = run
    rows = list(csv.DictReader(open(out / "report.csv")))
    assert {(r["variant"], r["subset"]) for r in rows} == {(v, s) for v in ("M1", "M1+", "IRM") for s in SPLITS}
    for r in rows:
        scenes = list(csv.DictReader(open(out / "metrics" / f"{r['variant']}_{r['subset']}.csv")))
        assert int(r["n"]) == len(scenes)
        for m in ("sdr_i", "sir_i", "sar"):
            values = [float(s[m]) for s in scenes]
            assert float(r[f"{m}_median"]) == pytest.approx(statistics.median(values), abs=1e-12)
            assert float(r[f"{m}_q1"]) <= float(r[f"{m}_median"]) <= float(r[f"{m}_q3"])
    assert "IRM" in (out / "report.txt").read_text()


def _row(variant, split, sdr_i, status="ok"):
    return {"scene_id": f"{split}-x", "split": split, "variant": variant, "sdr": 1.0, "sir": 2.0, "sar": 3.0,
            "sdr_i": sdr_i, "sir_i": 0.5, "filter_len": 512, "status": status}


def test_report_five_by_four_grid():
    rows = [_row(v, s, float(i + j)) for i, v in enumerate(("M1", "M1+", "M2", "M2+", "IRM"))
            for j, s in enumerate(SPLITS)]
    summary = summarize(rows)
    assert len(summary.cells) == 20
    assert summary.median("M2+", "C3") == 3.0 + 2.0
    text = summary.to_text().splitlines()
    assert [l.split()[0] for l in text[2:7]] == ["M1", "M1+", "M2", "M2+", "IRM"]


def test_report_single_scene_and_empty_subset(caplog):
    summary = summarize([_row("M1", "C1", 4.25), _row("M1", "C2", 1.0, status="missing_estimate")])
    assert summary.median("M1", "C1") == 4.25
    assert summary.cell("M1", "C1").stats["sdr_i"] == (4.25, 4.25, 4.25)
    assert summary.cell("M1", "C2") is None
    assert "omitted" in caplog.text


def test_quartiles_linear_convention():
    assert quartiles([1, 2, 3, 4]) == (1.75, 2.5, 3.25)


def test_scene_csv_round_trip(tmp_path):
    rows = [_row("M2", "C4", -1.5), {**_row("M2", "C4", None, "undefined"), "sdr": None}]
    write_scene_csv(tmp_path / "a.csv", rows)
    back = read_scene_csv(tmp_path / "a.csv")
    assert back[0]["sdr_i"] == -1.5 and back[1]["sdr"] is None


def test_exit_codes(tmp_path, capsys):
    assert main(["synth"]) == 1
    with pytest.raises(SystemExit) as exc:
        main(["train", "--seed", "1", "--variant", "M9"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["synth", "--seed", "-4"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 1
    assert main(["evaluate", "--seed", "1", "--out", str(tmp_path), "--variant", "M1", "--split", "C1",
                 "--filter-len", "0"]) == 1
    assert main(["separate", "--seed", "1", "--out", str(tmp_path), "--oracle", "--split", "C1"]) == 2
    assert main(["report", "--seed", "1", "--out", str(tmp_path)]) == 2
    (tmp_path / "bad.yaml").write_text("seed: 1\nbogus: 2\n")
    assert main(["synth", "--config", str(tmp_path / "bad.yaml")]) == 2
    assert main(["synth", "--config", str(tmp_path / "missing.yaml")]) == 2


def test_numeric_failure_exit_code(run, tmp_path):
    from ambisep.neural.checkpoint import load_checkpoint, save_checkpoint
    _, out, cfg = run
    ck = load_checkpoint(out / "models" / "M1.ckpt")
    params = {k: v.copy() for k, v in ck.params.items()}
    params["out.b"][:] = np.nan
    save_checkpoint(tmp_path / "nan.ckpt", params, None, "M1", ck.profile)
    assert main(["separate", "--config", str(cfg), "--checkpoint", str(tmp_path / "nan.ckpt"), "--split", "C1",
                 "--estimates", str(tmp_path / "est")]) == 3


def test_config_loading(tmp_path):
    path = _write_config(tmp_path / "c.yaml", out=str(tmp_path / "o"))
    cfg = load_config(path)
    assert cfg.seed == 77 and cfg.filter_len == 64 and cfg.variants == ["M1", "M1+"]
    assert cfg.train.lr == 1e-3 and cfg.train.epochs == 2
    assert load_config(path, seed=5).seed == 5
    raw = dict(TINY)
    raw.pop("seed")
    with pytest.raises(DataError, match="seed"):
        config_from_dict(raw)
    with pytest.raises(DataError, match="unknown keys"):
        config_from_dict({"seed": 1, "train": {"epochz": 3}})
    with pytest.raises(DataError, match="not found"):
        config_from_dict({"seed": 1, "dataset": {"roster": [
            {"name": "x", "kind": "foreground", "seen": True, "pool": [str(tmp_path / "nope.wav")]}]}})
    assert config_from_dict({"seed": 1}).train_config("M2").seed != config_from_dict({"seed": 2}).train_config("M2").seed
