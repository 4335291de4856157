"""Orchestration of the synth -> train -> separate -> evaluate -> report pipeline.

Output layout under ``config.out``::

    data/manifest.jsonl, data/<split>/<id>_{fg,bg,mix,adapt}.wav
    models/<variant>.ckpt, models/<variant>_loss.csv, models/<variant>.state
    estimates/<variant|IRM>/<split>/<id>_{fg,bg}.wav
    metrics/<variant|IRM>_<split>.csv
    report.csv, report.txt
"""
from __future__ import annotations

import csv
import logging
from pathlib import Path

from .audio_io import read_wav, write_wav
from .bsseval import DecompositionConfig, Projector, metrics
from .config import ExperimentConfig
from .errors import DataError, UndefinedMetricError
from .frontend import dump_matrix
from .neural.checkpoint import load_checkpoint
from .neural.train import train
from .report import read_scene_csv, summarize, write_scene_csv
from .separation import ModelMasker, OracleMasker, separate
from .synth import EVAL_SPLITS, generate_dataset, load_manifest

log = logging.getLogger(__name__)

ORACLE = "IRM"


def run_synth(cfg: ExperimentConfig):
    manifest = generate_dataset(cfg.dataset.counts, cfg.dataset.classes(), cfg.seed,
                                cfg.manifest_path.parent, cfg.dataset.duration_s, cfg.dataset.adapt_s,
                                cfg.frontend.sample_rate_hz)
    return manifest


def write_loss_csv(path, curve) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "train_loss", "val_loss"])
        for epoch, tr, va in curve:
            w.writerow([epoch, repr(float(tr)), repr(float(va))])


def run_train(cfg: ExperimentConfig, variant: str, manifest_path=None, resume: bool = False):
    manifest = load_manifest(manifest_path or cfg.manifest_path)
    ckpt = cfg.checkpoint_path(variant)
    ckpt.parent.mkdir(parents=True, exist_ok=True)
    result = train(manifest, cfg.train_config(variant), cfg.frontend, checkpoint_path=ckpt,
                   state_path=ckpt.with_suffix(".state"), resume=resume)
    write_loss_csv(ckpt.parent / f"{variant}_loss.csv", result.curve)
    return result


def run_separate(cfg: ExperimentConfig, split: str, checkpoint=None, oracle: bool = False,
                 manifest_path=None, out_dir=None, dump_masks: bool = False) -> Path:
    if oracle == (checkpoint is not None):
        raise ValueError("give exactly one of a checkpoint or oracle=True")
    manifest = load_manifest(manifest_path or cfg.manifest_path)
    records = sorted(manifest.split(split), key=lambda r: r.id)
    if not records:
        raise DataError(f"manifest has no scenes in split {split}")
    ck = None
    tag = ORACLE
    if not oracle:
        ck = load_checkpoint(checkpoint)
        tag = ck.variant
        if ck.aux is not None and any(r.adapt_path is None for r in records):
            raise DataError(f"variant {ck.variant} needs adaptation segments but the manifest lacks them")
    out = Path(out_dir) if out_dir is not None else cfg.estimates_dir(tag) / split
    out.mkdir(parents=True, exist_ok=True)

    for r in records:
        mix = read_wav(r.mix_path)
        if oracle:
            masker = OracleMasker(read_wav(r.fg_path), read_wav(r.bg_path))
        else:
            masker = ModelMasker(ck, read_wav(r.adapt_path) if ck.aux is not None else None)
        res = separate(mix, masker, cfg.frontend)
        write_wav(out / f"{r.id}_fg.wav", res.fg_estimate)
        write_wav(out / f"{r.id}_bg.wav", res.bg_estimate)
        if dump_masks:
            dump_matrix(out / f"{r.id}_mask_mel.bin", res.mask_mel.values)
    log.info("separated %d %s scenes with %s into %s", len(records), split, tag, out)
    return out


def run_evaluate(cfg: ExperimentConfig, split: str, tag: str, estimates_dir=None, manifest_path=None,
                 filter_len: int | None = None, out_csv=None, baseline_cache: dict | None = None) -> list:
    """Score foreground estimates; one row per manifest scene, flagged if the estimate is missing."""
    manifest = load_manifest(manifest_path or cfg.manifest_path)
    L = cfg.filter_len if filter_len is None else filter_len
    dcfg = DecompositionConfig(filter_len=L)
    est_dir = Path(estimates_dir) if estimates_dir is not None else cfg.estimates_dir(tag) / split
    rows = []
    for r in sorted(manifest.split(split), key=lambda r: r.id):
        row = {"scene_id": r.id, "split": split, "variant": tag, "filter_len": L, "status": "ok"}
        est_path = est_dir / f"{r.id}_fg.wav"
        if not est_path.is_file():
            log.warning("missing estimate %s", est_path)
            row["status"] = "missing_estimate"
            rows.append(row)
            continue
        refs = [read_wav(r.fg_path), read_wav(r.bg_path)]
        try:
            proj = Projector(refs, L)
            m = metrics(proj.decompose(read_wav(est_path)), dcfg)
            key = (str(r.mix_path), L)
            if baseline_cache is not None and key in baseline_cache:
                base = baseline_cache[key]
            else:
                base = metrics(proj.decompose(read_wav(r.mix_path)), dcfg)
                if baseline_cache is not None:
                    baseline_cache[key] = base
        except UndefinedMetricError as exc:
            log.warning("scene %s: %s", r.id, exc)
            row["status"] = "undefined"
            rows.append(row)
            continue
        row.update(sdr=m.sdr, sir=m.sir, sar=m.sar, sdr_i=m.sdr - base.sdr, sir_i=m.sir - base.sir)
        if m.regularized:
            log.debug("scene %s: regularised Gram system", r.id)
        rows.append(row)
    out_csv = Path(out_csv) if out_csv is not None else cfg.out / "metrics" / f"{tag}_{split}.csv"
    write_scene_csv(out_csv, rows)
    return rows


def run_report(csv_paths, out_dir):
    rows = []
    for p in sorted(Path(p) for p in csv_paths):
        rows.extend(read_scene_csv(p))
    summary = summarize(rows)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary.write_csv(out_dir / "report.csv")
    (out_dir / "report.txt").write_text(summary.to_text())
    return summary


def run_pipeline(cfg: ExperimentConfig, splits=EVAL_SPLITS, with_oracle: bool = True):
    """Full run: data, every configured variant, oracle, metrics, report."""
    run_synth(cfg)
    tags = []
    for v in cfg.variants:
        run_train(cfg, v)
        tags.append(v)
    cache = {}
    csvs = []
    for split in splits:
        if with_oracle:
            run_separate(cfg, split, oracle=True)
            run_evaluate(cfg, split, ORACLE, baseline_cache=cache)
            csvs.append(cfg.out / "metrics" / f"{ORACLE}_{split}.csv")
        for v in tags:
            run_separate(cfg, split, checkpoint=cfg.checkpoint_path(v))
            run_evaluate(cfg, split, v, baseline_cache=cache)
            csvs.append(cfg.out / "metrics" / f"{v}_{split}.csv")
    return run_report(csvs, cfg.out)
