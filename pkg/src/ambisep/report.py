"""Per-scene metric CSVs and the variant x subset summary table."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .synth import EVAL_SPLITS

log = logging.getLogger(__name__)

SCENE_FIELDS = ("scene_id", "split", "variant", "sdr", "sir", "sar", "sdr_i", "sir_i", "filter_len", "status")
METRICS = ("sdr_i", "sir_i", "sar")
VARIANT_ORDER = ("M1", "M1+", "M2", "M2+", "IRM")


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return repr(float(x))


def write_scene_csv(path, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SCENE_FIELDS)
        for r in rows:
            w.writerow([r["scene_id"], r["split"], r["variant"]]
                       + [_fmt(r.get(k)) for k in ("sdr", "sir", "sar", "sdr_i", "sir_i")]
                       + [r["filter_len"], r["status"]])


def read_scene_csv(path) -> list:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        for k in ("sdr", "sir", "sar", "sdr_i", "sir_i"):
            r[k] = float(r[k]) if r.get(k) not in (None, "") else None
    return rows


def quartiles(values):
    """Lower quartile, median, upper quartile with inclusive linear interpolation."""
    q1, med, q3 = np.percentile(np.asarray(values, dtype=np.float64), [25, 50, 75], method="linear")
    return float(q1), float(med), float(q3)


@dataclass
class SummaryCell:
    variant: str
    split: str
    count: int
    stats: dict  # metric -> (q1, median, q3)


@dataclass
class ReportSummary:
    cells: list

    def cell(self, variant: str, split: str) -> SummaryCell | None:
        for c in self.cells:
            if c.variant == variant and c.split == split:
                return c
        return None

    def median(self, variant: str, split: str, metric: str = "sdr_i") -> float:
        return self.cell(variant, split).stats[metric][1]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["variant", "subset", "n"]
                       + [f"{m}_{s}" for m in METRICS for s in ("q1", "median", "q3")])
            for c in self.cells:
                w.writerow([c.variant, c.split, c.count] + [repr(v) for m in METRICS for v in c.stats[m]])

    def to_text(self) -> str:
        variants = _ordered({c.variant for c in self.cells})
        splits = [s for s in EVAL_SPLITS if any(c.split == s for c in self.cells)]
        lines = []
        for m in METRICS:
            lines.append(f"{m} (dB): median [q1, q3]")
            lines.append(f"{'':8s}" + "".join(f"{s:>26s}" for s in splits))
            for v in variants:
                row = f"{v:8s}"
                for s in splits:
                    c = self.cell(v, s)
                    row += f"{'-':>26s}" if c is None else \
                        f"{c.stats[m][1]:8.2f} [{c.stats[m][0]:6.2f},{c.stats[m][2]:6.2f}]".rjust(26)
                lines.append(row)
            lines.append("")
        counts = ", ".join(f"{c.variant}/{c.split}={c.count}" for c in self.cells)
        lines.append(f"scene counts: {counts}")
        return "\n".join(lines) + "\n"


def _ordered(variants):
    known = [v for v in VARIANT_ORDER if v in variants]
    return known + sorted(set(variants) - set(known))


def summarize(rows) -> ReportSummary:
    groups = {}
    for r in rows:
        if r["status"] != "ok" or r["split"] not in EVAL_SPLITS:
            continue
        groups.setdefault((r["variant"], r["split"]), []).append(r)
    cells = []
    variants = _ordered({r["variant"] for r in rows})
    for v in variants:
        for s in EVAL_SPLITS:
            g = groups.get((v, s))
            if not g:
                if any(r["variant"] == v for r in rows):
                    log.warning("no scored scenes for %s on %s; omitted", v, s)
                continue
            cells.append(SummaryCell(v, s, len(g), {m: quartiles([r[m] for r in g]) for m in METRICS}))
    return ReportSummary(cells)
