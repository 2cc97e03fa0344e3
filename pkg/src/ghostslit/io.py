"""Plain-text output formats: histogram/width CSVs, ASCII PGM frames, JSON."""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .histogram import DetectionHistogram
from .montecarlo import ScanRow

HIST_COLUMNS = ("bin_center", "count")
WIDTH_COLUMNS = ("z_mm", "cond_sd_um", "cond_ci_um", "singles_sd_um", "singles_ci_um")
PGM_MAXVAL = 65535


def write_histogram_csv(path, hist: DetectionHistogram):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HIST_COLUMNS)
        for c, n in zip(hist.centers, hist.counts):
            w.writerow((repr(float(c)), int(n)))


def read_histogram_csv(path, kind="all-singles", unit="um", n_trials=0) -> DetectionHistogram:
    """Rebuild a uniform-bin histogram from its (bin_center, count) CSV."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if tuple(rows[0]) != HIST_COLUMNS:
        raise ValueError(f"{path}: unexpected header {rows[0]}")
    centers = np.array([float(r[0]) for r in rows[1:]])
    counts = np.array([int(r[1]) for r in rows[1:]], dtype=np.int64)
    width = (centers[-1] - centers[0]) / (len(centers) - 1) if len(centers) > 1 else 1.0
    edges = np.append(centers - width / 2, centers[-1] + width / 2)
    return DetectionHistogram(edges, counts, n_trials or int(counts.sum()), kind, unit)


def write_widths_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(WIDTH_COLUMNS)
        for r in rows:
            w.writerow((repr(r.z / 1000.0), repr(r.cond_sd), repr(r.cond_ci), repr(r.singles_sd), repr(r.singles_ci)))


def read_widths_csv(path) -> list:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames) != WIDTH_COLUMNS:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        return [
            ScanRow(float(r["z_mm"]) * 1000.0, float(r["cond_sd_um"]), float(r["cond_ci_um"]),
                    float(r["singles_sd_um"]), float(r["singles_ci_um"]))
            for r in reader
        ]


def write_pgm(path, image) -> int:
    """Write a plain (P2) grey map; returns the divisor applied to fit 16 bits."""
    image = np.asarray(image, dtype=np.int64)
    peak = int(image.max()) if image.size else 0
    scale = 1 if peak <= PGM_MAXVAL else -(-peak // PGM_MAXVAL)
    img = image // scale
    maxval = max(1, int(img.max()))
    h, w = img.shape
    with open(path, "w") as fh:
        fh.write(f"P2\n{w} {h}\n{maxval}\n")
        for row in img:
            fh.write(" ".join(str(int(v)) for v in row))
            fh.write("\n")
    return scale


def read_pgm(path) -> np.ndarray:
    with open(path) as fh:
        tokens = fh.read().split()
    if tokens[0] != "P2":
        raise ValueError(f"{path}: not a plain PGM")
    w, h = int(tokens[1]), int(tokens[2])
    return np.array(tokens[4 : 4 + w * h], dtype=np.int64).reshape(h, w)


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
