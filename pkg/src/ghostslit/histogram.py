"""Binned detection counts."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KINDS = ("coincidence", "triggered-singles", "untriggered-singles", "all-singles")


@dataclass
class DetectionHistogram:
    """Counts of detection positions (or wavevectors) in contiguous bins.

    ``n_trials`` is the number of emitted pairs the campaign drew, so the
    counts of a coincidence histogram sum to the number of triggers and
    out-of-range detections simply go unrecorded.
    """

    bin_edges: np.ndarray
    counts: np.ndarray
    n_trials: int
    kind: str = "all-singles"
    unit: str = "um"

    def __post_init__(self):
        self.bin_edges = np.asarray(self.bin_edges, dtype=float)
        self.counts = np.asarray(self.counts)
        if self.bin_edges.ndim != 1 or self.bin_edges.size != self.counts.size + 1:
            raise ValueError("need len(bin_edges) == len(counts) + 1")
        if np.any(np.diff(self.bin_edges) <= 0):
            raise ValueError("bin_edges must be strictly increasing")
        if np.any(self.counts < 0):
            raise ValueError("counts must be non-negative")
        if self.kind not in KINDS:
            raise ValueError(f"unknown histogram kind {self.kind!r}")

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.bin_edges)

    @property
    def total(self):
        return self.counts.sum()

    def __add__(self, other):
        if not np.array_equal(self.bin_edges, other.bin_edges) or self.kind != other.kind:
            raise ValueError("can only merge histograms with identical bins and kind")
        return DetectionHistogram(
            self.bin_edges, self.counts + other.counts, self.n_trials + other.n_trials, self.kind, self.unit
        )


@dataclass(frozen=True)
class UniformBins:
    """``count`` equal bins of width ``width`` starting at ``lo``."""

    lo: float
    width: float
    count: int

    @classmethod
    def centred(cls, center, half_span, width):
        n = max(1, int(np.ceil(2 * half_span / width)))
        return cls(center - n * width / 2, width, n)

    @property
    def edges(self) -> np.ndarray:
        return self.lo + self.width * np.arange(self.count + 1)

    def bincount(self, values) -> np.ndarray:
        idx = np.floor((np.asarray(values) - self.lo) / self.width)
        idx = idx[(idx >= 0) & (idx < self.count)].astype(np.intp)
        return np.bincount(idx, minlength=self.count).astype(np.int64)

    def empty(self, kind, unit="um") -> DetectionHistogram:
        return DetectionHistogram(self.edges, np.zeros(self.count, dtype=np.int64), 0, kind, unit)
