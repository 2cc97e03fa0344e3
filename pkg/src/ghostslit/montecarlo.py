"""Monte Carlo emulation of the ghost-slit experiment.

Pairs are drawn from ``|Psi(xA, xB)|^2`` in fixed-size batches. Each batch
has its own generator seeded by :func:`derive_seed`, so results depend only
on the master seed and the batch size, never on how batches are scheduled.

Photon A triggers the bucket detector when it falls inside the slit. Photon
B is detected once per pair at the observation plane. Its detection is drawn
from its conditional state given the sampled ``xA``, propagated in closed
form (Gaussian ABCD law). Averaging over all pairs gives the unconditioned
singles. Restricting to triggered pairs gives the coincidences.
"""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import stats

from . import analysis
from .biphoton import BiphotonState, conditional_position_pdf, singles_pdfs
from .histogram import DetectionHistogram, UniformBins
from .optics import PropagationSpec, SlitAperture, rayleigh_range

BATCH_SIZE = 1 << 20
MASK64 = (1 << 64) - 1
#: Hard ceiling on pairs drawn while chasing ``min_triggers``.
MAX_PAIRS = 2_000_000_000


def derive_seed(seed: int, label: str) -> int:
    """Child seed: ``seed`` XOR a stable 64-bit hash of ``label``."""
    h = hashlib.blake2b(label.encode(), digest_size=8).digest()
    return (int(seed) & MASK64) ^ int.from_bytes(h, "little")


def _rng(seed, label):
    return np.random.default_rng(derive_seed(seed, label))


@dataclass
class PairSample:
    xA: np.ndarray
    xB: np.ndarray

    def __len__(self):
        return self.xA.size


def _draw_pairs(state: BiphotonState, n, rng):
    s = rng.normal(0.0, state.sigma_p, n)
    d = rng.normal(0.0, state.sigma_q_eff, n)
    return PairSample(0.5 * (s + d), 0.5 * (s - d))


def _batch_sizes(n, batch_size):
    full, rest = divmod(n, batch_size)
    return [batch_size] * full + ([rest] if rest else [])


def iter_pair_batches(state: BiphotonState, n: int, seed: int, batch_size=BATCH_SIZE):
    """Yield :class:`PairSample` batches totalling ``n`` pairs."""
    for i, size in enumerate(_batch_sizes(n, batch_size)):
        yield _draw_pairs(state, size, _rng(seed, f"pairs/{i}"))


def sample_pairs(state: BiphotonState, n: int, seed: int, batch_size=BATCH_SIZE) -> PairSample:
    """``n`` pairs with centroid SD ``sigma_p`` and separation SD ``sigma_q``."""
    if n <= 0:
        raise ValueError("n must be positive")
    batches = list(iter_pair_batches(state, n, seed, batch_size))
    return PairSample(np.concatenate([b.xA for b in batches]), np.concatenate([b.xB for b in batches]))


@dataclass(frozen=True)
class ExperimentConfig:
    """One Monte Carlo campaign.

    ``slit=None`` removes the slit (no triggers). ``blur_sd`` blurs recorded
    coincidence positions at free-space planes to model imaging
    imperfections. With ``min_triggers`` set, whole batches keep being drawn
    past ``n_pairs`` until that many triggers have been collected.
    ``bin_width`` fixes the coincidence/singles bin widths; by default each is
    1/20 of the predicted SD.
    """

    state: BiphotonState
    slit: Optional[SlitAperture]
    plane: PropagationSpec
    n_pairs: int
    seed: int
    blur_sd: float = 0.0
    min_triggers: Optional[int] = None
    bin_width: Optional[tuple] = None
    half_span_sds: float = 10.0
    batch_size: int = BATCH_SIZE
    workers: int = 1

    def __post_init__(self):
        if self.n_pairs <= 0:
            raise ValueError("n_pairs must be positive")
        if self.blur_sd < 0:
            raise ValueError("blur_sd must be >= 0")
        if self.min_triggers is not None and self.min_triggers < 0:
            raise ValueError("min_triggers must be >= 0")


class PlaneModel:
    """Closed-form propagation of photon B's conditional states to one plane."""

    def __init__(self, state: BiphotonState, plane: PropagationSpec):
        self.state = state
        self.plane = plane
        cond = conditional_position_pdf(state, 0.0)
        self.cond_sd0 = cond.sd
        sp2, sq2 = state.sigma_p**2, state.sigma_q_eff**2
        self.mean_slope = (sp2 - sq2) / (sp2 + sq2)
        self.zR = rayleigh_range(cond.sd, state.signal_wavelength)
        if plane.is_farfield:
            self.unit = "1/um"
            self.cond_sd = 1 / (2 * cond.sd)
        else:
            self.unit = "um"
            self.cond_sd = cond.sd * math.sqrt(1 + (plane.z / self.zR) ** 2)

    def detect(self, pairs: PairSample):
        """Photon-B detection coordinate at the plane for every pair.

        The residual ``xB - mean(xA)`` is N(0, cond_sd0) and independent of
        ``xA``; rescaling it yields a draw from the propagated conditional
        state without extra randomness, and at z=0 returns ``xB`` itself.
        """
        m = self.mean_slope * pairs.xA
        r = pairs.xB - m
        if self.plane.is_farfield:
            return r / (2 * self.cond_sd0**2)
        return m + r * (self.cond_sd / self.cond_sd0)

    def singles_sd(self):
        pos, mom = singles_pdfs(self.state)
        if self.plane.is_farfield:
            return mom.sd
        # mixture of conditional beams whose centres spread with xA
        return math.sqrt(pos.sd**2 - self.cond_sd0**2 + self.cond_sd**2)

    def coincidence_prediction(self, slit: Optional[SlitAperture], blur_sd=0.0):
        """(centre, sd) expected for the coincidence distribution (thin-slit estimate)."""
        if self.plane.is_farfield:
            return 0.0, self.cond_sd
        if slit is None:
            return 0.0, self.cond_sd
        spread = self.mean_slope * slit.width_d / math.sqrt(12)
        return self.mean_slope * slit.center, math.sqrt(self.cond_sd**2 + spread**2 + blur_sd**2)


def trigger_probability(state: BiphotonState, slit: Optional[SlitAperture]) -> float:
    """Probability that photon A lands inside the slit."""
    if slit is None:
        return 0.0
    pos, _ = singles_pdfs(state)
    lo, hi = slit.edges
    return float(stats.norm.cdf(hi, 0, pos.sd) - stats.norm.cdf(lo, 0, pos.sd))


@dataclass
class PlaneResult:
    """Histograms and bookkeeping from :func:`run_plane`."""

    coincidence: DetectionHistogram
    all_singles: DetectionHistogram
    triggered_singles: DetectionHistogram
    untriggered_singles: DetectionHistogram
    n_pairs: int
    n_triggers: int
    expected_trigger_prob: float
    plane: PropagationSpec
    flags: dict = field(default_factory=dict)

    def __iter__(self):
        yield self.coincidence
        yield self.all_singles

    @property
    def empty_coincidence(self) -> bool:
        return self.n_triggers == 0

    def trigger_rate_zscore(self) -> float:
        p = self.expected_trigger_prob
        if p <= 0:
            return 0.0 if self.n_triggers == 0 else math.inf
        se = math.sqrt(p * (1 - p) / self.n_pairs)
        return (self.n_triggers / self.n_pairs - p) / se


def _plane_bins(model: PlaneModel, config: ExperimentConfig):
    c_mid, c_sd = model.coincidence_prediction(config.slit, config.blur_sd if not model.plane.is_farfield else 0.0)
    s_sd = model.singles_sd()
    bw_c, bw_s = config.bin_width if config.bin_width else (c_sd / 20, s_sd / 20)
    span = config.half_span_sds
    return UniformBins.centred(c_mid, span * c_sd, bw_c), UniformBins.centred(0.0, span * s_sd, bw_s)


def _run_batch(i, size, config: ExperimentConfig, model: PlaneModel, cbins, sbins):
    pairs = _draw_pairs(config.state, size, _rng(config.seed, f"pairs/{i}"))
    det = model.detect(pairs)
    if config.slit is not None:
        trig = config.slit.contains(pairs.xA)
    else:
        trig = np.zeros(size, dtype=bool)
    coinc = det[trig]
    if config.blur_sd > 0 and not model.plane.is_farfield:
        coinc = coinc + _rng(config.seed, f"blur/{i}").normal(0.0, config.blur_sd, coinc.size)
    return (
        cbins.bincount(coinc),
        sbins.bincount(det),
        sbins.bincount(det[trig]),
        sbins.bincount(det[~trig]),
        int(trig.sum()),
    )


def run_plane(config: ExperimentConfig) -> PlaneResult:
    """Simulate one campaign at ``config.plane``.

    Returns coincidence and singles histograms; iterating the result yields
    ``(coincidence, all_singles)``. Zero triggers set
    ``flags["empty_coincidence"]`` rather than raising.
    """
    model = PlaneModel(config.state, config.plane)
    cbins, sbins = _plane_bins(model, config)
    acc = [np.zeros(cbins.count, np.int64)] + [np.zeros(sbins.count, np.int64) for _ in range(3)]
    n_triggers = 0
    n_done = 0
    sizes = _batch_sizes(config.n_pairs, config.batch_size)
    next_index = 0

    def consume(results):
        nonlocal n_triggers, n_done
        for size, out in results:
            for a, c in zip(acc, out[:4]):
                a += c
            n_triggers += out[4]
            n_done += size

    def run_many(jobs):
        if config.workers > 1 and len(jobs) > 1:
            with ThreadPoolExecutor(config.workers) as pool:
                outs = list(pool.map(lambda j: _run_batch(j[0], j[1], config, model, cbins, sbins), jobs))
        else:
            outs = [_run_batch(i, s, config, model, cbins, sbins) for i, s in jobs]
        # merge order is fixed, though integer addition makes it irrelevant
        consume([(s, o) for (_, s), o in zip(jobs, outs)])

    run_many(list(enumerate(sizes)))
    next_index = len(sizes)
    capped = False
    p = trigger_probability(config.state, config.slit)
    while config.min_triggers and n_triggers < config.min_triggers:
        if p <= 0 or n_done >= MAX_PAIRS:
            capped = True
            break
        missing = config.min_triggers - n_triggers
        n_more = max(1, math.ceil(missing / (p * config.batch_size)))
        n_more = min(n_more, max(1, config.workers))
        jobs = [(next_index + j, config.batch_size) for j in range(n_more)]
        next_index += n_more
        run_many(jobs)

    unit = model.unit
    hists = [
        DetectionHistogram(cbins.edges, acc[0], n_done, "coincidence", unit),
        DetectionHistogram(sbins.edges, acc[1], n_done, "all-singles", unit),
        DetectionHistogram(sbins.edges, acc[2], n_done, "triggered-singles", unit),
        DetectionHistogram(sbins.edges, acc[3], n_done, "untriggered-singles", unit),
    ]
    flags = {"empty_coincidence": n_triggers == 0, "min_triggers_unmet": capped}
    return PlaneResult(*hists, n_pairs=n_done, n_triggers=n_triggers, expected_trigger_prob=p,
                       plane=config.plane, flags=flags)


@dataclass
class ScanRow:
    z: float
    cond_sd: float
    cond_ci: float
    singles_sd: float
    singles_ci: float


def scan_z(config: ExperimentConfig, z_list) -> list[ScanRow]:
    """Conditional and singles widths at each free-space distance in ``z_list`` [um]."""
    z_list = list(z_list)
    if not z_list:
        raise ValueError("z_list must not be empty")
    rows = []
    for z in z_list:
        if z < 0:
            raise ValueError(f"z must be >= 0, got {z!r}")
        sub = replace(config, plane=PropagationSpec("free-space", z=float(z)),
                      seed=derive_seed(config.seed, f"z={float(z)!r}"))
        res = run_plane(sub)
        c = analysis.estimate_sd_ci(res.coincidence)
        s = analysis.estimate_sd_ci(res.all_singles)
        rows.append(ScanRow(float(z), c.sd, c.halfwidth, s.sd, s.halfwidth))
    return rows


def frame_y_sd(state: BiphotonState, plane: PropagationSpec) -> float:
    """SD of photon B along the slit axis; the slit does not constrain y."""
    return PlaneModel(state, plane).singles_sd()


def synthesize_frame(histogram_x: DetectionHistogram, state: BiphotonState, y_edges,
                     plane: Optional[PropagationSpec] = None, seed: int = 0, y_sd: Optional[float] = None):
    """2-D count image (rows = y pixels, columns = histogram bins).

    Each column's counts are spread over y by a multinomial draw from the
    Gaussian y-marginal (unconditioned law at ``plane`` unless ``y_sd`` is
    given), so column sums reproduce ``histogram_x`` exactly.
    """
    y_edges = np.asarray(y_edges, dtype=float)
    if y_sd is None:
        y_sd = frame_y_sd(state, plane or PropagationSpec())
    cdf = stats.norm.cdf(y_edges, 0.0, y_sd)
    p = np.diff(cdf)
    p = p / p.sum()
    rng = _rng(seed, "frame")
    counts = np.asarray(histogram_x.counts, dtype=np.int64)
    image = rng.multinomial(counts, p)
    return image.T


@dataclass
class AuditReport:
    """Comparison of photon-B singles with and without the slit in arm A."""

    bin_edges: np.ndarray
    counts_present: np.ndarray
    counts_absent: np.ndarray
    deviation: np.ndarray
    bound: np.ndarray
    max_ratio: float
    chi2: float
    p_value: float
    partition_ok: bool
    paired: bool
    passed: bool

    def as_dict(self):
        return {
            "max_deviation_over_bound": self.max_ratio,
            "chi2": self.chi2,
            "p_value": self.p_value,
            "partition_ok": self.partition_ok,
            "paired": self.paired,
            "passed": self.passed,
            "bins": len(self.deviation),
        }


def compare_singles(a: np.ndarray, b: np.ndarray, min_count=1):
    """Per-bin relative deviation ``|a-b|/mean``, its bound ``4/sqrt(mean)`` and a chi-square test."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    mean = 0.5 * (a + b)
    keep = mean >= min_count
    dev = np.abs(a[keep] - b[keep]) / mean[keep]
    bound = 4 / np.sqrt(mean[keep])
    tot = a[keep] + b[keep]
    chi2 = float(np.sum((a[keep] - b[keep]) ** 2 / tot))
    dof = max(int(keep.sum()) - 1, 1)
    p = float(stats.chi2.sf(chi2, dof))
    ratio = float(np.max(dev / bound)) if dev.size else 0.0
    return dev, bound, ratio, chi2, p


def _audit_bins(state, plane, n_bins):
    sd = PlaneModel(state, plane).singles_sd()
    return UniformBins.centred(0.0, 2.5 * sd, 5 * sd / n_bins)


def no_signaling_audit(state: BiphotonState, slit: SlitAperture, plane: PropagationSpec, n: int, seed: int,
                       paired=True, n_bins=12, batch_size=BATCH_SIZE) -> AuditReport:
    """Run slit-present and slit-absent campaigns and compare photon-B singles.

    With ``paired`` both campaigns share the pair stream, so any difference
    exposes a dependence of the singles on the slit; otherwise the absent
    campaign uses an independent seed and the per-bin fluctuation bound
    applies. The report also checks that triggered plus untriggered singles
    reproduce the all-singles histogram.
    """
    bins = _audit_bins(state, plane, n_bins)
    common = dict(state=state, plane=plane, n_pairs=n, bin_width=(bins.width, bins.width),
                  half_span_sds=2.5, batch_size=batch_size)
    present = run_plane(ExperimentConfig(slit=slit, seed=derive_seed(seed, "present"), **common))
    absent_seed = derive_seed(seed, "present" if paired else "absent")
    absent = run_plane(ExperimentConfig(slit=None, seed=absent_seed, **common))
    a = present.all_singles.counts
    b = absent.all_singles.counts
    dev, bound, ratio, chi2, p = compare_singles(a, b)
    partition = bool(np.array_equal(present.triggered_singles.counts + present.untriggered_singles.counts, a))
    return AuditReport(present.all_singles.bin_edges, a, b, dev, bound, ratio, chi2, p, partition, paired,
                       bool(ratio < 1 and partition))


def null_calibration(state: BiphotonState, plane: PropagationSpec, n: int, seed: int, n_bins=12,
                     batch_size=BATCH_SIZE):
    """Two slit-absent campaigns with independent seeds, compared like the audit."""
    bins = _audit_bins(state, plane, n_bins)
    common = dict(state=state, slit=None, plane=plane, n_pairs=n, bin_width=(bins.width, bins.width),
                  half_span_sds=2.5, batch_size=batch_size)
    r1 = run_plane(ExperimentConfig(seed=derive_seed(seed, "null/1"), **common))
    r2 = run_plane(ExperimentConfig(seed=derive_seed(seed, "null/2"), **common))
    return compare_singles(r1.all_singles.counts, r2.all_singles.counts)
