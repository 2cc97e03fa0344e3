import math

import numpy as np
import pytest
from scipy import stats

from ghostslit.analysis import build_uncertainty_report, estimate_sd_ci, fit_beam_widths, fit_gaussian
from ghostslit.errors import FitError, InsufficientDataError
from ghostslit.histogram import DetectionHistogram, UniformBins
from ghostslit.optics import beam_width

SD = 9.2041


def gaussian_bins(width=0.5, half=60.0):
    return UniformBins.centred(0.0, half, width)


def binned_counts(rng, n, bins, sd=SD):
    """Multinomial bin counts: same law as histogramming n Gaussian draws."""
    p = np.diff(stats.norm.cdf(bins.edges, 0.0, sd))
    return rng.multinomial(n, p / p.sum())


class TestEstimateSd:
    def test_binned_gaussian(self):
        rng = np.random.default_rng(1)
        bins = gaussian_bins()
        x = rng.normal(0, SD, 10**6)
        h = DetectionHistogram(bins.edges, bins.bincount(x), 10**6)
        est = estimate_sd_ci(h)
        assert est.halfwidth <= 0.013
        # three standard errors; the 95% half-width is 1.96 of them
        assert abs(est.sd - SD) < 3 * est.halfwidth / 1.96
        assert est.ci95[0] < est.sd < est.ci95[1]

    def test_coverage(self):
        rng = np.random.default_rng(2)
        bins = gaussian_bins()
        hits = 0
        for _ in range(500):
            h = DetectionHistogram(bins.edges, binned_counts(rng, 10**6, bins), 10**6)
            lo, hi = estimate_sd_ci(h).ci95
            hits += lo <= SD <= hi
        assert hits / 500 >= 0.93

    def test_single_bin(self):
        h = DetectionHistogram([0.0, 1.0, 2.0], [500, 0], 500)
        with pytest.raises(InsufficientDataError):
            estimate_sd_ci(h)

    def test_too_few_counts(self):
        h = DetectionHistogram([0.0, 1.0, 2.0], [30, 40], 70)
        with pytest.raises(InsufficientDataError):
            estimate_sd_ci(h)

    def test_uniform(self):
        rng = np.random.default_rng(3)
        bins = UniformBins(-6.0, 0.01, 1200)
        x = rng.uniform(-5, 5, 10**6)
        h = DetectionHistogram(bins.edges, bins.bincount(x), 10**6)
        assert estimate_sd_ci(h).sd == pytest.approx(10 / math.sqrt(12), rel=2e-3)


class TestFitGaussian:
    def test_exact_counts(self):
        bins = gaussian_bins()
        x = 0.5 * (bins.edges[1:] + bins.edges[:-1])
        y = 1234.5 * np.exp(-0.5 * ((x - 1.3) / SD) ** 2)
        fit = fit_gaussian(DetectionHistogram(bins.edges, y, 0))
        assert fit.amplitude == pytest.approx(1234.5, rel=1e-6)
        assert fit.mean == pytest.approx(1.3, rel=1e-6)
        assert fit.sd == pytest.approx(SD, rel=1e-6)
        for name, (lo, hi) in fit.ci95.items():
            assert lo <= getattr(fit, name) <= hi

    def test_poisson_counts(self):
        rng = np.random.default_rng(4)
        bins = gaussian_bins()
        h = DetectionHistogram(bins.edges, binned_counts(rng, 10**5, bins), 10**5)
        fit = fit_gaussian(h)
        assert fit.sd == pytest.approx(SD, rel=0.02)
        # moment and fit estimators agree on clean data
        assert fit.sd == pytest.approx(estimate_sd_ci(h).sd, rel=0.01)

    def test_flat_histogram_is_rejected(self):
        bins = UniformBins(-50.0, 1.0, 100)
        h = DetectionHistogram(bins.edges, np.full(100, 1000), 100_000)
        try:
            fit = fit_gaussian(h)
        except FitError:
            return
        lo, hi = fit.ci95["sd"]
        assert hi - lo >= bins.edges[-1] - bins.edges[0]

    def test_needs_three_bins(self):
        with pytest.raises(InsufficientDataError):
            fit_gaussian(DetectionHistogram([0, 1, 2, 3], [0, 10, 10], 20))


A0 = 9.2041
ZR = 1499.6
Z = np.array([0.0, 5000.0, 10000.0, 20000.0, 40000.0])


class TestBeamFit:
    def test_noiseless(self):
        pts = [(z, beam_width(A0, ZR, z), 0.0) for z in Z]
        fit = fit_beam_widths(pts)
        assert fit.a0 == pytest.approx(A0, rel=1e-9)
        assert fit.zR == pytest.approx(ZR, rel=1e-9)
        assert fit.residual_norm < 1e-9

    def test_noisy(self):
        rng = np.random.default_rng(5)
        good = covered = 0
        for _ in range(500):
            a = beam_width(A0, ZR, Z) * (1 + 0.02 * rng.standard_normal(Z.size))
            fit = fit_beam_widths(np.column_stack([Z, a, 1.96 * 0.02 * a]))
            good += abs(fit.a0 / A0 - 1) < 0.05 and abs(fit.zR / ZR - 1) < 0.05
            lo, hi = fit.ci95["zR"]
            covered += lo <= ZR <= hi
        assert good / 500 >= 0.95
        assert covered / 500 >= 0.90

    def test_too_few_points(self):
        with pytest.raises(InsufficientDataError):
            fit_beam_widths([(0, 1, 0), (1, 2, 0)])
        with pytest.raises(InsufficientDataError):
            fit_beam_widths([(0, 1, 0), (0, 1, 0), (1, 2, 0)])

    def test_shrinking_beam_fails(self):
        with pytest.raises(FitError):
            fit_beam_widths([(0, 10.0, 0), (1000, 8.0, 0), (2000, 5.0, 0)])


class TestUncertaintyReport:
    def test_measured_values(self):
        r = build_uncertainty_report((19.0, 1.0), (0.046, 0.006))
        assert r.product_hbar == pytest.approx(0.874, abs=5e-4)
        # first order: 0.874 * sqrt((1/19)^2 + (0.006/0.046)^2)
        assert r.halfwidth == pytest.approx(0.1229, abs=1e-4)
        assert not r.violation

    def test_saturation(self):
        r = build_uncertainty_report((9.2041, 0.0), (0.05432, 0.0))
        assert round(r.product_hbar, 4) == 0.5
        exact = build_uncertainty_report((9.2041, 0.0), (1 / (2 * 9.2041), 0.0))
        assert exact.product_hbar == pytest.approx(0.5, abs=1e-15)
        assert not exact.violation

    def test_violation_flag(self):
        assert build_uncertainty_report((5.0, 0.1), (0.05, 0.001)).violation
        assert not build_uncertainty_report((5.0, 0.1), (0.09, 0.02)).violation
