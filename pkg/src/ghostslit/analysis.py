"""Width estimation, Gaussian and Gaussian-beam fits, uncertainty reports."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy import optimize, stats

from .errors import FitError, InsufficientDataError
from .histogram import DetectionHistogram

Z95 = stats.norm.ppf(0.975)
HBAR_BOUND = 0.5


class SdEstimate(NamedTuple):
    sd: float
    ci95: tuple
    mean: float
    n: int

    @property
    def halfwidth(self) -> float:
        return 0.5 * (self.ci95[1] - self.ci95[0])


def estimate_sd_ci(hist: DetectionHistogram, min_counts=100, sheppard=True) -> SdEstimate:
    """Moment SD of a histogram with a chi-square 95% interval.

    The interval assumes a Gaussian population: ``(n-1) s^2 / sigma^2`` is
    chi-square with ``n-1`` degrees of freedom. With ``sheppard`` set, the
    grouping variance ``h^2/12`` of equal-width bins is removed.

    Raises
    ------
    InsufficientDataError
        Fewer than ``min_counts`` counts or fewer than two occupied bins.
    """
    counts = np.asarray(hist.counts, dtype=float)
    n = counts.sum()
    occupied = np.count_nonzero(counts)
    if n < min_counts or occupied < 2:
        raise InsufficientDataError(
            f"need >= {min_counts} counts in >= 2 bins, got {n:g} counts in {occupied} bin(s)"
        )
    x = hist.centers
    mean = float(np.sum(x * counts) / n)
    var = float(np.sum((x - mean) ** 2 * counts) / n)
    widths = hist.widths
    if sheppard and np.allclose(widths, widths[0]):
        var = max(var - widths[0] ** 2 / 12, 0.0)
    var *= n / (n - 1)
    sd = math.sqrt(var)
    dof = n - 1
    lo = sd * math.sqrt(dof / stats.chi2.ppf(0.975, dof))
    hi = sd * math.sqrt(dof / stats.chi2.ppf(0.025, dof))
    return SdEstimate(sd, (lo, hi), mean, int(n))


@dataclass
class FitGauss:
    amplitude: float
    mean: float
    sd: float
    ci95: dict
    residual_norm: float
    nfev: int = 0


def _gauss(x, amp, mu, sd):
    return amp * np.exp(-0.5 * ((x - mu) / sd) ** 2)


def fit_gaussian(hist: DetectionHistogram, max_nfev=2000) -> FitGauss:
    """Least-squares Gaussian fit to bin counts.

    Residuals are weighted by Poisson errors ``sqrt(max(count, 1))``.
    Confidence intervals come from the Jacobian at the optimum scaled by the
    reduced chi-square.

    Raises
    ------
    InsufficientDataError
        Fewer than three occupied bins.
    FitError
        No convergence, or a width that the binned range cannot constrain.
    """
    x = hist.centers
    y = np.asarray(hist.counts, dtype=float)
    if np.count_nonzero(y) < 3:
        raise InsufficientDataError("Gaussian fit needs at least 3 occupied bins")
    w = 1 / np.sqrt(np.maximum(y, 1.0))
    mu0 = float(np.sum(x * y) / y.sum())
    sd0 = math.sqrt(float(np.sum((x - mu0) ** 2 * y) / y.sum()))
    span = hist.bin_edges[-1] - hist.bin_edges[0]
    p0 = np.array([y.max(), mu0, max(sd0, hist.widths.min())])

    def resid(p):
        return (_gauss(x, *p) - y) * w

    res = optimize.least_squares(
        resid, p0, x_scale=np.abs(p0) + [0, sd0, 0], xtol=1e-14, ftol=1e-14, gtol=1e-14, max_nfev=max_nfev
    )
    amp, mu, sd = res.x
    sd = abs(sd)
    diag = {"status": res.status, "message": res.message, "nfev": res.nfev, "params": res.x.tolist()}
    if not res.success:
        raise FitError(f"Gaussian fit did not converge: {res.message}", diag)
    if sd > span / 2 or amp <= 0:
        raise FitError(f"fitted sd={sd:.4g} not identifiable from a {span:.4g}-wide histogram", diag)
    dof = max(len(x) - 3, 1)
    chi2_red = float(np.sum(res.fun**2) / dof)
    try:
        cov = np.linalg.inv(res.jac.T @ res.jac) * chi2_red
    except np.linalg.LinAlgError as exc:
        raise FitError("singular Jacobian at the optimum", diag) from exc
    err = np.sqrt(np.clip(np.diag(cov), 0, None)) * Z95
    params = {"amplitude": amp, "mean": mu, "sd": sd}
    ci = {name: (val - e, val + e) for (name, val), e in zip(params.items(), err)}
    return FitGauss(amp, mu, sd, ci, float(np.linalg.norm(res.fun)), res.nfev)


@dataclass
class BeamFit:
    a0: float
    zR: float
    ci95: dict
    residual_norm: float
    coefficients: tuple = field(default=(0.0, 0.0))

    def width(self, z):
        return self.a0 * np.sqrt(1 + (np.asarray(z, dtype=float) / self.zR) ** 2)


def fit_beam_widths(points) -> BeamFit:
    """Fit ``a(z) = a0 sqrt(1 + (z/zR)^2)`` to ``(z, width, ci95_halfwidth)`` points.

    The fit is linear least squares of ``a^2 = a0^2 + (a0/zR)^2 z^2``,
    weighted by the propagated width errors when every point carries a
    positive CI (unweighted otherwise). CIs on ``a0`` and ``zR`` follow from
    the coefficient covariance by the delta method.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 3:
        raise InsufficientDataError("beam fit needs at least 3 points")
    z, a, ci = pts[:, 0], pts[:, 1], pts[:, 2] if pts.shape[1] > 2 else np.zeros(len(pts))
    if len(np.unique(z)) < 3:
        raise InsufficientDataError("beam fit needs at least 3 distinct z values")
    X = np.column_stack([np.ones_like(z), z**2])
    y = a**2
    weighted = bool(np.all(ci > 0))
    if weighted:
        sig = 2 * a * ci / Z95
        Xw, yw = X / sig[:, None], y / sig
    else:
        Xw, yw = X, y
    coef, *_ = np.linalg.lstsq(Xw, yw, rcond=None)
    b0, b1 = coef
    diag = {"intercept": b0, "slope": b1}
    if b0 <= 0 or b1 <= 0:
        raise FitError(f"width data inconsistent with beam law (a0^2={b0:.4g}, slope={b1:.4g})", diag)
    xtx_inv = np.linalg.inv(Xw.T @ Xw)
    resid = yw - Xw @ coef
    if weighted:
        cov = xtx_inv
        q = Z95
    else:
        dof = len(z) - 2
        s2 = float(resid @ resid / dof) if dof > 0 else 0.0
        cov = xtx_inv * s2
        q = stats.t.ppf(0.975, dof) if dof > 0 else Z95
    a0 = math.sqrt(b0)
    zR = math.sqrt(b0 / b1)
    g_a0 = np.array([1 / (2 * a0), 0.0])
    g_zR = np.array([zR / (2 * b0), -zR / (2 * b1)])
    e_a0 = q * math.sqrt(max(g_a0 @ cov @ g_a0, 0.0))
    e_zR = q * math.sqrt(max(g_zR @ cov @ g_zR, 0.0))
    model = a0 * np.sqrt(1 + (z / zR) ** 2)
    rel_resid = float(np.linalg.norm(model - a) / np.linalg.norm(a))
    return BeamFit(
        a0=a0,
        zR=zR,
        ci95={"a0": (a0 - e_a0, a0 + e_a0), "zR": (zR - e_zR, zR + e_zR)},
        residual_norm=rel_resid,
        coefficients=(float(b0), float(b1)),
    )


@dataclass
class UncertaintyReport:
    """Conditional uncertainty product of photon B in units of hbar.

    ``violation`` is set when even the upper end of the 95% interval lies
    below 1/2.
    """

    dx_cond: float
    dk_cond: float
    product_hbar: float
    ci95: tuple
    violation: bool
    provenance: dict = field(default_factory=dict)

    @property
    def halfwidth(self) -> float:
        return 0.5 * (self.ci95[1] - self.ci95[0])

    def as_dict(self):
        return {
            "dx_cond_um": self.dx_cond,
            "dk_cond_per_um": self.dk_cond,
            "product_hbar": self.product_hbar,
            "ci95": list(self.ci95),
            "ci95_halfwidth": self.halfwidth,
            "bound_hbar": HBAR_BOUND,
            "violation": self.violation,
            "provenance": self.provenance,
        }


def build_uncertainty_report(near, far_k, provenance: Optional[dict] = None) -> UncertaintyReport:
    """Combine a near-field width and a far-field wavevector width.

    ``near`` and ``far_k`` are ``(sd, ci95_halfwidth)`` pairs; the product's
    half-width is propagated to first order.
    """
    sx, ex = near
    sk, ek = far_k
    if not (sx > 0 and sk > 0):
        raise ValueError("widths must be positive")
    prod = sx * sk
    half = prod * math.hypot(ex / sx, ek / sk)
    ci = (prod - half, prod + half)
    return UncertaintyReport(sx, sk, prod, ci, ci[1] < HBAR_BOUND, dict(provenance or {}))
