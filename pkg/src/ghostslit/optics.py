"""Sampled-field paraxial optics for photon B.

Fields are 1-D complex amplitudes on a uniform power-of-two grid. Free-space
propagation uses the spectral (transfer-function) Fresnel method, which is
exactly unitary on the discrete grid. Closed-form Gaussian-beam laws live
alongside so the two routes can check each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy.signal import fftconvolve

from .biphoton import BiphotonState, conditional_position_pdf
from .errors import GeometryError, InvalidParameterError, SamplingError

#: Default ceiling on padded grid size for :func:`fresnel_propagate`.
MAX_SAMPLES = 2**24


def _is_pow2(n):
    return n > 0 and (n & (n - 1)) == 0


def next_pow2(n) -> int:
    return 1 << max(0, math.ceil(math.log2(max(n, 1))))


@dataclass(frozen=True)
class ComplexField:
    """Complex transverse amplitude sampled at ``x0 + i*dx``.

    Parameters
    ----------
    x0 : float
        Coordinate of the first sample [um].
    dx : float
        Grid pitch [um].
    samples : ndarray of complex
        Amplitudes; length must be a power of two.
    wavelength : float
        Vacuum wavelength [um].
    """

    x0: float
    dx: float
    samples: np.ndarray
    wavelength: float

    def __post_init__(self):
        if not self.dx > 0:
            raise SamplingError(f"dx must be positive, got {self.dx!r}")
        if not self.wavelength > 0:
            raise InvalidParameterError(f"wavelength must be positive, got {self.wavelength!r}")
        samples = np.asarray(self.samples, dtype=complex)
        if samples.ndim != 1 or not _is_pow2(samples.size):
            raise SamplingError(f"sample count must be a power of two, got {samples.size}")
        object.__setattr__(self, "samples", samples)

    @property
    def n(self) -> int:
        return self.samples.size

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.n)

    @property
    def span(self) -> float:
        return self.n * self.dx

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.samples) ** 2

    @property
    def power(self) -> float:
        """Squared norm ``sum |a|^2 dx``."""
        return float(np.sum(self.intensity) * self.dx)

    def moments(self):
        """(mean, sd) of the normalized intensity."""
        return weighted_moments(self.x, self.intensity)


@dataclass(frozen=True)
class SlitAperture:
    """Ideal binary slit of full width ``width_d`` centred at ``center`` [um]."""

    width_d: float
    center: float = 0.0

    def __post_init__(self):
        if not self.width_d > 0:
            raise InvalidParameterError(f"slit width must be positive, got {self.width_d!r}")

    @property
    def edges(self):
        return self.center - self.width_d / 2, self.center + self.width_d / 2

    def contains(self, x):
        lo, hi = self.edges
        x = np.asarray(x)
        return (x >= lo) & (x <= hi)


@dataclass(frozen=True)
class PropagationSpec:
    """Observation plane for photon B.

    ``mode`` is ``"free-space"`` (distance ``z`` from the crystal image plane)
    or ``"lens-fourier"`` (focal plane of a lens of focal length ``f``).
    Distances are in um.
    """

    mode: str = "free-space"
    z: float = 0.0
    f: Optional[float] = None

    def __post_init__(self):
        if self.mode == "free-space":
            if not (np.isfinite(self.z) and self.z >= 0):
                raise InvalidParameterError(f"z must be >= 0, got {self.z!r}")
        elif self.mode == "lens-fourier":
            if self.f is None or not self.f > 0:
                raise InvalidParameterError(f"focal length must be positive, got {self.f!r}")
        else:
            raise InvalidParameterError(f"unknown propagation mode {self.mode!r}")

    @property
    def is_farfield(self) -> bool:
        return self.mode == "lens-fourier"

    @property
    def label(self) -> str:
        if self.is_farfield:
            return f"lens-fourier(f={self.f:g})"
        return f"free-space(z={self.z:g})"


class Profile(NamedTuple):
    x: np.ndarray
    intensity: np.ndarray


def weighted_moments(x, w):
    """Mean and SD of coordinates ``x`` weighted by non-negative ``w``."""
    w = np.asarray(w, dtype=float)
    total = w.sum()
    mean = float(np.sum(x * w) / total)
    var = float(np.sum((x - mean) ** 2 * w) / total)
    return mean, math.sqrt(var)


def make_grid(center, output_sd, feature, min_count=64):
    """Grid ``(x0, dx, count)`` with pitch ``feature/8`` spanning at least 16x ``output_sd``.

    The count is rounded up to a power of two.
    """
    if not (output_sd > 0 and feature > 0):
        raise InvalidParameterError("output_sd and feature must be positive")
    dx = feature / 8
    count = next_pow2(max(min_count, math.ceil(16 * output_sd / dx)))
    return center - count * dx / 2, dx, count


def gaussian_field(mean, intensity_sd, grid, wavelength) -> ComplexField:
    """Real Gaussian amplitude with intensity SD ``intensity_sd``, unit squared norm."""
    x0, dx, count = grid
    x = x0 + dx * np.arange(count)
    amp = np.exp(-((x - mean) ** 2) / (4 * intensity_sd**2))
    amp = amp / math.sqrt(np.sum(amp**2) * dx)
    return ComplexField(x0, dx, amp.astype(complex), wavelength)


def discretize_conditional(state: BiphotonState, xA: float, grid) -> ComplexField:
    """Sample the pure conditional amplitude of photon B given photon A at ``xA``.

    Raises
    ------
    SamplingError
        If the grid does not hold mean +/- 4 SD or the pitch exceeds SD/8.
    """
    x0, dx, count = grid
    pdf = conditional_position_pdf(state, xA)
    lo, hi = pdf.mean - 4 * pdf.sd, pdf.mean + 4 * pdf.sd
    if x0 > lo or x0 + (count - 1) * dx < hi:
        raise SamplingError(
            f"grid [{x0:g}, {x0 + (count - 1) * dx:g}] must cover [{lo:g}, {hi:g}] (mean +/- 4 sd)"
        )
    if dx > pdf.sd / 8:
        raise SamplingError(f"dx={dx:g} exceeds sd/8={pdf.sd / 8:g}")
    return gaussian_field(pdf.mean, pdf.sd, grid, state.signal_wavelength)


def apply_slit(field: ComplexField, slit: SlitAperture) -> ComplexField:
    """Zero samples outside the slit; the result is not renormalized.

    Only samples lying within the slit edges are kept, so each edge snaps
    inward to the nearest grid sample.
    """
    lo, hi = slit.edges
    x = field.x
    if hi < x[0] or lo > x[-1]:
        raise GeometryError(f"slit [{lo:g}, {hi:g}] lies outside grid [{x[0]:g}, {x[-1]:g}]")
    tol = 1e-9 * field.dx
    inside = (x >= lo - tol) & (x <= hi + tol)
    return ComplexField(field.x0, field.dx, np.where(inside, field.samples, 0), field.wavelength)


def pad_field(field: ComplexField, count: int) -> ComplexField:
    """Zero-pad symmetrically to ``count`` samples, keeping the pitch."""
    if count < field.n:
        raise SamplingError("cannot pad to fewer samples")
    if count == field.n:
        return field
    left = (count - field.n) // 2
    out = np.zeros(count, dtype=complex)
    out[left : left + field.n] = field.samples
    return ComplexField(field.x0 - left * field.dx, field.dx, out, field.wavelength)


def fresnel_propagate(field: ComplexField, z: float, pad=True, max_samples=MAX_SAMPLES) -> ComplexField:
    """Propagate ``field`` a distance ``z`` [um] in free space (paraxial).

    The grid is zero-padded to a power of two satisfying ``N dx^2 >= lambda z``
    when ``pad`` is set.

    Raises
    ------
    SamplingError
        If the required grid exceeds ``max_samples`` or, with ``pad=False``,
        the grid violates the bound.
    """
    if z < 0:
        raise InvalidParameterError(f"z must be >= 0, got {z!r}")
    if z == 0:
        return field
    need = field.wavelength * z / field.dx**2
    if field.n < need:
        if not pad:
            raise SamplingError(f"N={field.n} < lambda z / dx^2 = {need:.4g}; enable padding")
        target = next_pow2(math.ceil(need))
        if target > max_samples:
            raise SamplingError(f"propagation to z={z:g} needs {target} samples (> {max_samples})")
        field = pad_field(field, target)
    k = 2 * math.pi * np.fft.fftfreq(field.n, d=field.dx)
    transfer = np.exp(-1j * field.wavelength * z * k**2 / (4 * math.pi))
    out = np.fft.ifft(np.fft.fft(field.samples) * transfer)
    return ComplexField(field.x0, field.dx, out, field.wavelength)


def lens_farfield(field: ComplexField, f: float) -> ComplexField:
    """Field in the back focal plane of a thin lens of focal length ``f`` [um].

    Output sample ``m`` sits at ``x_f = f * lambda * k_m / (2 pi)`` with
    ``k_m = 2 pi m / (N dx)``; use :func:`focal_to_wavevector` to recover
    ``k_m``. The squared norm is preserved.
    """
    if not f > 0:
        raise InvalidParameterError(f"focal length must be positive, got {f!r}")
    n, dx, lam = field.n, field.dx, field.wavelength
    m = np.arange(-n // 2, n // 2)
    k = 2 * math.pi * m / (n * dx)
    spectrum = np.fft.fftshift(np.fft.fft(field.samples)) * dx * np.exp(-1j * k * field.x0)
    out = spectrum * np.exp(-1j * math.pi / 4) / math.sqrt(lam * f)
    dxf = f * lam / (n * dx)
    return ComplexField(m[0] * dxf, dxf, out, lam)


def focal_to_wavevector(x_f, f, wavelength):
    """Map focal-plane positions [um] to transverse wavevector [1/um]."""
    return 2 * math.pi * np.asarray(x_f) / (wavelength * f)


def wavevector_to_focal(k, f, wavelength):
    return np.asarray(k) * wavelength * f / (2 * math.pi)


def beam_width(a0, zR, z):
    """Gaussian-beam width law ``a0 * sqrt(1 + (z/zR)^2)``."""
    return a0 * np.sqrt(1 + (np.asarray(z, dtype=float) / zR) ** 2)


def rayleigh_range(intensity_sd, wavelength):
    """Rayleigh range of a waist whose intensity SD is ``intensity_sd`` (``w0 = 2 sd``)."""
    if not (intensity_sd > 0 and wavelength > 0):
        raise InvalidParameterError("intensity_sd and wavelength must be positive")
    return math.pi * (2 * intensity_sd) ** 2 / wavelength


def abcd_intensity_sd(sd0, wavelength, abcd):
    """Intensity SD after a paraxial ABCD system, input waist of intensity SD ``sd0``.

    Uses the complex beam parameter ``q``; the input is an unchirped waist.
    """
    (A, B), (C, D) = abcd
    zR = rayleigh_range(sd0, wavelength)
    q = 1j * zR
    q_out = (A * q + B) / (C * q + D)
    inv = 1 / q_out
    # Im(1/q) = -lambda / (pi w^2)
    w2 = -wavelength / (math.pi * inv.imag)
    return math.sqrt(w2) / 2


def free_space_abcd(z):
    return ((1.0, z), (0.0, 1.0))


def lens_fourier_abcd(f):
    """Front-focal-plane to back-focal-plane (2f) system."""
    return ((0.0, f), (-1.0 / f, 0.0))


def ghost_image_profile(slit: SlitAperture, psf_sd: float, grid=None):
    """Ghost image of ``slit`` blurred by a Gaussian PSF of SD ``psf_sd``.

    Numerically convolves the binary slit transmission with the PSF on
    ``grid`` (default: a fine grid whose pitch divides the slit width).

    Returns
    -------
    profile : Profile
        Normalized intensity on the grid.
    sd : float
        SD of the profile.
    """
    if not psf_sd > 0:
        raise InvalidParameterError(f"psf_sd must be positive, got {psf_sd!r}")
    d = slit.width_d
    if grid is None:
        cells = max(256, math.ceil(64 * d / min(d, psf_sd)))
        dx = d / cells
        half = math.ceil((d / 2 + 8 * psf_sd) / dx)
        # cell centres, symmetric about the slit centre
        x = slit.center + dx * (np.arange(-half, half) + 0.5)
    else:
        x0, dx, count = grid
        x = x0 + dx * np.arange(count)
    rect = (np.abs(x - slit.center) < d / 2).astype(float)
    kern_half = math.ceil(8 * psf_sd / dx)
    kx = dx * np.arange(-kern_half, kern_half + 1)
    psf = np.exp(-0.5 * (kx / psf_sd) ** 2)
    conv = fftconvolve(rect, psf, mode="same")
    conv = np.clip(conv, 0, None)
    conv /= conv.sum() * dx
    _, sd = weighted_moments(x, conv)
    return Profile(x, conv), sd


def sd_of_uniform_slit(d):
    """SD of a uniform distribution of full width ``d``."""
    if not d > 0:
        raise InvalidParameterError(f"d must be positive, got {d!r}")
    return d / math.sqrt(12)
