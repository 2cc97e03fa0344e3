"""Closed-form model of the double-Gaussian SPDC biphoton state.

All lengths are in micrometres and transverse momenta are expressed as
wavevectors ``k = p / hbar`` in inverse micrometres, so uncertainty products
come out directly in units of hbar.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import EPRRegimeWarning, InvalidParameterError

#: sigma_p / sigma_q ratio above which the EPR-limit approximations are trusted.
EPR_RATIO = 10.0


def _require_positive(name, value):
    if not (np.isfinite(value) and value > 0):
        raise InvalidParameterError(f"{name} must be a positive finite number, got {value!r}")


@dataclass(frozen=True)
class CrystalSpec:
    """Nonlinear crystal and pump-wavelength parameters.

    Parameters
    ----------
    length_L : float
        Crystal thickness [um].
    pump_wavelength : float
        Vacuum pump wavelength [um].
    phase_mismatch_phi : float
        Dimensionless phase-mismatch offset inside the sinc.
    use_vacuum_wavevector : bool
        If True (default) the pump wavevector is ``2 pi / lambda``; otherwise
        ``refractive_index`` scales it.
    refractive_index : float
        Pump index inside the crystal; only used when
        ``use_vacuum_wavevector`` is False and must then exceed 1.
    """

    length_L: float
    pump_wavelength: float
    phase_mismatch_phi: float = 0.0
    use_vacuum_wavevector: bool = True
    refractive_index: float = 1.0

    def __post_init__(self):
        _require_positive("length_L", self.length_L)
        _require_positive("pump_wavelength", self.pump_wavelength)
        if not np.isfinite(self.phase_mismatch_phi):
            raise InvalidParameterError("phase_mismatch_phi must be finite")
        if not self.use_vacuum_wavevector and not self.refractive_index > 1:
            raise InvalidParameterError(
                f"refractive_index must exceed 1 when the vacuum wavevector is not used, "
                f"got {self.refractive_index!r}"
            )

    @property
    def pump_wavevector(self) -> float:
        n_eff = 1.0 if self.use_vacuum_wavevector else self.refractive_index
        return 2 * math.pi * n_eff / self.pump_wavelength


@dataclass(frozen=True)
class PumpSpec:
    """Collimated pump beam; ``sigma_p`` is its 1/e^2 intensity width [um]."""

    sigma_p: float

    def __post_init__(self):
        _require_positive("sigma_p", self.sigma_p)


@dataclass(frozen=True)
class GaussianPdf:
    """Normalized 1-D Gaussian probability density."""

    mean: float
    sd: float

    def __post_init__(self):
        if not self.sd > 0:
            raise InvalidParameterError(f"sd must be positive, got {self.sd!r}")

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        z = (x - self.mean) / self.sd
        return np.exp(-0.5 * z * z) / (self.sd * math.sqrt(2 * math.pi))


@dataclass(frozen=True)
class BiphotonState:
    """Double-Gaussian two-photon state.

    ``sigma_p`` sets the extent of the pair-centroid distribution and
    ``sigma_q`` the tightness of the position correlation. When
    ``aperture_broadening_ra`` is given, the correlation width used
    everywhere is ``sqrt(sigma_q**2 + ra**2)``.
    """

    sigma_p: float
    sigma_q: float
    signal_wavelength: float
    aperture_broadening_ra: Optional[float] = None
    sigma_q_eff: float = field(init=False, repr=False)

    def __post_init__(self):
        _require_positive("sigma_p", self.sigma_p)
        _require_positive("sigma_q", self.sigma_q)
        _require_positive("signal_wavelength", self.signal_wavelength)
        ra = self.aperture_broadening_ra
        if ra is not None and not (np.isfinite(ra) and ra >= 0):
            raise InvalidParameterError(f"aperture_broadening_ra must be >= 0, got {ra!r}")
        ra = 0.0 if ra is None else ra
        object.__setattr__(self, "sigma_q_eff", math.hypot(self.sigma_q, ra))

    @property
    def epr_regime(self) -> bool:
        """True when sigma_p / sigma_q_eff >= 10."""
        return self.sigma_p / self.sigma_q_eff >= EPR_RATIO

    @property
    def signal_wavevector(self) -> float:
        return 2 * math.pi / self.signal_wavelength


def sigma_q_from_crystal(crystal: CrystalSpec) -> float:
    """Position-correlation width ``sqrt(L / (2 k_p))`` of the crystal [um]."""
    return math.sqrt(crystal.length_L / (2 * crystal.pump_wavevector))


def build_state(crystal: CrystalSpec, pump: PumpSpec, r_a: Optional[float] = None) -> BiphotonState:
    """Assemble the degenerate biphoton state produced by ``crystal`` and ``pump``."""
    return BiphotonState(
        sigma_p=pump.sigma_p,
        sigma_q=sigma_q_from_crystal(crystal),
        signal_wavelength=2 * crystal.pump_wavelength,
        aperture_broadening_ra=r_a,
    )


def joint_position_amplitude(state: BiphotonState, xA, xB):
    """Joint amplitude ``Psi(xA, xB)`` normalized so that the 1-D double integral of ``|Psi|^2`` is 1."""
    sp, sq = state.sigma_p, state.sigma_q_eff
    xA = np.asarray(xA, dtype=float)
    xB = np.asarray(xB, dtype=float)
    norm = (math.pi * sp * sq) ** -0.5
    return norm * np.exp(-((xA + xB) ** 2) / (4 * sp**2) - (xA - xB) ** 2 / (4 * sq**2))


def joint_momentum_amplitude(state: BiphotonState, kA, kB):
    """Joint amplitude in transverse-wavevector space.

    This is the unitary 2-D Fourier transform of
    :func:`joint_position_amplitude` (Gaussian phase-matching approximation),
    real and positive everywhere.
    """
    sp, sq = state.sigma_p, state.sigma_q_eff
    kA = np.asarray(kA, dtype=float)
    kB = np.asarray(kB, dtype=float)
    norm = math.sqrt(sp * sq / math.pi)
    return norm * np.exp(-(sp**2) * (kA + kB) ** 2 / 4 - sq**2 * (kA - kB) ** 2 / 4)


def phase_matching_sinc(crystal: CrystalSpec, k):
    """Phase-matching envelope ``sinc(phi + L k^2 / k_p)`` with ``sinc(u) = sin(u)/u``."""
    k = np.asarray(k, dtype=float)
    u = crystal.phase_mismatch_phi + crystal.length_L * k**2 / crystal.pump_wavevector
    # np.sinc is the normalized sinc sin(pi x)/(pi x)
    return np.sinc(u / math.pi)


def phase_matching_gaussian(crystal: CrystalSpec, k):
    """Gaussian stand-in ``exp(-sigma_q^2 k^2)`` for :func:`phase_matching_sinc`."""
    sq = sigma_q_from_crystal(crystal)
    k = np.asarray(k, dtype=float)
    return np.exp(-(sq**2) * k**2)


def conditional_position_pdf(state: BiphotonState, xA: float) -> GaussianPdf:
    """Distribution of photon B's position given photon A was found at ``xA``.

    Exact conditional of ``|Psi|^2``; its width tends to ``sigma_q`` in the
    EPR limit.
    """
    sp2, sq2 = state.sigma_p**2, state.sigma_q_eff**2
    mean = xA * (sp2 - sq2) / (sp2 + sq2)
    sd = state.sigma_p * state.sigma_q_eff / math.sqrt(sp2 + sq2)
    return GaussianPdf(mean=float(mean), sd=sd)


def conditional_momentum_pdf(state: BiphotonState, xA: float) -> GaussianPdf:
    # The conditional amplitude is real, so its spectrum carries no tilt and
    # the position of xA only enters as a phase.
    sd_x = conditional_position_pdf(state, xA).sd
    return GaussianPdf(mean=0.0, sd=1.0 / (2.0 * sd_x))


def singles_pdfs(state: BiphotonState) -> tuple[GaussianPdf, GaussianPdf]:
    """Unconditioned (position, wavevector) marginals of photon B."""
    sp, sq = state.sigma_p, state.sigma_q_eff
    pos = GaussianPdf(0.0, 0.5 * math.hypot(sp, sq))
    mom = GaussianPdf(0.0, 0.5 * math.sqrt(1 / sp**2 + 1 / sq**2))
    return pos, mom


def uncertainty_product(state: BiphotonState, xA: float) -> float:
    """Conditional position-momentum uncertainty product of photon B in units of hbar."""
    return conditional_position_pdf(state, xA).sd * conditional_momentum_pdf(state, xA).sd


def epr_limit_conditional_sd(state: BiphotonState) -> float:
    """Conditional position SD in the sigma_p >> sigma_q limit, i.e. ``sigma_q``.

    Warns with :class:`EPRRegimeWarning` when the state is outside that regime.
    """
    if not state.epr_regime:
        warnings.warn(
            f"sigma_p/sigma_q = {state.sigma_p / state.sigma_q_eff:.3g} < {EPR_RATIO:g}; "
            "the EPR-limit width is not a good approximation",
            EPRRegimeWarning,
            stacklevel=2,
        )
    return state.sigma_q_eff
