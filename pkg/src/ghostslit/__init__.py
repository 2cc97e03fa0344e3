"""Simulation of ghost diffraction from a slit with SPDC photon pairs."""

from .biphoton import (
    BiphotonState,
    CrystalSpec,
    GaussianPdf,
    PumpSpec,
    build_state,
    conditional_momentum_pdf,
    conditional_position_pdf,
    joint_momentum_amplitude,
    joint_position_amplitude,
    phase_matching_sinc,
    sigma_q_from_crystal,
    singles_pdfs,
    uncertainty_product,
)
from .histogram import DetectionHistogram
from .optics import (
    ComplexField,
    PropagationSpec,
    SlitAperture,
    apply_slit,
    beam_width,
    discretize_conditional,
    fresnel_propagate,
    ghost_image_profile,
    lens_farfield,
    rayleigh_range,
    sd_of_uniform_slit,
)
from .analysis import build_uncertainty_report, estimate_sd_ci, fit_beam_widths, fit_gaussian
from .montecarlo import ExperimentConfig, no_signaling_audit, run_plane, sample_pairs, scan_z, synthesize_frame

__version__ = "0.1.0"


def reference_state() -> BiphotonState:
    """Source of the reference experiment: 3 mm crystal, 355 nm pump, 450 um pump width."""
    return build_state(CrystalSpec(3000.0, 0.355), PumpSpec(450.0))
