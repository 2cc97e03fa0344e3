"""Two-photon state of the reference source and its conditional widths.

Run with ``python3 demos/01_biphoton_state.py``.
"""

# %%
import numpy as np

from ghostslit import reference_state
from ghostslit.biphoton import (
    CrystalSpec,
    conditional_momentum_pdf,
    conditional_position_pdf,
    phase_matching_gaussian,
    phase_matching_sinc,
    sigma_q_from_crystal,
    singles_pdfs,
    uncertainty_product,
)

# %% The separation width follows from the crystal length and pump wavelength.
crystal = CrystalSpec(3000.0, 0.355)
state = reference_state()
print(f"sigma_q = {sigma_q_from_crystal(crystal):.4f} um, sigma_p = {state.sigma_p:.0f} um")
print(f"sigma_p / sigma_q = {state.sigma_p / state.sigma_q:.1f}  (EPR regime: {state.epr_regime})")

# %% The sinc phase-matching function and its Gaussian stand-in.
k = np.linspace(0, 0.3, 7)
for ki, s, g in zip(k, phase_matching_sinc(crystal, k), phase_matching_gaussian(crystal, k)):
    print(f"  k = {ki:4.2f}/um   sinc {s:+.3f}   gaussian {g:.3f}")

# %% Photon B given photon A at xA: narrow in position, and its momentum spread
# is exactly the Fourier partner of that width.
for xA in (0.0, 100.0, -250.0):
    x = conditional_position_pdf(state, xA)
    kk = conditional_momentum_pdf(state, xA)
    print(f"xA = {xA:7.1f} um: mean {x.mean:8.3f} um, sd {x.sd:.4f} um, sd_k {kk.sd:.5f}/um, "
          f"product {uncertainty_product(state, xA):.3f} hbar")

# %% Without conditioning both marginals are broad.
pos, mom = singles_pdfs(state)
print(f"singles: sd {pos.sd:.2f} um, sd_k {mom.sd:.5f}/um, product {pos.sd * mom.sd:.2f} hbar")
