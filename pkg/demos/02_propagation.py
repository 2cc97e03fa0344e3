"""Sampled-field propagation of photon B's conditional state.

Free-space Fresnel propagation spreads the conditional beam by the Gaussian
beam law; a lens maps it to wavevector space at its focal plane.
"""

# %%
from ghostslit import reference_state
from ghostslit.analysis import fit_beam_widths
from ghostslit.biphoton import conditional_position_pdf
from ghostslit.optics import (
    abcd_intensity_sd,
    beam_width,
    discretize_conditional,
    focal_to_wavevector,
    free_space_abcd,
    fresnel_propagate,
    lens_farfield,
    make_grid,
    rayleigh_range,
)

state = reference_state()
sd0 = conditional_position_pdf(state, 0.0).sd
lam = state.signal_wavelength
zR = rayleigh_range(sd0, lam)
field = discretize_conditional(state, 0.0, make_grid(0.0, sd0, sd0))
print(f"conditional sd {sd0:.4f} um on {field.n} samples, Rayleigh range {zR:.1f} um")

# %% Widths at the scan planes, next to the beam law and the ABCD result.
points = []
for z_mm in (0, 5, 10, 20, 40):
    z = 1000.0 * z_mm
    out = fresnel_propagate(field, z)
    _, sd = out.moments()
    points.append((z, sd, 0.0))
    print(f"z = {z_mm:2d} mm: FFT {sd:8.3f} um   law {beam_width(sd0, zR, z):8.3f}   "
          f"ABCD {abcd_intensity_sd(sd0, lam, free_space_abcd(z)):8.3f}   ({out.n} samples)")

fit = fit_beam_widths(points)
print(f"fitted a0 = {fit.a0:.4f} um, zR = {fit.zR:.1f} um")

# %% Lens focal plane: the focal-plane width converts to a wavevector width.
f = 75_000.0
far = lens_farfield(field, f)
_, sd_f = far.moments()
sd_k = focal_to_wavevector(sd_f, f, lam)
print(f"focal plane sd {sd_f:.1f} um -> {sd_k:.5f}/um; sd * sd_k = {sd0 * sd_k:.4f} hbar")
