"""Monte Carlo ghost slit: coincidences versus singles in both planes.

Photon A passes a 10 um slit; photon B is recorded at the slit's image
plane and at the focal plane of a 75 mm lens. Prints the widths that a
plot of the two detection planes would show and writes nothing.
"""

# %%
import math

from ghostslit import reference_state
from ghostslit.analysis import build_uncertainty_report, estimate_sd_ci, fit_gaussian
from ghostslit.montecarlo import ExperimentConfig, run_plane, scan_z
from ghostslit.optics import PropagationSpec, SlitAperture, ghost_image_profile

state = reference_state()
slit = SlitAperture(10.0)
near = PropagationSpec("free-space", z=0.0)
far = PropagationSpec("lens-fourier", f=75_000.0)


def run(plane, **kw):
    return run_plane(ExperimentConfig(state, slit, plane, n_pairs=10**6, seed=11, min_triggers=200_000, **kw))


# %% Near field: the coincidences image the slit, the singles do not.
res = run(near)
c, s = estimate_sd_ci(res.coincidence), estimate_sd_ci(res.all_singles)
_, oracle = ghost_image_profile(slit, state.sigma_q_eff)
print(f"{res.n_pairs} pairs, {res.n_triggers} triggers")
print(f"near field: coincidence sd {c.sd:.3f} +- {c.halfwidth:.3f} um (convolution {oracle:.3f}), singles {s.sd:.1f} um")
print(f"gaussian fit of the image: sd {fit_gaussian(res.coincidence).sd:.3f} um")

# %% Far field: no extra spread from the slit.
res_far = run(far)
ck, sk = estimate_sd_ci(res_far.coincidence), estimate_sd_ci(res_far.all_singles)
print(f"far field: coincidence sd_k {ck.sd:.5f}/um, singles {sk.sd:.5f}/um, ratio {ck.sd / sk.sd:.4f}")

# %% Conditional product from the two planes.
rep = build_uncertainty_report((c.sd, c.halfwidth), (ck.sd, ck.halfwidth))
print(f"product {rep.product_hbar:.3f} hbar, 95% CI {rep.ci95[0]:.3f}..{rep.ci95[1]:.3f}")

# %% An imperfect imaging system: Gaussian blur on the recorded coincidences.
blur = math.sqrt(19.0**2 - c.sd**2)
b = estimate_sd_ci(run(near, blur_sd=blur).coincidence)
rep_b = build_uncertainty_report((b.sd, b.halfwidth), (0.046, 0.006))
print(f"blur {blur:.2f} um: image {b.sd:.2f} um, product with 0.046/um -> {rep_b.product_hbar:.2f} hbar")

# %% Widths versus distance behind the slit plane.
for row in scan_z(ExperimentConfig(state, slit, near, n_pairs=10**6, seed=11, min_triggers=50_000),
                  [0.0, 10_000.0, 20_000.0, 30_000.0, 40_000.0]):
    print(f"z = {row.z / 1000:4.0f} mm: conditional {row.cond_sd:7.2f} um, singles {row.singles_sd:7.2f} um, "
          f"ratio {row.cond_sd / row.singles_sd:.3f}")
