"""Tour of the map layer: building expanding circle maps, reading off their
analytic bounds, and measuring how close two maps are.

Every map here is a finite list of monotone branches on arcs tiling [0, 1).
The analyzer reports the expansion range, the coefficient controlling
variation growth under the transfer operator, the Lipschitz bound for
log|f'|, and the genuine discontinuity set.
"""

import math

from circlemix import (affine_map, analyze, doubling_map,
                       neighborhood_distance, sine_map, slope25_map,
                       slope3_two_branch, two_slope_wrap_map)

maps = {
    "doubling (2x mod 1)": doubling_map(),
    "2.5x mod 1, natural branches": slope25_map(),
    "3x mod 1, two branches": slope3_two_branch(),
    "two-slope wrap": two_slope_wrap_map(),
    "2x + 0.05 sin(2 pi x)": sine_map(2.0, 0.05),
}

print("=== analytic bounds ===")
for name, m in maps.items():
    an = analyze(m)
    omega = ", ".join(f"{x:.3f}" for x in an.omega) or "none"
    print(f"{name:34s} inf|f'|={an.lambda_min:.4f} sup|f'|={an.M0:.4f} "
          f"A={an.A:.4f} C1={an.C1:.4f} jumps: {omega}")

# The doubling map evaluated pointwise, with its two preimages of 0.5.
m = doubling_map()
print("\nf(0.3) =", m.eval(0.3))
print("preimages of 0.5:", m.inverse_branches(0.5))

# How far is a sine perturbation from the plain slope-3 map?  The distance
# combines mark shifts with grid sup-norms of the reparametrized difference
# and its first two derivatives, so the sine amplitude enters with weight
# 1 + 2 pi + 4 pi^2 ~ 46.8.
g = slope3_two_branch()
print("\n=== neighborhood radii around 3x mod 1 ===")
for amp in (1e-4, 5e-4, 1e-3, 2e-3):
    f = sine_map(3.0, amp)
    print(f"amplitude {amp:.0e}: distance {neighborhood_distance(f, g):.5f}")

# Maps with different branch counts are incomparable.
print("\n2.5x vs doubling:", neighborhood_distance(slope25_map(), doubling_map()))

# An offset shifts the natural marks; the distance picks up both the shift
# and the stretching of the reparametrization.
print("2.5x + 0.01 vs 2.5x:",
      neighborhood_distance(affine_map(2.5, 0.01), slope25_map()))
assert math.isinf(neighborhood_distance(slope25_map(), doubling_map()))
