"""
Where does the near field end?
==============================

A 64-element sectored circular array at 3.5 GHz, and the distances over
which a spherical wavefront still looks curved across it.
"""
import math

import numpy as np

from nfpos import geometry

arr = geometry.ArrayConfig.uca(64, radius=1.0, frequency=3.5e9)
print(f"wavelength {arr.wavelength:.4f} m, aperture {arr.aperture:.2f} m")

# %%
# The radiating near field sits between two distances set by the
# aperture D and the wavelength. Users between 2 and 10 m are inside it.
b = geometry.fresnel_bounds(arr.aperture, arr.wavelength)
print(f"near-field region {b.lower:.3f} m .. {b.upper:.3f} m")

# doubling the aperture pushes the far edge out fourfold
for D in (0.5, 1.0, 2.0, 4.0):
    b = geometry.fresnel_bounds(D, arr.wavelength)
    print(f"  D={D:4.1f} m  {b.lower:7.3f} .. {b.upper:8.3f} m")

# %%
# Element layout: 64 points on a 60 degree arc starting at 30 degrees.
layout = geometry.build_layout(arr)
deg = np.degrees(layout.angles)
print(f"first/last element at {deg[0]:.1f} / {deg[-1]:.1f} deg, step {deg[1] - deg[0]:.3f} deg")

# %%
# For a linear array the extra path to element n is close to
# -x cos(eta) + x^2 sin^2(eta) / 2r with x = n * spacing. The quadratic
# term is what makes the wavefront curved; it fades as r grows.
# Element 16 sits 0.69 m out, so even r = 2 m is a fair test.
spacing = arr.wavelength / 2
eta = math.radians(60)
print(f"{'r (m)':>6} {'exact (mm)':>11} {'taylor (mm)':>12} {'plane (mm)':>11}")
for r in (2.0, 5.0, 10.0, 50.0):
    n = 16
    exact = geometry.ula_path_difference_exact(r, eta, n, spacing)
    taylor = geometry.ula_path_difference_taylor(r, eta, n, spacing)
    plane = -n * spacing * math.cos(eta)
    print(f"{r:6.1f} {1e3 * exact:11.3f} {1e3 * taylor:12.3f} {1e3 * plane:11.3f}")

# %%
# The expansion is trustworthy while (N*spacing/r)^2 stays under about 41.6/N.
for N in (64, 256, 1000):
    r = geometry.fresnel_bounds(N * spacing / 2, arr.wavelength).lower
    ratio = geometry.near_field_ratio(N, spacing, r)
    print(f"N={N:5d}: ratio at the near edge {ratio:.5f}, limit {geometry.near_field_ratio_limit(N):.5f}")
