"""
From a user position to a network input
=======================================

One user, one spherical-wave channel, K noisy pilot snapshots, and the
2x64x64 covariance image the network actually sees.
"""
import math

import numpy as np

from nfpos import ArrayConfig, PolarPoint, build_layout, spherical_channel, synthesize_snapshots
from nfpos.features import LabelCodec, covariance_to_feature, csi_to_feature, sample_covariance

arr = ArrayConfig.uca(64, radius=1.0, frequency=3.5e9)
layout = build_layout(arr)
ue = PolarPoint(angle=math.radians(75), range=4.0)

h = spherical_channel(layout, ue, arr.wavelength)
# amplitude falls as 1/d, so the nearest elements are loudest
print(f"|h| ranges over {np.abs(h).min():.4f} .. {np.abs(h).max():.4f}")

# %%
# Snapshots at two noise levels. The SNR is set against the
# array-averaged received power.
for snr in (20.0, 0.0):
    S = synthesize_snapshots(h, K=100, snr_db=snr, seed=1, truth=ue)
    R = sample_covariance(S)
    ideal = np.outer(h, h.conj()) + S.noise.sigma2 * np.eye(64)
    err = np.linalg.norm(R - ideal) / np.linalg.norm(ideal)
    w = np.linalg.eigvalsh(R)[::-1]
    print(f"SNR {snr:4.0f} dB: sigma2={S.noise.sigma2:.2e}  |R - E[R]|/|E[R]| = {err:.3f}  "
          f"top eigenvalues {w[0]:.3f}, {w[1]:.4f}")

# %%
# The covariance image: real and imaginary planes scaled together so the
# largest entry is 1. The scale is kept so the matrix can be recovered.
S = synthesize_snapshots(h, K=100, snr_db=20.0, seed=1, truth=ue)
f = covariance_to_feature(sample_covariance(S))
print("feature", f.planes.shape, "scale", f"{f.scale:.4e}")
print("real plane symmetric:", np.array_equal(f.planes[0], f.planes[0].T))
print("imag plane antisymmetric:", np.array_equal(f.planes[1], -f.planes[1].T))

# the raw CSI alternative keeps every snapshot instead of averaging
c = csi_to_feature(S)
print("CSI feature", c.planes.shape)

# %%
# Labels are regressed in [0, 1]^2 and mapped back afterwards.
codec = LabelCodec(2.0, 10.0, math.radians(30), math.radians(150))
z = codec.encode(np.array([[ue.range, ue.angle]]))
print("normalized label", z[0], "->", codec.decode(z)[0])
