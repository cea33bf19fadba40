"""
Forward pass and coordinate decoding
====================================

A randomly initialized backbone maps a 2048-point cloud to per-joint x
and y logits. The weights are untrained, so the decoded joints are
arbitrary; what matters is shape, determinism and order invariance.
"""

import numpy as np

from evpose.events import TimeWindow, synth_events
from evpose.micronet import DHP19_JOINTS, MicroNetParams, forward, simdr_decode
from evpose.raster import rasterize, sample_points, to_point_cloud
from evpose.temporal import EtscParams

events = synth_events("two_blobs", rate=7500 / 0.13, duration_us=130_000, seed=4)
cloud = sample_points(to_point_cloud(rasterize(events, TimeWindow(0, 130_000), 346, 260, 4)), 2048, seed=4)

params, etsc = MicroNetParams.init(seed=4), EtscParams.init(64, seed=5)
logits = forward(cloud, params, etsc)
print("logits", logits.x.shape, logits.y.shape)

hard = simdr_decode(logits, 346, 260)
soft = simdr_decode(logits, 346, 260, soft=True)
for name, (u, v), (su, sv) in zip(DHP19_JOINTS[:4], hard.uv, soft.uv):
    print(f"{name:<11} argmax ({u:5.1f}, {v:5.1f})   expectation ({su:6.1f}, {sv:6.1f})")

shuffled = cloud.take(np.random.default_rng(0).permutation(len(cloud)))
print("bit-identical after shuffling:", np.array_equal(forward(shuffled, params, etsc).x, logits.x))
