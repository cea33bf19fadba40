"""
Slice tokens and the temporal block
===================================

Per-point features are max-pooled within each time slice into K tokens.
The residual block then mixes neighbouring slices; with zero weights it
returns its input untouched.
"""

import numpy as np

from evpose.events import TimeWindow, synth_events
from evpose.micronet import MicroNetParams, normalize_points, pointwise_features
from evpose.raster import rasterize, sample_points, to_point_cloud
from evpose.temporal import EtscParams, es_seq, etsc_forward, temporal_global

events = synth_events("two_blobs", rate=7500 / 0.13, duration_us=130_000, seed=2)
cloud = to_point_cloud(rasterize(events, TimeWindow(0, 130_000), 346, 260, K=4))
cloud = sample_points(cloud, 2048, seed=2)
print("points per slice:", np.bincount(cloud.slice_id, minlength=4))

params = MicroNetParams.init(seed=2)
feat = pointwise_features(normalize_points(cloud), params)
tokens = es_seq(feat, cloud.slice_id, K=4)
print("tokens", tokens.shape, "first channels:\n", np.round(tokens[:, :4], 3))

refined = etsc_forward(tokens, EtscParams.init(64, seed=3))
print("refined first channels:\n", np.round(refined[:, :4], 3))
print("identity with zero weights:", np.array_equal(etsc_forward(tokens, EtscParams.zeros(64)), tokens))
print("t_global first channels:", np.round(temporal_global(refined)[:4], 3))
