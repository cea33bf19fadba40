"""
Rasterizing a moving bar
========================

A one-pixel bar sweeps left to right. Rasterizing one window into four
time slices puts each slice's events on a different band of columns.
"""

import numpy as np

from evpose.events import TimeWindow, synth_events
from evpose.raster import rasterize, to_point_cloud

duration = 400_000
events = synth_events("moving_bar", rate=50_000, duration_us=duration, seed=0, width=40, height=8)
print(f"{len(events)} events, t from {events.t[0]} to {events.t[-1]} us")

grid = rasterize(events, TimeWindow(0, duration), 40, 8, K=4)

# one row of the count map per slice; the bar shows up as a block of columns
for k in range(grid.K):
    cols = np.flatnonzero(grid.e_cnt[k].sum(axis=0))
    print(f"slice {k}: columns {cols.min()}..{cols.max()}")

cloud = to_point_cloud(grid)
print(f"{len(cloud)} points, {cloud.e_cnt.sum()} events accounted for")
print("first points (x, y, t_avg, p_acc, e_cnt):")
with np.printoptions(suppress=True, precision=3):
    print(cloud.as_array()[:5])
