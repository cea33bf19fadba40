import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evpose.events import EventStream, TimeWindow, synth_events
from evpose.raster import (
    VoxelGrid,
    cloud_from_csv,
    cloud_to_csv,
    rasterize,
    sample_points,
    slice_index,
    to_point_cloud,
)
from evpose.temporal import slice_assign
from oracles import rasterize_naive


def random_window(rng, n, width=20, height=15, length=None):
    length = length or int(rng.integers(1, 5000))
    t0 = int(rng.integers(0, 10**6))
    t = np.sort(rng.integers(t0, t0 + length, n))
    s = EventStream(rng.integers(0, width, n), rng.integers(0, height, n), t,
                    rng.choice([-1, 1], n), width, height)
    return s, TimeWindow(t0, t0 + length)


def test_two_events_same_pixel():
    w = TimeWindow(0, 1000)
    s = EventStream([3, 3], [4, 4], [200, 400], [1, -1], 10, 10)
    g = rasterize(s, w, 10, 10, K=1)
    c = to_point_cloud(g)
    assert len(c) == 1
    assert c.t_avg[0] == pytest.approx(0.3, abs=1e-15)
    assert c.p_acc[0] == 0 and c.e_cnt[0] == 2


def test_single_event():
    w = TimeWindow(100, 1100)
    s = EventStream([7], [2], [350], [-1], 10, 10)
    c = to_point_cloud(rasterize(s, w, 10, 10, K=4))
    assert (c.x[0], c.y[0], c.p_acc[0], c.e_cnt[0], c.slice_id[0]) == (7, 2, -1, 1, 1)
    assert c.t_avg[0] == 0.25


def test_matches_naive_oracle():
    rng = np.random.default_rng(11)
    s, w = random_window(rng, 500)
    g = rasterize(s, w, 20, 15, K=4)
    t_sum, p_acc, e_cnt = rasterize_naive(s.x, s.y, s.t, s.p, w.t_start, w.t_end, 20, 15, 4)
    assert np.array_equal(g.t_sum, t_sum)
    assert np.array_equal(g.p_acc, p_acc)
    assert np.array_equal(g.e_cnt, e_cnt)


def test_slice_boundaries():
    w = TimeWindow(0, 100)
    s = EventStream([0, 1, 2, 3], [0, 0, 0, 0], [24, 25, 75, 99], [1, 1, 1, 1], 4, 1)
    g = rasterize(s, w, 4, 1, K=4)
    assert g.e_cnt[0, 0, 0] == 1  # t=24 before first boundary
    assert g.e_cnt[1, 0, 1] == 1  # t=25 exactly on boundary -> later slice
    assert g.e_cnt[3, 0, 2] == 1
    assert g.e_cnt[3, 0, 3] == 1  # t_end - 1 -> last slice
    assert slice_index([0, 24, 25, 99], w, 4).tolist() == [0, 0, 1, 3]


def test_rejects_events_outside_window():
    s = EventStream([0], [0], [100], [1], 4, 4)
    with pytest.raises(ValueError, match="not inside"):
        rasterize(s, TimeWindow(0, 100), 4, 4, 2)
    with pytest.raises(ValueError):
        TimeWindow(5, 5)
    with pytest.raises(ValueError):
        rasterize(s, TimeWindow(0, 200), 4, 4, 0)


def test_empty_grid_gives_empty_cloud():
    c = to_point_cloud(rasterize(EventStream.empty(8, 8), TimeWindow(0, 10), 8, 8, 4))
    assert len(c) == 0


def test_one_nonzero_cell():
    z = np.zeros((2, 3, 4), np.int64)
    t_sum, p_acc, e_cnt = z.copy(), z.copy(), z.copy()
    t_sum[1, 2, 3], p_acc[1, 2, 3], e_cnt[1, 2, 3] = 150, 3, 3
    c = to_point_cloud(VoxelGrid(t_sum, p_acc, e_cnt, TimeWindow(0, 100)))
    assert len(c) == 1
    assert (c.x[0], c.y[0], c.slice_id[0], c.p_acc[0], c.e_cnt[0]) == (3, 2, 1, 3, 3)
    assert c.t_avg[0] == 0.5


def test_point_count_equals_nonzero_cells():
    rng = np.random.default_rng(5)
    s, w = random_window(rng, 800)
    g = rasterize(s, w, 20, 15, K=3)
    c = to_point_cloud(g)
    oracle = sum(1 for v in g.e_cnt.reshape(-1).tolist() if v > 0)
    assert len(c) == oracle


def test_point_order_slice_major_row_major():
    rng = np.random.default_rng(6)
    s, w = random_window(rng, 600)
    c = to_point_cloud(rasterize(s, w, 20, 15, K=4))
    keys = list(zip(c.slice_id.tolist(), c.y.tolist(), c.x.tolist()))
    assert keys == sorted(keys) and len(set(keys)) == len(keys)


@given(st.integers(0, 2**32 - 1), st.integers(1, 8), st.integers(0, 400))
@settings(max_examples=60, deadline=None)
def test_conservation_and_slice_recovery(seed, K, n):
    rng = np.random.default_rng(seed)
    s, w = random_window(rng, n)
    c = to_point_cloud(rasterize(s, w, 20, 15, K))
    assert c.e_cnt.sum() == n
    assert c.p_acc.sum() == s.p.sum()
    assert ((c.t_avg >= 0) & (c.t_avg <= 1)).all()
    assert (c.e_cnt >= np.abs(c.p_acc)).all()
    # normalized mean timestamp maps back to the rasterization slice
    assert np.array_equal(slice_assign(c.t_avg, K), c.slice_id)


def test_slice_recovery_near_boundaries():
    # many events crowded just below each boundary stress float rounding
    K, L = 7, 1_000_003
    t = np.concatenate([np.full(50, (k * L) // K - 1) for k in range(1, K + 1)])
    t = np.sort(np.concatenate([t, np.arange(K) * (L // K)]))
    n = len(t)
    s = EventStream(np.zeros(n), np.zeros(n), t, np.ones(n), 1, 1)
    c = to_point_cloud(rasterize(s, TimeWindow(0, L), 1, 1, K))
    assert np.array_equal(slice_assign(c.t_avg, K), c.slice_id)


# -- sampling ----------------------------------------------------------------

def _cloud_of(n, seed=0):
    rng = np.random.default_rng(seed)
    s = synth_events("random", n * 50, 1_000_000, seed=seed, width=200, height=200)
    c = to_point_cloud(rasterize(s, TimeWindow(0, 1_000_000), 200, 200, 4))
    return c.take(np.sort(rng.choice(len(c), n, replace=False)))


def _rows(c):
    return {tuple(r) for r in np.column_stack([c.slice_id, c.y, c.x]).tolist()}


def test_sample_identity_when_equal():
    c = _cloud_of(500)
    out = sample_points(c, 500, seed=1)
    assert _rows(out) == _rows(c) and len(out) == 500


def test_sample_without_replacement():
    c = _cloud_of(3000)
    out = sample_points(c, 2048, seed=1)
    assert len(out) == 2048 and len(_rows(out)) == 2048
    assert _rows(out) <= _rows(c)


def test_sample_pads_with_replacement():
    c = _cloud_of(100)
    out = sample_points(c, 2048, seed=1)
    assert len(out) == 2048 and _rows(out) == _rows(c)


def test_sample_deterministic_and_errors():
    c = _cloud_of(300)
    a, b = sample_points(c, 64, seed=9), sample_points(c, 64, seed=9)
    assert np.array_equal(a.as_array(), b.as_array())
    with pytest.raises(ValueError):
        sample_points(c, 0)
    with pytest.raises(ValueError):
        sample_points(c.take(np.arange(0)), 5)


# -- CSV export --------------------------------------------------------------

def test_cloud_csv_format():
    w = TimeWindow(0, 3)
    s = EventStream([1], [2], [1], [1], 4, 4)
    text = cloud_to_csv(to_point_cloud(rasterize(s, w, 4, 4, 1)))
    assert text == "x,y,t_avg,p_acc,e_cnt\n1,2,0.333333333,1,1\n"


def test_cloud_csv_round_trip():
    rng = np.random.default_rng(2)
    s, w = random_window(rng, 400)
    c = to_point_cloud(rasterize(s, w, 20, 15, 4))
    back = cloud_from_csv(cloud_to_csv(c), 20, 15, 4)
    assert np.array_equal(back.x, c.x) and np.array_equal(back.e_cnt, c.e_cnt)
    assert np.array_equal(back.p_acc, c.p_acc)
    np.testing.assert_allclose(back.t_avg, c.t_avg, rtol=1e-8)
    with pytest.raises(ValueError):
        cloud_from_csv("a,b\n", 20, 15, 4)
