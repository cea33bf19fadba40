"""Voxel-grid accumulation of events and export to 5-D raster point clouds.

A window ``[t_start, t_end)`` is split into ``K`` equal sub-segments. Per
(slice, y, x) cell we keep the integer sum of timestamps (relative to
``t_start``), the signed polarity sum and the event count. Each non-empty
cell becomes one point ``(x, y, t_avg, p_acc, e_cnt)`` where ``t_avg`` is
the mean timestamp normalized by the full window length.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .events import EventStream, TimeWindow

CLOUD_HEADER = "x,y,t_avg,p_acc,e_cnt"


@dataclass(frozen=True)
class VoxelGrid:
    """Per-cell accumulators, each shaped ``(K, height, width)``.

    ``p_acc`` is int64 straight out of :func:`rasterize` and float64 once
    edge enhancement has modulated it.
    """

    t_sum: np.ndarray
    p_acc: np.ndarray
    e_cnt: np.ndarray
    window: TimeWindow

    @property
    def K(self) -> int:
        return self.e_cnt.shape[0]

    @property
    def height(self) -> int:
        return self.e_cnt.shape[1]

    @property
    def width(self) -> int:
        return self.e_cnt.shape[2]

    def equals(self, other: "VoxelGrid") -> bool:
        return (
            self.window == other.window
            and np.array_equal(self.t_sum, other.t_sum)
            and np.array_equal(self.p_acc, other.p_acc)
            and np.array_equal(self.e_cnt, other.e_cnt)
        )


@dataclass(frozen=True)
class RasterCloud:
    """Column-wise point cloud. ``slice_id`` records each point's sub-segment."""

    x: np.ndarray
    y: np.ndarray
    t_avg: np.ndarray
    p_acc: np.ndarray
    e_cnt: np.ndarray
    slice_id: np.ndarray
    width: int
    height: int
    K: int
    window: TimeWindow | None = field(default=None)

    def __len__(self) -> int:
        return len(self.x)

    def take(self, idx) -> "RasterCloud":
        return replace(
            self,
            x=self.x[idx], y=self.y[idx], t_avg=self.t_avg[idx],
            p_acc=self.p_acc[idx], e_cnt=self.e_cnt[idx], slice_id=self.slice_id[idx],
        )

    def as_array(self) -> np.ndarray:
        """``(N, 5)`` float64 array of ``x, y, t_avg, p_acc, e_cnt``."""
        return np.column_stack([self.x, self.y, self.t_avg, self.p_acc, self.e_cnt]).astype(np.float64)


def slice_index(t, window: TimeWindow, K: int) -> np.ndarray:
    """Clamped sub-segment index of absolute timestamps ``t`` (exact integer math)."""
    rel = np.asarray(t, dtype=np.int64) - window.t_start
    return np.minimum((K * rel) // window.length, K - 1)


def rasterize(events: EventStream, window: TimeWindow, width: int, height: int, K: int) -> VoxelGrid:
    if K < 1:
        raise ValueError("K must be >= 1")
    t = events.t
    if len(t) and (t[0] < window.t_start or t[-1] >= window.t_end):
        raise ValueError(
            f"events span [{t[0]}, {t[-1]}] not inside window [{window.t_start}, {window.t_end})"
        )
    if len(t) and (events.x.max() >= width or events.y.max() >= height):
        raise ValueError("event coordinates exceed grid size")
    rel = t - window.t_start
    s = np.minimum((K * rel) // window.length, K - 1)
    flat = (s * height + events.y) * width + events.x

    size = K * height * width
    t_sum = np.zeros(size, np.int64)
    p_acc = np.zeros(size, np.int64)
    e_cnt = np.zeros(size, np.int64)
    np.add.at(t_sum, flat, rel)
    np.add.at(p_acc, flat, events.p.astype(np.int64))
    np.add.at(e_cnt, flat, 1)
    shape = (K, height, width)
    return VoxelGrid(t_sum.reshape(shape), p_acc.reshape(shape), e_cnt.reshape(shape), window)


def to_point_cloud(grid: VoxelGrid) -> RasterCloud:
    flat = np.flatnonzero(grid.e_cnt)
    s, rem = np.divmod(flat, grid.height * grid.width)
    y, x = np.divmod(rem, grid.width)
    cnt = grid.e_cnt.reshape(-1)[flat]
    t_avg = grid.t_sum.reshape(-1)[flat] / cnt / grid.window.length
    t_avg = _snap_to_slice(t_avg, s, grid.K)
    p = grid.p_acc.reshape(-1)[flat].astype(np.float64)
    return RasterCloud(x, y, t_avg, p, cnt, s, grid.width, grid.height, grid.K, grid.window)


def _snap_to_slice(t_avg: np.ndarray, s: np.ndarray, K: int) -> np.ndarray:
    # The exact mean lies inside slice s; float rounding can push floor(t_avg*K)
    # across a boundary. Step by ulps until the slice is recovered.
    for _ in range(8):
        got = np.minimum(np.floor(t_avg * K), K - 1)
        hi, lo = got > s, got < s
        if not (hi.any() or lo.any()):
            break
        t_avg = np.where(hi, np.nextafter(t_avg, -np.inf), t_avg)
        t_avg = np.where(lo, np.nextafter(t_avg, np.inf), t_avg)
    return t_avg


def sample_points(cloud: RasterCloud, n: int, seed=None) -> RasterCloud:
    """Fixed-size subset: without replacement when enough points exist,
    otherwise all points plus extra draws with replacement.

    Selected indices are returned in ascending order so the slice-major
    point order survives sampling.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    N = len(cloud)
    if N == 0:
        raise ValueError("cannot sample from an empty cloud")
    rng = np.random.default_rng(seed)
    if N >= n:
        idx = np.sort(rng.choice(N, size=n, replace=False))
    else:
        idx = np.sort(np.concatenate([np.arange(N), rng.integers(0, N, n - N)]))
    return cloud.take(idx)


def cloud_to_csv(cloud: RasterCloud) -> str:
    lines = [CLOUD_HEADER]
    for x, y, t, p, e in zip(cloud.x.tolist(), cloud.y.tolist(), cloud.t_avg.tolist(),
                             cloud.p_acc.tolist(), cloud.e_cnt.tolist()):
        lines.append(f"{x},{y},{t:.9g},{p:.17g},{e}")
    return "\n".join(lines) + "\n"


def cloud_from_csv(text: str, width: int, height: int, K: int) -> RasterCloud:
    """Inverse of :func:`cloud_to_csv`; slice ids are recovered from ``t_avg``."""
    from .temporal import slice_assign

    rows = [ln for ln in text.splitlines() if ln.strip()]
    if not rows or rows[0].replace(" ", "") != CLOUD_HEADER:
        raise ValueError(f"cloud CSV must start with header {CLOUD_HEADER!r}")
    if len(rows) == 1:
        data = np.zeros((0, 5))
    else:
        try:
            data = np.array([[float(v) for v in r.split(",")] for r in rows[1:]])
        except ValueError as exc:
            raise ValueError(f"malformed cloud row: {exc}") from None
        if data.shape[1] != 5:
            raise ValueError("cloud rows need 5 fields")
    t_avg = data[:, 2]
    return RasterCloud(
        x=data[:, 0].astype(np.int64), y=data[:, 1].astype(np.int64), t_avg=t_avg,
        p_acc=data[:, 3], e_cnt=data[:, 4].astype(np.int64),
        slice_id=slice_assign(t_avg, K), width=width, height=height, K=K,
    )
