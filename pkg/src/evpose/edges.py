"""Sobel edge enhancement of accumulated polarity in the voxel-grid domain.

Per slice: Sobel gradients of the event-count map, edge magnitude,
normalization by the slice maximum, then ``p_acc *= 1 + alpha * E_norm``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .raster import RasterCloud, VoxelGrid

SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)
SOBEL_Y = SOBEL_X.T.copy()


@dataclass(frozen=True)
class EdgeParams:
    alpha: float = 0.5
    epsilon: float = 1e-8

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")


def sobel_gradients(count_map: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cross-correlate with the 3x3 Sobel kernels, zero-padded, same-size output.

    Works on a single ``(H, W)`` map or a stack ``(..., H, W)``; the last
    two axes are the image. Implemented separably: ``[1, 2, 1]`` smoothing
    on one axis and ``[-1, 0, 1]`` differencing on the other.
    """
    a = np.asarray(count_map)
    if a.ndim < 2 or 0 in a.shape[-2:]:
        raise ValueError("count map must be at least 1x1")
    H, W = a.shape[-2:]
    z = np.zeros(a.shape[:-2] + (H + 2, W + 2), np.float64)
    z[..., 1:-1, 1:-1] = a
    # x: smooth along y, then difference along x
    sy = z[..., :-2, :] + z[..., 2:, :]
    sy += z[..., 1:-1, :]
    sy += z[..., 1:-1, :]
    gx = sy[..., 2:] - sy[..., :-2]
    sx = z[..., :, :-2] + z[..., :, 2:]
    sx += z[..., :, 1:-1]
    sx += z[..., :, 1:-1]
    gy = sx[..., 2:, :] - sx[..., :-2, :]
    return gx, gy


def edge_magnitude(gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    if np.shape(gx) != np.shape(gy):
        raise ValueError("gradient shapes differ")
    return np.sqrt(np.square(gx) + np.square(gy))


def normalize_edges(E: np.ndarray, epsilon: float = 1e-8) -> np.ndarray:
    """Divide by ``max + epsilon``, the max taken over the last two axes."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    E = np.asarray(E, dtype=np.float64)
    m = E.max(axis=(-2, -1), keepdims=True)
    return E / (m + epsilon)


def _edge_crop(e_cnt: np.ndarray, epsilon: float):
    """Normalized edge magnitude restricted to the non-zero bounding box.

    The box is grown by one pixel. With zero padding every response outside
    it is exactly zero, and so the per-slice maximum is unchanged, so the
    crop carries the whole result. Returns ``(rows, cols, E_norm)`` or None
    for an all-zero stack.
    """
    occupied = e_cnt.any(axis=0)
    rows = np.flatnonzero(occupied.any(axis=1))
    if len(rows) == 0:
        return None
    cols = np.flatnonzero(occupied.any(axis=0))
    H, W = e_cnt.shape[-2:]
    r = slice(max(rows[0] - 1, 0), min(rows[-1] + 2, H))
    c = slice(max(cols[0] - 1, 0), min(cols[-1] + 2, W))
    gx, gy = sobel_gradients(e_cnt[:, r, c])
    np.multiply(gx, gx, out=gx)
    np.multiply(gy, gy, out=gy)
    gx += gy
    E = np.sqrt(gx, out=gx)
    E /= E.max(axis=(-2, -1), keepdims=True) + epsilon
    return r, c, E


def edge_map(e_cnt: np.ndarray, epsilon: float = 1e-8) -> np.ndarray:
    """Normalized edge magnitude for each slice of a ``(K, H, W)`` count stack."""
    e_cnt = np.asarray(e_cnt)
    out = np.zeros(e_cnt.shape, np.float64)
    crop = _edge_crop(e_cnt, epsilon)
    if crop is not None:
        r, c, E = crop
        out[:, r, c] = E
    return out


def enhance(grid: VoxelGrid, params: EdgeParams = EdgeParams()) -> VoxelGrid:
    """Return a grid whose ``p_acc`` is scaled by ``1 + alpha * E_norm``."""
    p = grid.p_acc.astype(np.float64)
    crop = _edge_crop(grid.e_cnt, params.epsilon)
    if crop is not None:
        r, c, E = crop
        E *= params.alpha
        E += 1.0
        p[:, r, c] *= E
    return replace(grid, p_acc=p)


def enhance_cloud(cloud: RasterCloud, params: EdgeParams = EdgeParams()) -> RasterCloud:
    """Same modulation applied to an exported cloud.

    The count maps are rebuilt from the points (one per non-empty cell), so
    the result matches ``to_point_cloud(enhance(grid))``.
    """
    counts = np.zeros((cloud.K, cloud.height, cloud.width), np.float64)
    counts[cloud.slice_id, cloud.y, cloud.x] = cloud.e_cnt
    emap = edge_map(counts, params.epsilon)
    w = 1.0 + params.alpha * emap[cloud.slice_id, cloud.y, cloud.x]
    return replace(cloud, p_acc=w * cloud.p_acc)
