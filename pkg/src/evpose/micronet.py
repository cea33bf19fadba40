"""Toy PointNet-style backbone with temporal fusion and SimDR-style heads.

Data path for one cloud::

    points (5, N) -> shared MLP 5->64->128->C (ReLU) -> feat (C, N)
    feat -> global max / mean over points             -> g_max, g_avg
    feat -> slice max-pool (K, C) -> ETSC -> mean     -> t_global
    [g_max; g_avg; t_global] (3C) -> linear head -> per-joint x/y logits

Every stage has a hand-written backward pass used by :mod:`evpose.gradcheck`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .raster import RasterCloud
from .temporal import (
    EtscParams,
    es_seq_with_argmax,
    etsc_backward,
    etsc_forward_cached,
    fuse,
    slice_assign,
    temporal_global,
)

NUM_JOINTS = 13
DHP19_JOINTS = (
    "head", "shoulder_r", "shoulder_l", "elbow_r", "elbow_l", "hip_l", "hip_r",
    "hand_r", "hand_l", "knee_r", "knee_l", "foot_r", "foot_l",
)
P_ACC_SCALE = 10.0


@dataclass(frozen=True)
class MicroNetParams:
    """Shared per-point MLP plus the linear SimDR head.

    ``layers`` is a list of ``(W, b)`` with ``W`` shaped ``(out, in)``.
    The head maps ``3C`` to ``J * (W_bins + H_bins)`` logits laid out joint
    by joint, x bins first.
    """

    layers: tuple
    head_w: np.ndarray
    head_b: np.ndarray
    J: int
    W_bins: int
    H_bins: int

    def __post_init__(self):
        fan_in = 5
        for i, (w, b) in enumerate(self.layers):
            if w.shape[1] != fan_in or b.shape != (w.shape[0],):
                raise ValueError(f"layer {i} shapes {w.shape}/{b.shape} do not chain from {fan_in}")
            fan_in = w.shape[0]
        n_out = self.J * (self.W_bins + self.H_bins)
        if self.head_w.shape != (n_out, 3 * fan_in) or self.head_b.shape != (n_out,):
            raise ValueError(
                f"head shapes {self.head_w.shape}/{self.head_b.shape}, expected "
                f"({n_out}, {3 * fan_in})/({n_out},)"
            )

    @property
    def channels(self) -> int:
        return self.layers[-1][0].shape[0]

    @classmethod
    def init(cls, seed=None, *, C=64, hidden=(64, 128), J=NUM_JOINTS, W_bins=346, H_bins=260,
             dtype=np.float64) -> "MicroNetParams":
        """Seeded uniform ``[-1/sqrt(fan_in), 1/sqrt(fan_in)]`` initialization."""
        rng = np.random.default_rng(seed)

        def dense(n_in, n_out):
            bound = 1.0 / np.sqrt(n_in)
            w = rng.uniform(-bound, bound, (n_out, n_in)).astype(dtype)
            b = rng.uniform(-bound, bound, n_out).astype(dtype)
            return w, b

        sizes = (5, *hidden, C)
        layers = tuple(dense(a, b) for a, b in zip(sizes[:-1], sizes[1:]))
        head_w, head_b = dense(3 * C, J * (W_bins + H_bins))
        return cls(layers, head_w, head_b, J, W_bins, H_bins)

    def astype(self, dtype) -> "MicroNetParams":
        return MicroNetParams(
            tuple((w.astype(dtype), b.astype(dtype)) for w, b in self.layers),
            self.head_w.astype(dtype), self.head_b.astype(dtype),
            self.J, self.W_bins, self.H_bins,
        )

    def arrays(self) -> dict[str, np.ndarray]:
        out = {}
        for i, (w, b) in enumerate(self.layers):
            out[f"mlp{i}.w"] = w
            out[f"mlp{i}.b"] = b
        out["head.w"] = self.head_w
        out["head.b"] = self.head_b
        return out

    @classmethod
    def from_arrays(cls, arrays: dict, J: int, W_bins: int, H_bins: int) -> "MicroNetParams":
        n = sum(1 for k in arrays if k.startswith("mlp") and k.endswith(".w"))
        layers = tuple((arrays[f"mlp{i}.w"], arrays[f"mlp{i}.b"]) for i in range(n))
        return cls(layers, arrays["head.w"], arrays["head.b"], J, W_bins, H_bins)


@dataclass(frozen=True)
class SimdrLogits:
    x: np.ndarray  # (J, W_bins)
    y: np.ndarray  # (J, H_bins)


@dataclass(frozen=True)
class Pose2D:
    uv: np.ndarray  # (J, 2) pixel coordinates
    valid: np.ndarray  # (J,) bool

    @classmethod
    def of(cls, uv, valid=None) -> "Pose2D":
        uv = np.asarray(uv, dtype=np.float64).reshape(-1, 2)
        valid = np.ones(len(uv), bool) if valid is None else np.asarray(valid, bool)
        return cls(uv, valid)


def normalize_points(cloud: RasterCloud) -> np.ndarray:
    """``(5, N)`` network input: x/width, y/height, t_avg, p_acc/10, log(1 + e_cnt)."""
    return np.vstack([
        cloud.x / cloud.width,
        cloud.y / cloud.height,
        cloud.t_avg,
        cloud.p_acc / P_ACC_SCALE,
        np.log1p(cloud.e_cnt),
    ]).astype(np.float64)


# -- per-point MLP -----------------------------------------------------------

def pointwise_features(X: np.ndarray, params: MicroNetParams) -> np.ndarray:
    """``(5, N)`` normalized points to ``(C, N)`` features; columns are independent."""
    return _mlp_forward(X, params)[0]


def _mlp_forward(X, params):
    X = np.asarray(X)
    if X.ndim != 2 or X.shape[0] != params.layers[0][0].shape[1]:
        raise ValueError(f"point matrix must be (5, N), got {X.shape}")
    acts = [X]
    pre = []
    h = X
    for w, b in params.layers:
        z = w @ h + b[:, None]
        h = np.maximum(z, 0.0)
        pre.append(z)
        acts.append(h)
    return h, (acts, pre)


def _mlp_backward(g, params, cache):
    acts, pre = cache
    grads = {}
    for i in range(len(params.layers) - 1, -1, -1):
        w, _ = params.layers[i]
        gz = g * (pre[i] > 0)
        grads[f"mlp{i}.w"] = gz @ acts[i].T
        grads[f"mlp{i}.b"] = gz.sum(axis=1)
        g = w.T @ gz
    return g, grads


def global_pool(feat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    feat = np.asarray(feat)
    if feat.ndim != 2 or feat.shape[1] < 1:
        raise ValueError("global pooling needs at least one point")
    return feat.max(axis=1), feat.mean(axis=1)


# -- full forward ------------------------------------------------------------

def canonical_order(X: np.ndarray) -> np.ndarray:
    """Lexicographic column order of the ``(5, N)`` input.

    Sorting first makes every reduction run in the same order for any
    permutation of the same points, so outputs are bitwise order-free.
    """
    return np.lexsort(X[::-1])


def forward_core(X, slice_id, params: MicroNetParams, etsc: EtscParams, K: int):
    """Flat logit vector for normalized points; also returns the backward cache."""
    feat, mlp_cache = _mlp_forward(X, params)
    N = feat.shape[1]
    if N < 1:
        raise ValueError("forward needs at least one point")
    arg_max = np.argmax(feat, axis=1)
    g_max = feat[np.arange(feat.shape[0]), arg_max]
    g_avg = feat.mean(axis=1)
    tokens, winners = es_seq_with_argmax(feat, slice_id, K)
    refined, etsc_cache = etsc_forward_cached(tokens, etsc)
    t_glob = temporal_global(refined)
    g_all = fuse(g_max, g_avg, t_glob)
    logits = params.head_w @ g_all + params.head_b
    cache = (mlp_cache, feat, arg_max, winners, etsc_cache, g_all, K)
    return logits, cache


def forward_backward(grad_logits, params: MicroNetParams, etsc: EtscParams, cache):
    """Gradients w.r.t. the ``(5, N)`` input, backbone/head params and ETSC params."""
    mlp_cache, feat, arg_max, winners, etsc_cache, g_all, K = cache
    C, N = feat.shape
    grads = {"head.w": np.outer(grad_logits, g_all), "head.b": grad_logits.copy()}
    g_fused = params.head_w.T @ grad_logits
    g_gmax, g_gavg, g_tglob = g_fused[:C], g_fused[C:2 * C], g_fused[2 * C:]

    g_refined = np.broadcast_to(g_tglob / K, (K, C))
    g_tokens, etsc_grads = etsc_backward(g_refined, etsc, etsc_cache)

    g_feat = np.broadcast_to((g_gavg / N)[:, None], (C, N)).copy()
    chan = np.arange(C)
    np.add.at(g_feat, (chan, arg_max), g_gmax)
    for s in range(K):
        hit = winners[s] >= 0
        np.add.at(g_feat, (chan[hit], winners[s][hit]), g_tokens[s][hit])

    g_X, mlp_grads = _mlp_backward(g_feat, params, mlp_cache)
    grads.update(mlp_grads)
    return g_X, grads, etsc_grads


def split_logits(flat: np.ndarray, params: MicroNetParams) -> SimdrLogits:
    per_joint = flat.reshape(params.J, params.W_bins + params.H_bins)
    return SimdrLogits(per_joint[:, :params.W_bins].copy(), per_joint[:, params.W_bins:].copy())


def forward(cloud: RasterCloud, params: MicroNetParams, etsc: EtscParams, K: int | None = None,
            *, dtype=np.float64) -> SimdrLogits:
    """Run the backbone on one (already sampled) cloud.

    Slice ids come from the points' ``t_avg``. ``dtype=np.float32`` runs
    the whole path in single precision.
    """
    K = cloud.K if K is None else K
    X = normalize_points(cloud)
    order = canonical_order(X)
    X = X[:, order]
    slice_id = slice_assign(X[2], K)
    if dtype != np.float64:
        X, params, etsc = X.astype(dtype), params.astype(dtype), etsc.astype(dtype)
    logits, _ = forward_core(X, slice_id, params, etsc, K)
    return split_logits(logits, params)


# -- decoding ----------------------------------------------------------------

def simdr_decode(logits: SimdrLogits, width: int, height: int, *, soft: bool = False) -> Pose2D:
    """Per-joint 1-D classification decode to pixel coordinates.

    Argmax mode picks the lowest index among ties; bin ``b`` maps to
    ``b * width / W_bins``. Soft mode takes the softmax expectation of the
    bin index instead.
    """
    lx, ly = np.asarray(logits.x, np.float64), np.asarray(logits.y, np.float64)
    if lx.shape[1] < 1 or ly.shape[1] < 1:
        raise ValueError("need at least one bin per axis")
    if not (np.isfinite(lx).all() and np.isfinite(ly).all()):
        raise ValueError("non-finite logits")
    if soft:
        bx, by = _soft_index(lx), _soft_index(ly)
    else:
        bx, by = np.argmax(lx, axis=1), np.argmax(ly, axis=1)
    u = bx * (width / lx.shape[1])
    v = by * (height / ly.shape[1])
    return Pose2D(np.column_stack([u, v]).astype(np.float64), np.ones(len(u), bool))


def _soft_index(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    prob = e / e.sum(axis=1, keepdims=True)
    return prob @ np.arange(logits.shape[1], dtype=np.float64)
