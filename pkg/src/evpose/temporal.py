"""Slice tokenization and the residual dilated temporal-convolution block.

Shapes follow the point-cloud convention used in the backbone: per-point
features are ``(C, N)``; slice tokens are ``(K, C)`` for one instance or
``(B, K, C)`` for a batch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KERNEL_SIZE = 3
DILATIONS = (1, 2)


def slice_assign(t_avg, K: int) -> np.ndarray:
    """``min(floor(t_avg * K), K - 1)`` for normalized timestamps in ``[0, 1]``."""
    if K < 1:
        raise ValueError("K must be >= 1")
    t_avg = np.asarray(t_avg, dtype=np.float64)
    if t_avg.size and not ((t_avg >= 0.0) & (t_avg <= 1.0)).all():
        raise ValueError("t_avg values must lie in [0, 1]")
    return np.minimum(np.floor(t_avg * K).astype(np.int64), K - 1)


def es_seq(feat: np.ndarray, slice_id: np.ndarray, K: int) -> np.ndarray:
    """Max-pool point features within each slice into a ``(K, C)`` token matrix.

    Slices without points get a zero token.
    """
    tokens, _ = es_seq_with_argmax(feat, slice_id, K)
    return tokens


def es_seq_with_argmax(feat, slice_id, K):
    """Tokens plus the winning point index per (slice, channel); -1 for empty slices."""
    feat = np.asarray(feat)
    C = feat.shape[0]
    if C < 1:
        raise ValueError("need at least one feature channel")
    tokens = np.zeros((K, C), feat.dtype)
    winners = np.full((K, C), -1, np.int64)
    for s in range(K):
        idx = np.flatnonzero(slice_id == s)
        if len(idx) == 0:
            continue
        sub = feat[:, idx]
        arg = np.argmax(sub, axis=1)
        winners[s] = idx[arg]
        tokens[s] = sub[np.arange(C), arg]
    return tokens, winners


@dataclass(frozen=True)
class EtscParams:
    """Two C->C 1-D convolutions over the slice axis (kernel 3, dilations 1 and 2).

    Weights are ``(C_out, C_in, 3)``; tap ``i`` reads offset ``(i - 1) * d``.
    """

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    kernel_size: int = KERNEL_SIZE
    dilations: tuple[int, int] = DILATIONS

    def __post_init__(self):
        C = self.channels
        for name, shape in (("w1", (C, C, self.kernel_size)), ("b1", (C,)),
                            ("w2", (C, C, self.kernel_size)), ("b2", (C,))):
            if getattr(self, name).shape != shape:
                raise ValueError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")

    @property
    def channels(self) -> int:
        return self.b1.shape[0]

    @classmethod
    def init(cls, C: int, seed=None, dtype=np.float64) -> "EtscParams":
        """Uniform in ``[-1/sqrt(fan_in), 1/sqrt(fan_in)]`` with ``fan_in = 3C``."""
        rng = np.random.default_rng(seed)
        bound = 1.0 / np.sqrt(C * KERNEL_SIZE)
        u = lambda *shape: rng.uniform(-bound, bound, shape).astype(dtype)
        return cls(u(C, C, KERNEL_SIZE), u(C), u(C, C, KERNEL_SIZE), u(C))

    @classmethod
    def zeros(cls, C: int, dtype=np.float64) -> "EtscParams":
        z = lambda *shape: np.zeros(shape, dtype)
        return cls(z(C, C, KERNEL_SIZE), z(C), z(C, C, KERNEL_SIZE), z(C))

    def astype(self, dtype) -> "EtscParams":
        return EtscParams(*(a.astype(dtype) for a in (self.w1, self.b1, self.w2, self.b2)))

    def arrays(self) -> dict[str, np.ndarray]:
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2}


def conv1d_same(x: np.ndarray, w: np.ndarray, b: np.ndarray, dilation: int) -> np.ndarray:
    """Centered, zero-padded dilated convolution (cross-correlation) along axis -2.

    ``x`` is ``(B, K, C_in)``, ``w`` is ``(C_out, C_in, k)``.
    """
    k = w.shape[2]
    half = (k - 1) // 2 * dilation
    K = x.shape[1]
    xp = np.pad(x, ((0, 0), (half, half), (0, 0)))
    y = np.broadcast_to(b, x.shape[:2] + (w.shape[0],)).copy()
    for i in range(k):
        y += xp[:, i * dilation:i * dilation + K, :] @ w[:, :, i].T
    return y


def _conv1d_same_backward(gy, x, w, dilation):
    k = w.shape[2]
    half = (k - 1) // 2 * dilation
    K = x.shape[1]
    xp = np.pad(x, ((0, 0), (half, half), (0, 0)))
    gxp = np.zeros_like(xp)
    gw = np.empty_like(w)
    for i in range(k):
        window = slice(i * dilation, i * dilation + K)
        gw[:, :, i] = np.einsum("bko,bkc->oc", gy, xp[:, window, :])
        gxp[:, window, :] += gy @ w[:, :, i]
    return gxp[:, half:half + K, :], gw, gy.sum(axis=(0, 1))


def _as_batch(T):
    T = np.asarray(T)
    if T.ndim == 2:
        return T[None], True
    if T.ndim == 3:
        return T, False
    raise ValueError(f"tokens must be (K, C) or (B, K, C), got shape {T.shape}")


def etsc_forward(T: np.ndarray, params: EtscParams) -> np.ndarray:
    """``T + conv_d2(relu(conv_d1(T)))``; output has the shape of ``T``."""
    out, _ = etsc_forward_cached(T, params)
    return out


def etsc_forward_cached(T, params: EtscParams):
    Tb, single = _as_batch(T)
    if Tb.shape[1] < 1:
        raise ValueError("need at least one slice")
    if Tb.shape[2] != params.channels:
        raise ValueError(f"tokens have {Tb.shape[2]} channels, params expect {params.channels}")
    d1, d2 = params.dilations
    z = conv1d_same(Tb, params.w1, params.b1, d1)
    h = np.maximum(z, 0.0)
    y = Tb + conv1d_same(h, params.w2, params.b2, d2)
    cache = (Tb, z, h, single)
    return (y[0] if single else y), cache


def etsc_backward(grad_out, params: EtscParams, cache):
    """Gradients of a scalar loss w.r.t. the input tokens and every parameter.

    Returns ``(grad_T, {"w1", "b1", "w2", "b2"})``.
    """
    Tb, z, h, single = cache
    g, _ = _as_batch(grad_out)
    d1, d2 = params.dilations
    gh, gw2, gb2 = _conv1d_same_backward(g, h, params.w2, d2)
    gz = gh * (z > 0)
    gT_conv, gw1, gb1 = _conv1d_same_backward(gz, Tb, params.w1, d1)
    gT = g + gT_conv
    return (gT[0] if single else gT), {"w1": gw1, "b1": gb1, "w2": gw2, "b2": gb2}


def temporal_global(T: np.ndarray) -> np.ndarray:
    """Mean over the slice axis (axis -2)."""
    T = np.asarray(T)
    if T.shape[-2] < 1:
        raise ValueError("need at least one slice")
    return T.mean(axis=-2)


def fuse(g_max, g_avg, t_global) -> np.ndarray:
    """Concatenate ``[g_max; g_avg; t_global]`` along the last axis."""
    g_max, g_avg, t_global = (np.asarray(v) for v in (g_max, g_avg, t_global))
    if not g_max.shape == g_avg.shape == t_global.shape:
        raise ValueError(
            f"length mismatch: {g_max.shape}, {g_avg.shape}, {t_global.shape}"
        )
    return np.concatenate([g_max, g_avg, t_global], axis=-1)
