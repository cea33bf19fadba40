"""Central finite-difference verification of the hand-written backward passes.

Each check draws a random instance, defines the scalar loss
``sum(R * output)`` for a fixed random ``R``, and compares every analytic
partial derivative with ``(L(x + h) - L(x - h)) / 2h``.

Coordinates whose perturbation flips any piecewise decision (a ReLU
sign, an argmax winner, a slice assignment) are excluded: at those points
the loss is not differentiable and the two estimates need not agree.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .micronet import MicroNetParams, _mlp_backward, _mlp_forward, forward_backward, forward_core
from .temporal import EtscParams, etsc_backward, etsc_forward_cached, slice_assign

STEP = 1e-5
TOLERANCE = 1e-4
GRAD_FLOOR = 1e-8

OPS = ("etsc_forward", "pointwise_features", "forward", "linear", "relu")


@dataclass
class Instance:
    """Problem size for a check; kept small so every coordinate is probed."""

    N: int = 24
    C: int = 8
    hidden: tuple = (12, 10)
    K: int = 4
    B: int = 2
    J: int = 3
    W_bins: int = 7
    H_bins: int = 5


@dataclass
class GradReport:
    op: str
    max_rel_err: float
    passed: bool
    n_checked: int
    n_excluded: int
    worst: str = ""
    per_array: dict = field(default_factory=dict)


class _Problem:
    """Named float64 arrays plus ``evaluate(arrays, grad)``.

    ``evaluate`` returns ``(loss, grads or None, signature)``; the signature
    captures every piecewise decision taken on the way to the loss.
    """

    def __init__(self, arrays, evaluate):
        self.arrays = arrays
        self.evaluate = evaluate


def grad_check(op: str, instance: Instance | None = None, seed=0, *, step=STEP, tol=TOLERANCE,
               probe=None) -> GradReport:
    """Run one gradient check. ``probe`` optionally overrides input arrays."""
    if op not in OPS:
        raise ValueError(f"unknown op {op!r}; expected one of {OPS}")
    instance = instance or Instance()
    rng = np.random.default_rng(seed)
    problem = _BUILDERS[op](instance, rng)
    if probe:
        for k, v in probe.items():
            problem.arrays[k][...] = v
    return _compare(op, problem, step, tol)


def _compare(op, problem: _Problem, step, tol) -> GradReport:
    arrays = problem.arrays
    _, analytic, base_sig = problem.evaluate(arrays, True)
    worst, worst_at = 0.0, ""
    checked = excluded = 0
    per_array = {}
    for name, a in arrays.items():
        local = 0.0
        flat = a.reshape(-1)
        g = analytic[name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            lp, _, sp = problem.evaluate(arrays, False)
            flat[i] = orig - step
            lm, _, sm = problem.evaluate(arrays, False)
            flat[i] = orig
            if not (_same(sp, base_sig) and _same(sm, base_sig)):
                excluded += 1
                continue
            numeric = (lp - lm) / (2 * step)
            scale = max(abs(numeric), abs(g[i]))
            if scale <= GRAD_FLOOR:
                continue
            checked += 1
            rel = abs(numeric - g[i]) / scale
            local = max(local, rel)
            if rel > worst:
                worst, worst_at = rel, f"{name}[{i}]"
        per_array[name] = local
    return GradReport(op, worst, worst < tol, checked, excluded, worst_at, per_array)


def _same(a, b):
    return all(np.array_equal(x, y) for x, y in zip(a, b))


# -- problem builders --------------------------------------------------------

def _linear(inst, rng):
    arrays = {
        "x": rng.standard_normal((inst.C, inst.N)),
        "w": rng.standard_normal((inst.J, inst.C)),
        "b": rng.standard_normal(inst.J),
    }
    R = rng.standard_normal((inst.J, inst.N))

    def evaluate(a, grad):
        y = a["w"] @ a["x"] + a["b"][:, None]
        grads = {"x": a["w"].T @ R, "w": R @ a["x"].T, "b": R.sum(axis=1)} if grad else None
        return float((R * y).sum()), grads, ()

    return _Problem(arrays, evaluate)


def _relu(inst, rng):
    arrays = {"x": rng.standard_normal((inst.C, inst.N))}
    R = rng.standard_normal((inst.C, inst.N))

    def evaluate(a, grad):
        mask = a["x"] > 0
        grads = {"x": R * mask} if grad else None
        return float((R * np.where(mask, a["x"], 0.0)).sum()), grads, (mask,)

    return _Problem(arrays, evaluate)


def _etsc(inst, rng):
    p = EtscParams.init(inst.C, seed=rng)
    arrays = {k: v.copy() for k, v in p.arrays().items()}
    arrays["T"] = rng.standard_normal((inst.B, inst.K, inst.C))
    R = rng.standard_normal((inst.B, inst.K, inst.C))

    def evaluate(a, grad):
        params = EtscParams(a["w1"], a["b1"], a["w2"], a["b2"])
        y, cache = etsc_forward_cached(a["T"], params)
        grads = None
        if grad:
            gT, grads = etsc_backward(R, params, cache)
            grads["T"] = gT
        return float((R * y).sum()), grads, (cache[1] > 0,)

    return _Problem(arrays, evaluate)


def _micronet_params(inst, rng):
    return MicroNetParams.init(rng, C=inst.C, hidden=inst.hidden, J=inst.J,
                               W_bins=inst.W_bins, H_bins=inst.H_bins)


def _random_points(inst, rng):
    return np.vstack([
        rng.uniform(0, 1, inst.N),
        rng.uniform(0, 1, inst.N),
        rng.uniform(0.02, 0.98, inst.N),
        rng.uniform(-0.5, 0.5, inst.N),
        np.log1p(rng.integers(1, 6, inst.N)),
    ])


def _pointwise(inst, rng):
    params = _micronet_params(inst, rng)
    arrays = {k: v.copy() for k, v in params.arrays().items() if k.startswith("mlp")}
    arrays["X"] = _random_points(inst, rng)
    R = rng.standard_normal((inst.C, inst.N))

    def evaluate(a, grad):
        p = MicroNetParams.from_arrays({**params.arrays(), **a}, inst.J, inst.W_bins, inst.H_bins)
        feat, cache = _mlp_forward(a["X"], p)
        grads = None
        if grad:
            gX, grads = _mlp_backward(R, p, cache)
            grads["X"] = gX
        return float((R * feat).sum()), grads, tuple(z > 0 for z in cache[1])

    return _Problem(arrays, evaluate)


def _forward(inst, rng):
    params = _micronet_params(inst, rng)
    etsc = EtscParams.init(inst.C, seed=rng)
    arrays = {k: v.copy() for k, v in params.arrays().items()}
    arrays.update({f"etsc.{k}": v.copy() for k, v in etsc.arrays().items()})
    arrays["X"] = _random_points(inst, rng)
    R = rng.standard_normal(inst.J * (inst.W_bins + inst.H_bins))

    def evaluate(a, grad):
        p = MicroNetParams.from_arrays(a, inst.J, inst.W_bins, inst.H_bins)
        e = EtscParams(a["etsc.w1"], a["etsc.b1"], a["etsc.w2"], a["etsc.b2"])
        sid = slice_assign(a["X"][2], inst.K)
        logits, cache = forward_core(a["X"], sid, p, e, inst.K)
        grads = None
        if grad:
            gX, grads, etsc_grads = forward_backward(R, p, e, cache)
            grads["X"] = gX
            grads.update({f"etsc.{k}": v for k, v in etsc_grads.items()})
        (_, pre), _, arg_max, winners, etsc_cache, _, _ = cache
        sig = (sid, arg_max, winners, etsc_cache[1] > 0, *(z > 0 for z in pre))
        return float(R @ logits), grads, sig

    return _Problem(arrays, evaluate)


_BUILDERS = {
    "linear": _linear,
    "relu": _relu,
    "etsc_forward": _etsc,
    "pointwise_features": _pointwise,
    "forward": _forward,
}
