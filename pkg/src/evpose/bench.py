"""Per-stage latency harness on fixed-size event samples (batch size 1)."""

from __future__ import annotations

import hashlib
import platform
import time

import numpy as np

from .config import PipelineConfig
from .edges import EdgeParams, enhance
from .events import count_window_iter, synth_events, window_iter
from .micronet import MicroNetParams, forward, normalize_points, pointwise_features
from .raster import rasterize, sample_points, to_point_cloud
from .temporal import EtscParams, es_seq, etsc_forward, slice_assign

STAGES = ("rasterize", "enhance", "temporal", "forward")
SAMPLE_SECONDS = 0.13  # duration of one ~7500-event sample


def machine_descriptor() -> str:
    return f"{platform.machine()} {platform.processor() or 'cpu'} / {platform.system()} " \
           f"{platform.release()} / python {platform.python_version()} / numpy {np.__version__}"


def _digest(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()[:16]


def make_samples(config: PipelineConfig, n_samples: int = 4, pattern: str = "two_blobs"):
    """Deterministic event windows for the configured window mode."""
    per = config.window_value if config.window_mode == "count" else None
    if per is not None:
        rate = per / SAMPLE_SECONDS
        duration = int(SAMPLE_SECONDS * 1e6 * n_samples)
    else:
        rate = 7500 / SAMPLE_SECONDS
        duration = config.window_value * n_samples
    stream = synth_events(pattern, rate, duration, config.seed,
                          width=config.width, height=config.height)
    if per is not None:
        windows = list(count_window_iter(stream, per, drop_last=True))
    else:
        windows = list(window_iter(stream, config.window_value))
    return [w for w in windows if len(w[1])][:n_samples]


def _summary(ns: list[int]) -> dict:
    a = np.asarray(ns, dtype=np.float64) / 1e6
    return {
        "runs": len(a),
        "mean_ms": float(a.mean()),
        "p50_ms": float(np.percentile(a, 50)),
        "p99_ms": float(np.percentile(a, 99)),
    }


def run_bench(config: PipelineConfig = PipelineConfig(), *, runs: int = 100, warmup: int = 10,
              stages=STAGES, n_samples: int = 4, pattern: str = "two_blobs") -> dict:
    stages = tuple(stages)
    unknown = set(stages) - set(STAGES)
    if unknown:
        raise ValueError(f"unknown stages {sorted(unknown)}; choose from {STAGES}")
    if runs < 1 or warmup < 0:
        raise ValueError("runs must be >= 1 and warmup >= 0")
    dtype = np.float32 if config.precision == "f32" else np.float64
    edge = EdgeParams(config.alpha, config.epsilon)
    params = MicroNetParams.init(config.seed, C=config.channels, W_bins=config.width,
                                 H_bins=config.height)
    etsc = EtscParams.init(config.channels, seed=config.seed + 1)
    params_d, etsc_d = params.astype(dtype), etsc.astype(dtype)

    # Precompute every stage's input so each stage is timed in isolation.
    prepared = []
    for window, span in make_samples(config, n_samples, pattern):
        grid = rasterize(span, window, config.width, config.height, config.K)
        cloud = sample_points(to_point_cloud(enhance(grid, edge)), config.sample_n, config.seed)
        X = normalize_points(cloud)
        feat = pointwise_features(X.astype(dtype), params_d)
        sid = slice_assign(cloud.t_avg, config.K)
        prepared.append((window, span, grid, cloud, feat, sid))
    if not prepared:
        raise ValueError("configuration produced no non-empty samples")

    def stage_fn(name, item):
        window, span, grid, cloud, feat, sid = item
        if name == "rasterize":
            return lambda: rasterize(span, window, config.width, config.height, config.K)
        if name == "enhance":
            return lambda: sample_points(to_point_cloud(enhance(grid, edge)), config.sample_n,
                                         config.seed)
        if name == "temporal":
            return lambda: etsc_forward(es_seq(feat, sid, config.K), etsc_d)
        return lambda: forward(cloud, params, etsc, config.K, dtype=dtype)

    checksums = {}
    for name in stages:
        item = prepared[0]
        window, span, grid, cloud, feat, sid = item
        inputs = {
            "rasterize": (span.x, span.y, span.t, span.p),
            "enhance": (grid.t_sum, grid.p_acc, grid.e_cnt),
            "temporal": (feat, sid),
            "forward": (cloud.as_array(),),
        }[name]
        checksums[name] = _digest(*inputs)

    timings = {}
    for name in stages:
        fns = [stage_fn(name, it) for it in prepared]
        for i in range(warmup):
            fns[i % len(fns)]()
        ns = []
        for i in range(runs):
            fn = fns[i % len(fns)]
            t0 = time.perf_counter_ns()
            fn()
            ns.append(max(time.perf_counter_ns() - t0, 1))
        timings[name] = _summary(ns)

    events = float(np.mean([len(it[1]) for it in prepared]))
    total_ms = sum(t["mean_ms"] for t in timings.values())
    report = {
        "config": config.to_dict(),
        "machine": machine_descriptor(),
        "batch_size": 1,
        "warmup": warmup,
        "n_samples": len(prepared),
        "events_per_sample": events,
        "peak_points": int(max(len(to_point_cloud(it[2])) for it in prepared)),
        "stages": timings,
        "total_mean_ms": total_ms,
        "throughput_events_per_s": events / (total_ms / 1e3),
        "input_checksums": checksums,
    }
    if "rasterize" in timings and "enhance" in timings:
        re_ms = timings["rasterize"]["mean_ms"] + timings["enhance"]["mean_ms"]
        report["rasterize_enhance_events_per_s"] = events / (re_ms / 1e3)
    return report


def format_table(report: dict) -> str:
    lines = [f"{'stage':<10} {'runs':>5} {'mean ms':>10} {'p50 ms':>10} {'p99 ms':>10}"]
    for name, t in report["stages"].items():
        lines.append(f"{name:<10} {t['runs']:>5} {t['mean_ms']:>10.3f} {t['p50_ms']:>10.3f} "
                     f"{t['p99_ms']:>10.3f}")
    lines.append(f"events/sample {report['events_per_sample']:.0f}, "
                 f"throughput {report['throughput_events_per_s']:.3e} events/s")
    if "rasterize_enhance_events_per_s" in report:
        lines.append(f"rasterize+enhance {report['rasterize_enhance_events_per_s']:.3e} events/s")
    lines.append(report["machine"])
    return "\n".join(lines)
