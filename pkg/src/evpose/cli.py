"""``evpose`` command-line interface.

Exit codes: 0 success, 1 data error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bench import STAGES, format_table, run_bench
from .config import PipelineConfig
from .edges import EdgeParams, enhance_cloud
from .events import PATTERNS, count_window_iter, read_events, synth_events, window_iter, write_events
from .geometry import CameraModel, mpjpe_2d, mpjpe_3d, poses_from_csv, poses_to_csv, triangulate, two_view_rig
from .micronet import MicroNetParams, forward, normalize_points, pointwise_features, simdr_decode
from .raster import cloud_from_csv, cloud_to_csv, rasterize, sample_points, to_point_cloud
from .temporal import EtscParams, es_seq, etsc_forward
from .weights import load_model, save_model


class DataError(Exception):
    pass


def _config(args) -> PipelineConfig:
    base = PipelineConfig.load(args.config) if getattr(args, "config", None) else PipelineConfig()
    window_mode = window_value = None
    if getattr(args, "count", None) is not None:
        window_mode, window_value = "count", args.count
    elif getattr(args, "window_us", None) is not None:
        window_mode, window_value = "time_us", args.window_us
    return base.override(
        width=getattr(args, "width", None), height=getattr(args, "height", None),
        K=getattr(args, "k", None), alpha=getattr(args, "alpha", None),
        epsilon=getattr(args, "epsilon", None), sample_n=getattr(args, "sample_n", None),
        seed=getattr(args, "seed", None), precision=getattr(args, "precision", None),
        channels=getattr(args, "channels", None),
        window_mode=window_mode, window_value=window_value,
    )


def _write(path, data) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    with open(path, mode, newline="" if mode == "w" else None) as f:
        f.write(data)


def _read_text(path) -> str:
    try:
        with open(path) as f:
            return f.read()
    except OSError as exc:
        raise DataError(str(exc)) from None


def _model(cfg: PipelineConfig, weights):
    if weights:
        params, etsc = load_model(weights)
        if etsc is None:
            raise DataError(f"{weights} carries no ETSC tensors")
        return params, etsc
    params = MicroNetParams.init(cfg.seed, C=cfg.channels, W_bins=cfg.width, H_bins=cfg.height)
    return params, EtscParams.init(cfg.channels, seed=cfg.seed + 1)


def _clouds(paths, cfg):
    return [cloud_from_csv(_read_text(p), cfg.width, cfg.height, cfg.K) for p in paths]


# -- subcommands -------------------------------------------------------------

def cmd_synth(args) -> int:
    cfg = _config(args)
    stream = synth_events(args.pattern, args.rate, args.duration_us, cfg.seed,
                          width=cfg.width, height=cfg.height, spacing=args.spacing,
                          bar_width=args.bar_width)
    Path(args.output).parent.mkdir(parents=True, exist_ok=True)
    write_events(args.output, stream)
    print(f"wrote {len(stream)} events to {args.output}", file=sys.stderr)
    return 0


def cmd_rig(args) -> int:
    cfg = _config(args)
    cams = two_view_rig(args.angle, args.distance, focal=args.focal,
                        width=cfg.width, height=cfg.height)
    out = Path(args.output)
    for name, cam in zip(("cam_a.json", "cam_b.json"), cams):
        _write(out / name, cam.to_json())
    return 0


def cmd_rasterize(args) -> int:
    cfg = _config(args)
    stream = read_events(args.input, cfg.width, cfg.height, zero_one_polarity=args.zero_one)
    if cfg.window_mode == "count":
        windows = count_window_iter(stream, cfg.window_value)
    else:
        windows = window_iter(stream, cfg.window_value)
    out = Path(args.output)
    n = 0
    for n, (window, span) in enumerate(windows, start=1):
        grid = rasterize(span, window, cfg.width, cfg.height, cfg.K)
        _write(out / f"cloud_{n - 1:04d}.csv", cloud_to_csv(to_point_cloud(grid)))
    print(f"wrote {n} clouds to {out}", file=sys.stderr)
    return 0


def cmd_enhance(args) -> int:
    cfg = _config(args)
    params = EdgeParams(cfg.alpha, cfg.epsilon)
    out = Path(args.output)
    for path, cloud in zip(args.inputs, _clouds(args.inputs, cfg)):
        _write(out / Path(path).name, cloud_to_csv(enhance_cloud(cloud, params)))
    return 0


def cmd_sliceseq(args) -> int:
    cfg = _config(args)
    params, etsc = _model(cfg, args.weights)
    (cloud,) = _clouds([args.input], cfg)
    if len(cloud) == 0:
        raise DataError("empty cloud")
    cloud = sample_points(cloud, cfg.sample_n, cfg.seed)
    feat = pointwise_features(normalize_points(cloud), params)
    tokens = es_seq(feat, cloud.slice_id, cfg.K)
    refined = etsc_forward(tokens, etsc)
    C = tokens.shape[1]
    lines = ["kind,slice," + ",".join(f"c{i}" for i in range(C))]
    for kind, T in (("tokens", tokens), ("etsc", refined)):
        for s, row in enumerate(T.tolist()):
            lines.append(f"{kind},{s}," + ",".join(f"{v:.17g}" for v in row))
    _write(args.output, "\n".join(lines) + "\n")
    return 0


def cmd_forward(args) -> int:
    cfg = _config(args)
    params, etsc = _model(cfg, args.weights)
    dtype = np.float32 if cfg.precision == "f32" else np.float64
    poses = []
    for path, cloud in zip(args.inputs, _clouds(args.inputs, cfg)):
        if len(cloud) == 0:
            raise DataError(f"{path}: empty cloud")
        sampled = sample_points(cloud, cfg.sample_n, cfg.seed)
        logits = forward(sampled, params, etsc, cfg.K, dtype=dtype)
        poses.append(simdr_decode(logits, cfg.width, cfg.height, soft=args.soft))
    _write(args.output, poses_to_csv(poses))
    return 0


def cmd_init(args) -> int:
    cfg = _config(args)
    params, etsc = _model(cfg, None)
    Path(args.output).parent.mkdir(parents=True, exist_ok=True)
    save_model(args.output, params, etsc)
    return 0


def cmd_triangulate(args) -> int:
    cam_a = CameraModel.from_json(_read_text(args.cam_a))
    cam_b = CameraModel.from_json(_read_text(args.cam_b))
    pa = poses_from_csv(_read_text(args.pose_a), 2)
    pb = poses_from_csv(_read_text(args.pose_b), 2)
    if len(pa) != len(pb):
        raise DataError(f"{len(pa)} samples in view a vs {len(pb)} in view b")
    _write(args.output, poses_to_csv([triangulate(cam_a, cam_b, a, b) for a, b in zip(pa, pb)]))
    return 0


def cmd_eval(args) -> int:
    cfg = _config(args)
    pred = poses_from_csv(_read_text(args.pred), args.dim)
    gt = poses_from_csv(_read_text(args.gt), args.dim)
    report = (mpjpe_2d if args.dim == 2 else mpjpe_3d)(pred, gt)
    unit = "px" if args.dim == 2 else "mm"
    print(f"MPJPE {report.mpjpe:.3f} {unit} ({report.n_valid} joints, {report.n_samples} samples)")
    if args.json:
        _write(args.json, json.dumps({"dim": args.dim, "unit": unit, **report.as_dict(),
                                      "config": cfg.to_dict()}, indent=2) + "\n")
    return 0


def cmd_bench(args) -> int:
    cfg = _config(args)
    if args.count is None and args.window_us is None and not args.config:
        cfg = cfg.override(window_mode="count", window_value=7500)
    stages = tuple(s for s in args.stages.split(",") if s) if args.stages else STAGES
    report = run_bench(cfg, runs=args.runs, warmup=args.warmup, stages=stages,
                       n_samples=args.samples)
    print(format_table(report))
    if args.json:
        _write(args.json, json.dumps(report, indent=2) + "\n")
    return 0


# -- parser ------------------------------------------------------------------

def _add_common(p, *, sensor=True, raster=False, edge=False, model=False):
    p.add_argument("--config", help="JSON PipelineConfig; flags override its values")
    p.add_argument("--seed", type=int)
    if sensor:
        p.add_argument("--width", type=int, help="sensor width in pixels (default 346)")
        p.add_argument("--height", type=int, help="sensor height in pixels (default 260)")
    if raster:
        p.add_argument("--k", type=int, help="temporal slices per window (default 4)")
    if edge:
        p.add_argument("--alpha", type=float, help="edge enhancement strength (default 0.5)")
        p.add_argument("--epsilon", type=float, help="normalization guard (default 1e-8)")
    if model:
        p.add_argument("--weights", help="model file from `evpose init`; random init from --seed if absent")
        p.add_argument("--sample-n", type=int, help="points sampled per cloud (default 2048)")
        p.add_argument("--channels", type=int, help="feature channels C for random init (default 64)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evpose", description="Event-camera pose pipeline tools.")
    parser.add_argument("--version", action="version", version=f"evpose {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help):
        p = sub.add_parser(name, help=help, description=help)
        p.add_argument("--version", action="version", version=f"evpose {__version__}")
        p.set_defaults(fn=fn)
        return p

    p = add("synth", cmd_synth, "Generate a deterministic synthetic event stream.")
    _add_common(p)
    p.add_argument("--pattern", choices=PATTERNS, default="moving_bar")
    p.add_argument("--rate", type=float, default=7500 / 0.13, help="events per second")
    p.add_argument("--duration-us", type=int, default=520_000)
    p.add_argument("--spacing", choices=("uniform", "poisson"), default="uniform")
    p.add_argument("--bar-width", type=int, default=1)
    p.add_argument("-o", "--output", required=True, help=".evb (binary) or .csv")

    p = add("rig", cmd_rig, "Write a two-camera rig as cam_a.json / cam_b.json.")
    _add_common(p)
    p.add_argument("--angle", type=float, default=90.0, help="baseline angle in degrees")
    p.add_argument("--distance", type=float, default=3000.0, help="camera distance in mm")
    p.add_argument("--focal", type=float, default=300.0, help="focal length in pixels")
    p.add_argument("-o", "--output", required=True, help="output directory")

    p = add("rasterize", cmd_rasterize, "Rasterize events into one point-cloud CSV per window.")
    _add_common(p, raster=True)
    p.add_argument("input")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--count", type=int, help="events per window (default 7500)")
    g.add_argument("--window-us", type=int, help="fixed window length in microseconds")
    p.add_argument("--zero-one", action="store_true", help="input polarity is encoded 0/1")
    p.add_argument("-o", "--output", required=True, help="output directory")

    p = add("enhance", cmd_enhance, "Sobel edge-enhance point-cloud CSVs.")
    _add_common(p, raster=True, edge=True)
    p.add_argument("inputs", nargs="+")
    p.add_argument("-o", "--output", required=True, help="output directory")

    p = add("sliceseq", cmd_sliceseq, "Slice tokens and ETSC output for one cloud.")
    _add_common(p, raster=True, model=True)
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)

    p = add("forward", cmd_forward, "Run the backbone and decode one 2D pose per cloud.")
    _add_common(p, raster=True, model=True)
    p.add_argument("inputs", nargs="+")
    p.add_argument("--precision", choices=("f64", "f32"))
    p.add_argument("--soft", action="store_true", help="softmax-expectation decoding")
    p.add_argument("-o", "--output", required=True, help="2D pose CSV")

    p = add("init", cmd_init, "Write randomly initialized model weights.")
    _add_common(p)
    p.add_argument("--channels", type=int)
    p.add_argument("-o", "--output", required=True)

    p = add("triangulate", cmd_triangulate, "Triangulate two views of 2D poses into 3D.")
    p.add_argument("--cam-a", required=True)
    p.add_argument("--cam-b", required=True)
    p.add_argument("--pose-a", required=True)
    p.add_argument("--pose-b", required=True)
    p.add_argument("-o", "--output", required=True, help="3D pose CSV")

    p = add("eval", cmd_eval, "MPJPE between predicted and ground-truth pose CSVs.")
    _add_common(p, sensor=False)
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--dim", type=int, choices=(2, 3), default=2)
    p.add_argument("--json", help="write the report as JSON here")

    p = add("bench", cmd_bench, "Per-stage latency benchmark on ~7500-event samples.")
    _add_common(p, raster=True, edge=True, model=True)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--count", type=int)
    g.add_argument("--window-us", type=int)
    p.add_argument("--precision", choices=("f64", "f32"))
    p.add_argument("--runs", type=int, default=100)
    p.add_argument("--warmup", type=int, default=10)
    p.add_argument("--samples", type=int, default=4, help="distinct input windows cycled through")
    p.add_argument("--stages", help=f"comma-separated subset of {','.join(STAGES)}")
    p.add_argument("--json", help="write the report as JSON here")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (DataError, ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"evpose {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
