"""The twelve acceptance criteria, each at its stated tolerance.

Run alone with ``pytest tests/test_acceptance.py``; the terminal summary
prints one PASS/FAIL line per criterion with the measured numbers.
"""

import math
import time

import numpy as np

from evpose.bench import run_bench
from evpose.config import PipelineConfig
from evpose.edges import EdgeParams, edge_map, enhance, sobel_gradients
from evpose.events import EventStream, TimeWindow, synth_events
from evpose.gradcheck import grad_check
from evpose.geometry import Pose3D, mpjpe_2d, mpjpe_3d, project_pose, random_rig, triangulate, two_view_rig
from evpose.micronet import MicroNetParams, Pose2D, forward
from evpose.raster import cloud_from_csv, cloud_to_csv, rasterize, sample_points, to_point_cloud
from evpose.temporal import EtscParams, es_seq, etsc_forward, slice_assign
from oracles import SOBEL_KX, SOBEL_KY, correlate2d_naive, es_seq_scan, etsc_naive, mpjpe_naive, rasterize_naive
from pipeline import run_pipeline


def random_stream(rng, max_events=10_000):
    W, H = int(rng.integers(1, 80)), int(rng.integers(1, 60))
    n = int(rng.integers(0, max_events + 1))
    L = int(rng.integers(1, 2_000_000))
    t0 = int(rng.integers(0, 10**9))
    t = np.sort(rng.integers(t0, t0 + L, n))
    s = EventStream(rng.integers(0, W, n), rng.integers(0, H, n), t, rng.choice([-1, 1], n), W, H)
    return s, TimeWindow(t0, t0 + L), W, H


def random_grid(rng):
    s, w, W, H = random_stream(rng, 3000)
    return rasterize(s, w, W, H, int(rng.integers(1, 9)))


def test_c01_rasterization_oracle(measured):
    """Rasterization equals the per-event oracle on 200 random streams"""
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    elapsed, cells = 0.0, 0
    for _ in range(200):
        s, w, W, H = random_stream(rng)
        K = int(rng.integers(1, 9))
        t0 = time.perf_counter()
        g = rasterize(s, w, W, H, K)
        elapsed += time.perf_counter() - t0
        t_sum, p_acc, e_cnt = rasterize_naive(s.x, s.y, s.t, s.p, w.t_start, w.t_end, W, H, K)
        assert np.array_equal(g.t_sum, t_sum)
        assert np.array_equal(g.p_acc, p_acc)
        assert np.array_equal(g.e_cnt, e_cnt)
        cells += e_cnt.size
    total = time.perf_counter() - start
    measured.update(streams=200, cells=cells, rasterize_s=elapsed, with_oracle_s=total)
    assert total < 30


def test_c02_conservation(measured):
    """Exported clouds conserve event count and polarity sum"""
    rng = np.random.default_rng(102)
    for _ in range(200):
        s, w, W, H = random_stream(rng, 5000)
        K = int(rng.integers(1, 9))
        exported = cloud_from_csv(cloud_to_csv(to_point_cloud(rasterize(s, w, W, H, K))), W, H, K)
        assert int(exported.e_cnt.sum()) == len(s)
        assert int(exported.p_acc.sum()) == int(s.p.astype(np.int64).sum())
    measured.update(windows=200)


def test_c03_edge_enhancement_bounds(measured):
    """Edge enhancement bounds at alpha 0.5 and identity at alpha 0"""
    rng = np.random.default_rng(103)
    worst_ratio, e_max = 0.0, 0.0
    for _ in range(100):
        g = random_grid(rng)
        E = edge_map(g.e_cnt, 1e-8)
        assert (E >= 0).all() and (E < 1).all()
        e_max = max(e_max, float(E.max(initial=0.0)))
        out = enhance(g, EdgeParams(alpha=0.5))
        assert (np.abs(out.p_acc) <= 1.5 * np.abs(g.p_acc)).all()
        assert np.array_equal(np.sign(out.p_acc), np.sign(g.p_acc))
        nz = g.p_acc != 0
        if nz.any():
            worst_ratio = max(worst_ratio, float((np.abs(out.p_acc[nz]) / np.abs(g.p_acc[nz])).max()))
        ident = enhance(g, EdgeParams(alpha=0.0))
        assert ident.p_acc.tobytes() == g.p_acc.astype(np.float64).tobytes()
    measured.update(grids=100, E_gap_below_1=1.0 - e_max, max_gain=worst_ratio)


def test_c04_sobel_oracle(measured):
    """Sobel matches the nested-loop oracle and the step fixture"""
    rng = np.random.default_rng(104)
    worst = 0.0
    for _ in range(100):
        H, W = rng.integers(1, 41, 2)
        a = rng.standard_normal((H, W)) * rng.choice([1.0, 1e3])
        gx, gy = sobel_gradients(a)
        for got, k in ((gx, SOBEL_KX), (gy, SOBEL_KY)):
            ref = correlate2d_naive(a.tolist(), k)
            scale = np.abs(ref).max()
            if scale > 0:
                worst = max(worst, float(np.abs(got - ref).max() / scale))
    assert worst < 1e-12
    # vertical step at column c: interior G_x is 4 at c-1 and c, 0 elsewhere
    c, a = 6, np.zeros((9, 12))
    a[:, c:] = 1.0
    gx, _ = sobel_gradients(a)
    expect = np.zeros(12)
    expect[c - 1] = expect[c] = 4.0
    expect[-1] = -4.0  # zero padding past the right border
    for row in gx[1:-1]:
        assert row.tolist() == expect.tolist()
    measured.update(maps=100, max_rel_err=worst)


def test_c05_es_seq(measured):
    """slice_assign sweep and ES-Seq oracle on 100 instances"""
    rng = np.random.default_rng(105)
    K = 4
    bounds = np.array([k / K for k in range(K + 1)])
    near = np.concatenate([np.nextafter(bounds, -1), np.nextafter(bounds, 2)])
    t = np.concatenate([[0.0, 1.0], bounds, near[(near >= 0) & (near <= 1)], rng.random(10**6)])
    got = slice_assign(t, K).tolist()
    assert got == [min(math.floor(v * K), K - 1) for v in t.tolist()]
    for _ in range(100):
        feat = rng.standard_normal((64, 2048))
        ta = rng.random(2048)
        np.testing.assert_array_equal(es_seq(feat, slice_assign(ta, K), K), es_seq_scan(feat, ta, K))
    measured.update(sweep=len(t), instances=100)


def test_c06_etsc_contract(measured):
    """ETSC shape, residual identity, receptive field and oracle"""
    rng = np.random.default_rng(106)
    T = rng.standard_normal((3, 4, 64))
    assert etsc_forward(T, EtscParams.init(64, seed=0)).shape == (3, 4, 64)
    assert etsc_forward(T, EtscParams.zeros(64)).tobytes() == T.tobytes()
    # receptive field: perturbing slice i leaves slices farther than 3 untouched
    K, C = 16, 8
    p = EtscParams.init(C, seed=1)
    T = rng.standard_normal((K, C))
    base = etsc_forward(T, p)
    for i in range(K):
        T2 = T.copy()
        T2[i] += rng.standard_normal(C) * 5
        changed = np.flatnonzero((etsc_forward(T2, p) != base).any(axis=1))
        assert all(abs(k - i) <= 3 for k in changed)
    worst = 0.0
    for i in range(50):
        K, C = int(rng.integers(1, 9)), int(rng.integers(1, 17))
        p = EtscParams.init(C, seed=i)
        T = rng.standard_normal((K, C))
        ref = etsc_naive(T, p.w1, p.b1, p.w2, p.b2)
        worst = max(worst, float(np.abs(etsc_forward(T, p) - ref).max() / np.abs(ref).max()))
    assert worst < 1e-10
    measured.update(instances=50, max_rel_err=worst)


def test_c07_gradient_checks(measured):
    """Analytic vs finite-difference gradients over 20 seeds"""
    t0 = time.perf_counter()
    worst = {}
    for op in ("etsc_forward", "pointwise_features", "forward"):
        errs = []
        for seed in range(20):
            r = grad_check(op, seed=seed)
            assert r.passed, (op, seed, r.max_rel_err, r.worst)
            errs.append(r.max_rel_err)
        worst[op] = max(errs)
    elapsed = time.perf_counter() - t0
    measured.update({f"{k}_max_rel": v for k, v in worst.items()}, runtime_s=elapsed)
    assert elapsed < 120


def test_c08_permutation_invariance(measured):
    """Forward logits bit-identical under 50 point permutations"""
    s = synth_events("two_blobs", 7500 / 0.13, 130_000, seed=8)
    c = sample_points(to_point_cloud(rasterize(s, TimeWindow(0, 130_000), 346, 260, 4)), 2048, seed=8)
    params, etsc = MicroNetParams.init(8), EtscParams.init(64, seed=9)
    ref = forward(c, params, etsc)
    rng = np.random.default_rng(108)
    for _ in range(50):
        out = forward(c.take(rng.permutation(len(c))), params, etsc)
        assert out.x.tobytes() == ref.x.tobytes() and out.y.tobytes() == ref.y.tobytes()
    measured.update(points=len(c), permutations=50)


def test_c09_triangulation_round_trip(measured):
    """Project then triangulate recovers points over 500 rigs"""
    rng = np.random.default_rng(109)
    worst, min_angle = 0.0, 180.0
    rigs = [two_view_rig(90.0) + (90.0,)] + [random_rig(rng) for _ in range(499)]
    for a, b, angle in rigs:
        min_angle = min(min_angle, angle)
        X = Pose3D.of(rng.uniform(-1000, 1000, (13, 3)))
        out = triangulate(a, b, project_pose(a, X), project_pose(b, X))
        assert out.valid.all()
        worst = max(worst, float(np.abs(out.xyz - X.xyz).max()))
    assert min_angle >= 20
    assert worst < 1e-8
    measured.update(rigs=len(rigs), min_angle_deg=min_angle, max_err_mm=worst)


def test_c10_mpjpe(measured):
    """MPJPE exact cases and double-loop oracle agreement"""
    rng = np.random.default_rng(110)
    same = [Pose3D.of(rng.random((13, 3)))]
    assert mpjpe_3d(same, same).mpjpe == 0.0
    assert mpjpe_2d([Pose2D.of([[3.0, 4.0]])], [Pose2D.of([[0.0, 0.0]])]).mpjpe == 5.0
    assert mpjpe_3d([Pose3D.of([[1.0, 2.0, 2.0]])], [Pose3D.of([[0.0, 0.0, 0.0]])]).mpjpe == 3.0
    worst = 0.0
    for i in range(100):
        dim = 2 if i % 2 else 3
        cls = Pose2D if dim == 2 else Pose3D
        pred = [cls(rng.random((13, dim)) * 500, rng.random(13) > 0.1) for _ in range(10)]
        gt = [cls(rng.random((13, dim)) * 500, rng.random(13) > 0.1) for _ in range(10)]
        got = (mpjpe_2d if dim == 2 else mpjpe_3d)(pred, gt).mpjpe
        coords = (lambda p: p.uv) if dim == 2 else (lambda p: p.xyz)
        ref = mpjpe_naive([coords(p).tolist() for p in pred], [coords(g).tolist() for g in gt],
                          [p.valid.tolist() for p in pred], [g.valid.tolist() for g in gt])
        worst = max(worst, abs(got - ref) / ref)
    assert worst < 1e-12
    measured.update(instances=100, max_rel_err=worst)


def test_c11_end_to_end_determinism(tmp_path, measured):
    """CLI pipeline outputs byte-identical across runs"""
    a = run_pipeline(tmp_path / "run1")
    b = run_pipeline(tmp_path / "run2")
    assert a == b
    measured.update(files=len(a))


def test_c12_benchmark(measured):
    """Bench completes 100 runs; rasterize+enhance at least 1e6 events/s"""
    r = run_bench(PipelineConfig(), runs=100, warmup=10)
    assert r["events_per_sample"] == 7500 and r["batch_size"] == 1
    assert all(t["runs"] >= 100 for t in r["stages"].values())
    assert all(t["mean_ms"] > 0 for t in r["stages"].values())
    rate = r["rasterize_enhance_events_per_s"]
    measured.update(runs=100, rasterize_enhance_ev_per_s=rate)
    assert rate >= 1e6
