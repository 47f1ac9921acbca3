"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines. Tolerances are fixed here, not configurable.
"""

import math
import time

import numpy as np
import pytest

from radkit.anchors import AnchorSet, fit_anchors
from radkit.annotate import (DbscanConfig, connect_patterns, extract_instances,
                             instance_to_boxes)
from radkit.cfar import CfarConfig, ca_alpha, cfar_2d
from radkit.detect import decode2d, decode3d, encode2d, encode3d
from radkit.dsp import rad_from_adc, rd_map
from radkit.evaluation import evaluate, split_dataset
from radkit.geometry import (Box2D, Box3D, CartesianGrid, box3d_contains,
                             iou2d, iou3d, nms_indices)
from radkit.losses import focal_objectness_loss, head_loss, head_loss_grad
from radkit.synth import (PointTarget, Scene, azimuth_deg_for_bin,
                          expected_bins, synth_adc)

from oracles import (cfar_reference, iou2d_counting, iou3d_counting,
                     nms_reference)


def _report(name: str, ok: bool, detail: str = ""):
    print(f"[{'PASS' if ok else 'FAIL'}] {name}" + (f": {detail}" if detail else ""))
    assert ok, f"{name}: {detail}"


# ---------------------------------------------------------------- criterion 1

def test_synthetic_oracle_suite():
    rng = np.random.default_rng(101)
    t_start = time.perf_counter()
    exact_fail = 0
    frac_fail = 0
    for i in range(200):
        on_grid = i < 100
        if on_grid:
            r = int(rng.integers(0, 256))
            a = int(rng.integers(1, 256))
            d = int(rng.integers(0, 64))
            target = PointTarget(float(r), d / 64 - 0.5,
                                 azimuth_deg_for_bin(a), 1.0)
            want = (r, a, d)
        else:
            target = PointTarget(float(rng.uniform(1, 255)),
                                 float(rng.uniform(-0.49, 0.49)),
                                 float(rng.uniform(-85, 85)), 1.0)
            want = expected_bins(target)
        rad = rad_from_adc(synth_adc(Scene((target,), 0.0, 0)))
        mag = np.abs(rad.data)
        got = tuple(int(v) for v in np.unravel_index(np.argmax(mag), mag.shape))
        if on_grid:
            if got != want:
                exact_fail += 1
        else:
            dr = min(abs(got[0] - want[0]), 256 - abs(got[0] - want[0]))
            da = abs(got[1] - want[1])
            dd = min(abs(got[2] - want[2]), 64 - abs(got[2] - want[2]))
            if dr > 1 or da > 1 or dd > 1:
                frac_fail += 1
    elapsed = time.perf_counter() - t_start
    _report("synthetic oracle suite",
            exact_fail == 0 and frac_fail == 0 and elapsed < 60.0,
            f"exact mismatches {exact_fail}, fractional misses {frac_fail}, "
            f"runtime {elapsed:.1f}s (< 60s)")


# ---------------------------------------------------------------- criterion 2

def test_cfar_calibration_and_oracle_equality():
    rng = np.random.default_rng(202)
    cfg = CfarConfig(variant="ca", train=(8, 4), guard=(2, 2))
    alpha = ca_alpha(1e-2, cfg.n_train_full)
    run_cfg = CfarConfig(variant="ca", train=(8, 4), guard=(2, 2), alpha=alpha)
    cells = 0
    alarms = 0
    while cells < 1_000_000:
        # square-law detected complex Gaussian noise: exponential power cells
        noise = (rng.standard_normal((256, 64)) ** 2
                 + rng.standard_normal((256, 64)) ** 2) / 2.0
        mask = cfar_2d(noise, run_cfg)
        cells += mask.size
        alarms += int(mask.sum())
    pfa = alarms / cells
    pfa_ok = 0.5e-2 <= pfa <= 2e-2

    mismatch = 0
    for _ in range(50):
        rd = rng.exponential(1.0, size=(32, 16))
        for variant in ("ca", "os"):
            got = cfar_2d(rd, CfarConfig(variant=variant, train=(3, 2),
                                         guard=(1, 1), alpha=3.0, os_rank=0.75))
            ref = cfar_reference(rd, variant, (3, 2), (1, 1), 3.0, 0.75)
            if not np.array_equal(got, ref):
                mismatch += 1
    _report("CFAR calibration",
            pfa_ok and mismatch == 0,
            f"empirical Pfa {pfa:.4f} over {cells} cells "
            f"(target [0.005, 0.02]), oracle mismatches {mismatch}/100 maps")


# ---------------------------------------------------------------- criterion 3

def test_auto_annotation_coverage():
    rng = np.random.default_rng(303)
    cfar_cfg = CfarConfig()
    db = DbscanConfig()
    total = 0
    captured = 0
    for i in range(200):
        targets = []
        want = int(rng.integers(1, 5))
        tries = 0
        while len(targets) < want and tries < 200:
            tries += 1
            r = float(rng.uniform(16, 240))
            nu = float(rng.uniform(-0.45, 0.45))
            if abs(nu) < 0.05:
                continue  # dynamic road users only
            az = float(rng.uniform(-70, 70))
            separated = True
            for t in targets:
                dr = abs(r - t.range_bin)
                dd = min(abs(nu - t.doppler_freq),
                         1 - abs(nu - t.doppler_freq)) * 64
                da = abs((math.sin(math.radians(az))
                          - math.sin(math.radians(t.azimuth_deg))) / 2 * 256)
                if dr < 16 and dd < 10 and da < 60:
                    separated = False
                    break
            if separated:
                targets.append(PointTarget(r, nu, az, float(rng.uniform(1, 4))))
        scene = Scene(tuple(targets), 1.0, 9000 + i)
        rad = rad_from_adc(synth_adc(scene))
        mask = connect_patterns(cfar_2d(rd_map(rad), cfar_cfg), 1)
        instances = extract_instances(rad, mask, 0.5, db)
        boxes = [instance_to_boxes(inst)[0] for inst in instances]
        for t in scene.targets:
            r, a, d = expected_bins(t)
            total += 1
            if any(box3d_contains(b, (r + 0.5, a + 0.5, d + 0.5)) for b in boxes):
                captured += 1
    rate = captured / total
    _report("auto-annotation coverage", rate >= 0.75,
            f"{captured}/{total} targets captured = {rate:.3f} (>= 0.75)")


# ---------------------------------------------------------------- criterion 4

def _rand_box3d(rng):
    q = 0.25
    size = (q * int(rng.integers(1, 40)), q * int(rng.integers(1, 40)),
            q * int(rng.integers(1, 48)))
    center = (q * int(rng.integers(40, 800)), q * int(rng.integers(40, 800)),
              (q * int(rng.integers(0, 256))) % 64)
    return Box3D(center, size)


def _rand_box2d(rng):
    q = 0.25
    size = (q * int(rng.integers(1, 30)), q * int(rng.integers(1, 30)))
    center = (q * int(rng.integers(-80, 80)), q * int(rng.integers(-80, 80)))
    return Box2D(center, size)


def test_geometry_oracles():
    rng = np.random.default_rng(404)
    bad = 0
    for _ in range(400):
        a, b = _rand_box3d(rng), _rand_box3d(rng)
        if abs(iou3d(a, b) - iou3d_counting(a.center, a.size,
                                            b.center, b.size)) > 1e-9:
            bad += 1
    for _ in range(400):
        a, b = _rand_box2d(rng), _rand_box2d(rng)
        if abs(iou2d(a, b) - iou2d_counting(a.center, a.size,
                                            b.center, b.size)) > 1e-9:
            bad += 1
    nms_bad = 0
    for _ in range(25):
        boxes = []
        for _ in range(8):
            base = _rand_box3d(rng)
            boxes.append(Box3D(base.center, base.size, int(rng.integers(0, 3)),
                               round(float(rng.random()), 3)))
        iou_mat = [[iou3d_counting(x.center, x.size, y.center, y.size)
                    for y in boxes] for x in boxes]
        if nms_indices(boxes, 0.3, iou3d) != nms_reference(boxes, 0.3, iou_mat):
            nms_bad += 1

    wrap_a = Box3D((10, 10, 63), (4, 4, 6))
    wrap_b = Box3D((10, 10, 1), (4, 4, 2))
    wrap_exact = iou3d(wrap_a, wrap_b) == pytest.approx(1 / 3, abs=1e-15)
    _report("geometry oracles",
            bad == 0 and nms_bad == 0 and wrap_exact,
            f"{bad} IoU mismatches / 800 pairs, {nms_bad} NMS mismatches / 25 "
            f"runs (200 boxes), wrap example = {iou3d(wrap_a, wrap_b):.12f}")


# ---------------------------------------------------------------- criterion 5

def test_anchor_error_rate():
    rng = np.random.default_rng(505)
    protos = np.array([[6.0, 6.0, 4.0], [20.0, 30.0, 8.0], [40.0, 20.0, 12.0]])
    sizes = np.vstack([p * rng.uniform(0.97, 1.03, (80, 3)) for p in protos])
    result = fit_anchors(sizes, k=6, seed=0)
    _report("anchor fitting", result.mean_error <= 0.10,
            f"mean error {result.mean_error:.4f} (<= 0.10) on a 3-cluster "
            f"population, k=6")


# ---------------------------------------------------------------- criterion 6

def test_decode_round_trip_and_loss_gradients():
    rng = np.random.default_rng(606)
    anchors3d = AnchorSet(((10.0, 10.0, 4.0), (6.0, 20.0, 6.0),
                           (24.0, 12.0, 8.0)), 3, 0.0)
    worst_err = 0.0
    for _ in range(50):
        cell = rng.integers(0, (16, 16, 4))
        frac = rng.uniform(0.05, 0.95, 3)
        center = tuple((cell[k] + frac[k]) * 16 for k in range(3))
        size = tuple(float(v) for v in rng.uniform(0.6, 1.6, 3) * [12, 14, 5])
        box = Box3D(center, size, int(rng.integers(0, 6)))
        raw = encode3d([box], anchors3d, 6)
        dets = decode3d(raw, anchors3d, obj_threshold=0.5)
        assert len(dets) == 1
        err = max(max(abs(np.array(dets[0].box.center) - center)),
                  max(abs(np.array(dets[0].box.size) - size)))
        worst_err = max(worst_err, err)
    anchors2d = AnchorSet(((2.0, 4.0), (5.0, 2.5)), 2, 0.0)
    grid = CartesianGrid()
    for _ in range(20):
        x = float(rng.uniform(2, grid.r_max - 2))
        z = float(rng.uniform(-grid.r_max + 2, grid.r_max - 2))
        size = (float(rng.uniform(1, 7)), float(rng.uniform(1, 7)))
        box = Box2D((x, z), size, int(rng.integers(0, 6)))
        raw = encode2d([box], anchors2d, grid, 6)
        dets = decode2d(raw, anchors2d, grid, obj_threshold=0.5)
        assert len(dets) == 1
        err = max(max(abs(np.array(dets[0].box.center) - (x, z))),
                  max(abs(np.array(dets[0].box.size) - size)))
        worst_err = max(worst_err, err)
    round_trip_ok = worst_err < 1e-6

    worst_rel = 0.0
    for trial in range(20):
        grid_dims = (3, 3, 2) if trial % 2 == 0 else (4, 3)
        d = len(grid_dims)
        n_anchors, n_classes, n_pos = 2, 3, 3
        raw = rng.normal(0, 1.5, grid_dims + (n_anchors, 2 * d + 1 + n_classes))
        anchor_sizes = rng.uniform(2, 6, (n_anchors, d))
        strides = np.full(d, 16.0)
        cells = set()
        while len(cells) < n_pos:
            cells.add(tuple(int(rng.integers(0, s)) for s in grid_dims)
                      + (int(rng.integers(0, n_anchors)),))
        pos_idx = np.array(sorted(cells), dtype=np.int64)
        frac = rng.uniform(0.1, 0.9, (n_pos, d))
        centers = (pos_idx[:, :d] + frac) * strides
        sizes = anchor_sizes[pos_idx[:, d]] * rng.uniform(0.7, 1.4, (n_pos, d))
        classes = rng.integers(0, n_classes, n_pos)
        grad = head_loss_grad(raw, pos_idx, centers, sizes, classes,
                              anchor_sizes, strides)
        flat, gflat = raw.ravel(), grad.ravel()
        h = 1e-5
        for idx in np.argsort(-np.abs(gflat))[:25]:
            orig = flat[idx]
            flat[idx] = orig + h
            up = head_loss(raw, pos_idx, centers, sizes, classes,
                           anchor_sizes, strides).l_total
            flat[idx] = orig - h
            dn = head_loss(raw, pos_idx, centers, sizes, classes,
                           anchor_sizes, strides).l_total
            flat[idx] = orig
            fd = (up - dn) / (2 * h)
            if max(abs(fd), abs(gflat[idx])) < 1e-6:
                continue
            worst_rel = max(worst_rel, abs(fd - gflat[idx])
                            / max(abs(fd), abs(gflat[idx])))
    grad_ok = worst_rel <= 1e-4

    focal = focal_objectness_loss([0.9], [False])
    focal_ok = abs(focal - 0.018651) <= 1e-6

    _report("decode/loss",
            round_trip_ok and grad_ok and focal_ok,
            f"round-trip err {worst_err:.2e} (< 1e-6), gradient rel err "
            f"{worst_rel:.2e} (<= 1e-4), focal neg {focal:.7f} "
            f"(0.018651 +/- 1e-6)")


# ---------------------------------------------------------------- criterion 7

def test_eval_fixture_and_monotonicity():
    def b2(x, z, cls=0, score=None):
        return Box2D((x, z), (2.0, 2.0), cls, score)

    gts = {"f1": [b2(0, 0)], "f2": [b2(10, 0)], "f3": [b2(20, 0)],
           "f4": [b2(30, 0)], "f5": [b2(40, 0), b2(60, 0, 1)]}
    dets = {"f1": [b2(0, 0, 0, 0.95)], "f2": [b2(10.5, 0, 0, 0.90)],
            "f3": [b2(21.0, 0, 0, 0.80)], "f4": [b2(31.5, 0, 0, 0.70)],
            "f5": [b2(50, 0, 0, 0.60), b2(60, 0, 1, 0.99)]}
    report = evaluate(dets, gts, mode="2d")
    want_map = {0.1: 0.9, 0.3: 0.8, 0.5: 0.7, 0.7: 0.6}
    fixture_ok = all(abs(report.map_[t] - want_map[t]) <= 1e-9 for t in want_map)

    rng = np.random.default_rng(707)
    mono_ok = True
    for _ in range(100):
        g = {}
        d = {}
        for f in range(3):
            g[f"f{f}"] = [b2(float(rng.uniform(0, 20)), float(rng.uniform(0, 20)),
                             int(rng.integers(0, 2)))
                          for _ in range(int(rng.integers(1, 4)))]
            d[f"f{f}"] = [b2(float(rng.uniform(0, 20)), float(rng.uniform(0, 20)),
                             int(rng.integers(0, 2)), float(rng.random()))
                          for _ in range(int(rng.integers(0, 6)))]
        rep = evaluate(d, g, mode="2d")
        if not (rep.map_[0.7] <= rep.map_[0.5] + 1e-12
                and rep.map_[0.5] <= rep.map_[0.3] + 1e-12
                and rep.map_[0.3] <= rep.map_[0.1] + 1e-12):
            mono_ok = False
    _report("eval fixture + monotonicity", fixture_ok and mono_ok,
            f"mAP at 0.1/0.3/0.5/0.7 = "
            f"{[round(report.map_[t], 9) for t in (0.1, 0.3, 0.5, 0.7)]} "
            f"(hand-computed to 1e-9), monotone on 100 random sets: {mono_ok}")


# ---------------------------------------------------------------- criterion 8

def test_split_shares():
    rng = np.random.default_rng(808)
    probs = np.array([0.30, 0.05, 0.35, 0.04, 0.10, 0.16])
    frames = []
    for i in range(10158):
        n = int(rng.integers(1, 4))
        classes = sorted(int(c) for c in rng.choice(6, size=n, p=probs))
        frames.append((f"frame{i:05d}", classes))
    train, test = split_dataset(frames, (0.8, 0.2), seed=0)
    share = len(test) / 10158
    share_ok = 0.19 <= share <= 0.21

    lookup = dict(frames)
    class_ok = True
    details = []
    for c in range(6):
        n_train = sum(lookup[f].count(c) for f in train)
        n_test = sum(lookup[f].count(c) for f in test)
        s = n_test / (n_train + n_test)
        details.append(round(s, 3))
        if not (0.18 <= s <= 0.22):
            class_ok = False
    _report("dataset split", share_ok and class_ok,
            f"test share {share:.4f} (in [0.19, 0.21]), per-class test shares "
            f"{details} (each in [0.18, 0.22]), 10158 frames")


# ---------------------------------------------------------------- criterion 9

def test_throughput_single_frame():
    adc = synth_adc(Scene((PointTarget(100.0, 0.25, 20.0, 1.0),), 1.0, 1))
    rad_from_adc(adc)  # warm-up
    times = []
    for _ in range(5):
        t0 = time.perf_counter()
        rad_from_adc(adc)
        times.append(time.perf_counter() - t0)
    best = min(times)
    _report("throughput", best < 0.100,
            f"ADC -> RAD in {best * 1e3:.1f} ms single-threaded (< 100 ms)")
