"""Command-line entry point wiring all stages, plus the review service.

Verbs: synth, process, cfar, annotate, anchors, decode, loss, eval, split,
pipeline, serve. Global flags: --config, --seed, --jobs.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import annotate as ann
from . import cfar as cfar_mod
from . import detect, dsp, evaluation, losses, synth
from .anchors import AnchorSet, fit_anchors
from .config import ProjectConfig, config_from_json, load_config
from .tensorio import (AdcCube, AnnotationRecord, NormalizationStats, RadCube,
                       read_annotations, read_tensor, write_annotations,
                       write_tensor)


def _load_json(path):
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def _dump_json(path, obj):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, indent=2)
        f.write("\n")


def _read_adc(path) -> AdcCube:
    t = read_tensor(path)
    return AdcCube(t.data.astype(np.complex64))


def _read_rad(path) -> RadCube:
    t = read_tensor(path)
    return RadCube(t.data, stage="complex")


def _load_stereo(path):
    """Labeled BEV points from a stereo-labels JSON file.

    The file is either a list of {"xyz": [x, y, z], "class": int} entries or
    an object {"points": [...], "projection": [[...], [...]]}. With a
    projection the 3D points are mapped through it; otherwise (x, z) of the
    raw coordinates are taken as already being in the radar BEV frame.
    """
    obj = _load_json(path)
    if isinstance(obj, list):
        points, proj = obj, None
    else:
        points = obj.get("points", [])
        proj = obj.get("projection")
    xyz = np.array([p["xyz"] for p in points], dtype=np.float64).reshape(-1, 3)
    classes = [int(p["class"]) for p in points]
    if proj is not None:
        bev = ann.ProjectionMatrix(np.asarray(proj, dtype=np.float64)).apply(xyz)
    else:
        bev = xyz[:, [0, 2]]
    return [((float(b[0]), float(b[1])), c) for b, c in zip(bev, classes)]


def annotate_frame(rad: RadCube, cfg: ProjectConfig, frame_id: str,
                   stereo_points=None) -> AnnotationRecord:
    """RD -> CFAR -> connect -> instances -> boxes -> labels for one frame."""
    rd = dsp.rd_map(rad)
    mask = cfar_mod.cfar_2d(rd, cfg.cfar, cfg.cfar_pfa)
    mask = ann.connect_patterns(mask, cfg.connect_gap)
    instances = ann.extract_instances(rad, mask, cfg.azimuth_rel_threshold,
                                      cfg.dbscan, frame_id)
    if stereo_points:
        instances = ann.transfer_labels(instances, stereo_points,
                                        cfg.label_margin_m, cfg.range_bin_m)
    boxes3d, boxes2d = [], []
    for inst in instances:
        b3, b2 = ann.instance_to_boxes(inst, cfg.range_bin_m)
        boxes3d.append(b3)
        boxes2d.append(b2)
    return AnnotationRecord(frame_id, tuple(boxes3d), tuple(boxes2d),
                            source="auto", class_names=cfg.class_names)


def run_pipeline(cfg: ProjectConfig, frame_ids: list[str] | None = None,
                 jobs: int | None = None) -> tuple[list[AnnotationRecord], dict[str, str]]:
    """Run the auto-annotation chain over a dataset directory.

    Reads {root}/adc/{frame}.rdt (plus optional {root}/stereo/{frame}.json
    labels), writes {root}/annotations.jsonl with source "auto" and
    {root}/stats.json with the dataset log-magnitude statistics. Frames that
    fail are reported and skipped; the rest still complete. Re-running with
    identical inputs rewrites identical files.
    """
    if frame_ids is None:
        frame_ids = sorted(p.stem for p in cfg.adc_dir.glob("*.rdt"))
    errors: dict[str, str] = {}
    partials: dict[str, tuple[float, float, int]] = {}
    records: dict[str, AnnotationRecord] = {}

    def process_frame(fid: str):
        adc = _read_adc(cfg.adc_dir / f"{fid}.rdt")
        rad = dsp.rad_from_adc(adc, cfg.window)
        stereo_path = cfg.stereo_dir / f"{fid}.json"
        stereo = _load_stereo(stereo_path) if stereo_path.exists() else None
        record = annotate_frame(rad, cfg, fid, stereo)
        if cfg.emit_rad:
            cfg.rad_dir.mkdir(parents=True, exist_ok=True)
            write_tensor(cfg.rad_dir / f"{fid}.rdt", rad.data)
        logmag = dsp.log_magnitude(rad).data.astype(np.float64)
        mean_b = float(logmag.mean())
        return record, (mean_b, float(((logmag - mean_b) ** 2).sum()), logmag.size)

    n_jobs = jobs or cfg.n_jobs
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        futures = {fid: pool.submit(process_frame, fid) for fid in frame_ids}
        for fid, fut in futures.items():
            try:
                record, partial = fut.result()
            except Exception as exc:
                errors[fid] = f"{type(exc).__name__}: {exc}"
                continue
            records[fid] = record
            partials[fid] = partial

    if records:
        write_annotations(cfg.annotations_path,
                          [records[fid] for fid in sorted(records)])
        # Merge per-frame moments in frame-id order so reruns are bit-stable.
        mean, m2, count = 0.0, 0.0, 0
        for fid in sorted(partials):
            mean_b, m2_b, n_b = partials[fid]
            if count == 0:
                mean, m2, count = mean_b, m2_b, n_b
            else:
                delta = mean_b - mean
                total = count + n_b
                mean += delta * n_b / total
                m2 += m2_b + delta * delta * count * n_b / total
                count = total
        if m2 > 0:
            stats = NormalizationStats(mean, m2 / count, count)
            _dump_json(cfg.dataset_root / "stats.json", stats.to_json())
    return [records[fid] for fid in sorted(records)], errors


def _annotation_config(args) -> ProjectConfig:
    if getattr(args, "cfg", None):
        return config_from_json(_load_json(args.cfg), Path(args.cfg).parent)
    if args.config:
        return load_config(args.config)
    return ProjectConfig()


def cmd_synth(args) -> int:
    scene = synth.load_scene(args.scene)
    if args.seed is not None:
        scene = synth.Scene(scene.targets, scene.noise_sigma, args.seed)
    adc = synth.synth_adc(scene)
    write_tensor(args.out, adc.data)
    print(f"wrote {args.out}: {len(scene.targets)} targets, "
          f"noise_sigma={scene.noise_sigma}")
    return 0


def cmd_process(args) -> int:
    cfg = load_config(args.config) if args.config else ProjectConfig()
    adc = _read_adc(args.infile)
    rad = dsp.rad_from_adc(adc, cfg.window)
    if args.emit_rd:
        write_tensor(args.emit_rd, dsp.rd_map(rad).astype(np.float32))
    if args.stats and Path(args.stats).exists():
        stats = NormalizationStats.from_json(_load_json(args.stats))
        out_cube = dsp.normalize(dsp.log_magnitude(rad), stats,
                                 cfg.normalize_by_std)
        write_tensor(args.out, out_cube.data.astype(np.float32))
        print(f"wrote {args.out} (normalized with {args.stats})")
    elif args.stats:
        logmag = dsp.log_magnitude(rad)
        stats = dsp.compute_stats([logmag])
        _dump_json(args.stats, stats.to_json())
        write_tensor(args.out, logmag.data)
        print(f"wrote {args.out} (log magnitude); single-frame stats -> {args.stats}")
    else:
        write_tensor(args.out, rad.data)
        print(f"wrote {args.out} (complex RAD)")
    return 0


def cmd_cfar(args) -> int:
    cfg = ProjectConfig() if not args.cfg else config_from_json(
        _load_json(args.cfg), Path(args.cfg).parent)
    rd = read_tensor(args.infile).data.astype(np.float64)
    mask = cfar_mod.cfar_2d(rd, cfg.cfar, cfg.cfar_pfa)
    write_tensor(args.out, mask.astype(np.float32))
    print(f"wrote {args.out}: {int(mask.sum())} detections")
    return 0


def cmd_annotate(args) -> int:
    cfg = _annotation_config(args)
    rad = _read_rad(args.rad)
    stereo = _load_stereo(args.labels) if args.labels else None
    frame_id = args.frame_id or Path(args.rad).stem
    record = annotate_frame(rad, cfg, frame_id, stereo)
    write_annotations(args.out, [record])
    print(f"wrote {args.out}: {len(record.boxes3d)} instances")
    return 0


def cmd_anchors(args) -> int:
    records = read_annotations(args.annos)
    if args.dim == 3:
        sizes = [b.size for r in records for b in r.boxes3d]
    else:
        sizes = [b.size for r in records for b in r.boxes2d]
    anchor_set = fit_anchors(sizes, k=args.k, seed=args.seed or 0)
    _dump_json(args.out, anchor_set.to_json())
    print(f"wrote {args.out}: k={anchor_set.k}, "
          f"mean_error={anchor_set.mean_error:.4f}")
    return 0


def cmd_decode(args) -> int:
    cfg = load_config(args.config) if args.config else ProjectConfig()
    anchor_set = AnchorSet.from_json(_load_json(args.anchors))
    if args.head3d:
        raw = read_tensor(args.head3d).data
        dets = detect.decode3d(raw, anchor_set, cfg.obj_threshold)
        if not args.no_nms:
            dets = detect.postprocess(dets, cfg.nms3d)
        frame_id = args.frame_id or Path(args.head3d).stem
        record = AnnotationRecord(frame_id, tuple(d.box for d in dets), (),
                                  source="model", class_names=cfg.class_names)
    else:
        raw = read_tensor(args.head2d).data
        dets = detect.decode2d(raw, anchor_set, cfg.grid, cfg.obj_threshold)
        if not args.no_nms:
            dets = detect.postprocess(dets, cfg.nms2d)
        frame_id = args.frame_id or Path(args.head2d).stem
        record = AnnotationRecord(frame_id, (), tuple(d.box for d in dets),
                                  source="model", class_names=cfg.class_names)
    write_annotations(args.out, [record])
    print(f"wrote {args.out}: {len(dets)} detections")
    return 0


def cmd_loss(args) -> int:
    cfg = load_config(args.config) if args.config else ProjectConfig()
    anchor_set = AnchorSet.from_json(_load_json(args.anchors))
    raw = read_tensor(args.pred).data.astype(np.float64)
    records = read_annotations(args.target, cfg.class_names)
    if not records:
        raise SystemExit("target file holds no records")
    rec = records[0]
    if anchor_set.dim == 3:
        pos, centers, sizes, classes = detect.build_targets3d(
            list(rec.boxes3d), anchor_set)
        strides, origin = detect.STRIDES3D, None
    else:
        pos, centers, sizes, classes = detect.build_targets2d(
            list(rec.boxes2d), anchor_set, cfg.grid)
        strides, origin = detect.head2d_geometry(cfg.grid)
    breakdown = losses.head_loss(raw, pos, centers, sizes, classes,
                                 anchor_set.as_array(), strides, origin)
    print(json.dumps(breakdown.to_json(), indent=2))
    return 0


def _boxes_by_frame(records, mode):
    attr = "boxes3d" if mode == "3d" else "boxes2d"
    return {r.frame_id: list(getattr(r, attr)) for r in records}


def cmd_eval(args) -> int:
    cfg = load_config(args.config) if args.config else ProjectConfig()
    dets = read_annotations(args.dets, cfg.class_names)
    gts = read_annotations(args.gt, cfg.class_names)
    report = evaluation.evaluate(_boxes_by_frame(dets, args.mode),
                               _boxes_by_frame(gts, args.mode),
                               mode=args.mode,
                               thresholds=cfg.eval_thresholds,
                               class_names=cfg.class_names)
    obj = report.to_json()
    if args.out:
        _dump_json(args.out, obj)
    print(json.dumps(obj["map"], indent=2))
    return 0


def cmd_split(args) -> int:
    records = read_annotations(args.annos)
    frames = [(r.frame_id,
               [b.class_id for b in r.boxes3d if b.class_id is not None]
               or [b.class_id for b in r.boxes2d if b.class_id is not None])
              for r in records]
    train, test = evaluation.split_dataset(frames, tuple(args.ratios),
                                         args.seed or 0)
    _dump_json(args.out, {"train": train, "test": test})
    print(f"wrote {args.out}: {len(train)} train / {len(test)} test")
    return 0


def cmd_pipeline(args) -> int:
    cfg = load_config(args.config)
    records, errors = run_pipeline(cfg, args.frames or None, args.jobs)
    for fid, msg in sorted(errors.items()):
        print(f"frame {fid}: {msg}", file=sys.stderr)
    print(f"annotated {len(records)} frames "
          f"({len(errors)} failed) -> {cfg.annotations_path}")
    return 0 if not errors else 2


def cmd_serve(args) -> int:
    import dataclasses

    from .server import serve
    cfg = load_config(args.config)
    if args.port:
        cfg = dataclasses.replace(cfg, port=args.port)
    serve(cfg, annotations_path=args.annotations, ui_dir=args.ui)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="radkit",
        description="FMCW radar perception toolkit")
    parser.add_argument("--config", help="project config JSON")
    parser.add_argument("--seed", type=int, default=None, help="random seed")
    parser.add_argument("--jobs", type=int, default=None,
                        help="worker threads for frame-parallel stages")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="render a synthetic scene to an ADC cube")
    p.add_argument("--scene", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("process", help="ADC -> RAD processing")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--stats", help="stats JSON: applied if it exists, "
                                   "else computed from this frame and written")
    p.add_argument("--emit-rd", help="also write the range-doppler map here")
    p.set_defaults(fn=cmd_process)

    p = sub.add_parser("cfar", help="CFAR detection over a range-doppler map")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--cfg", help="config JSON with a 'cfar' section")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_cfar)

    p = sub.add_parser("annotate", help="auto-annotate one RAD cube")
    p.add_argument("--rad", required=True)
    p.add_argument("--cfg", help="config JSON (cfar/dbscan/threshold sections)")
    p.add_argument("--labels", help="stereo labels JSON")
    p.add_argument("--frame-id")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_annotate)

    p = sub.add_parser("anchors", help="fit K-means anchors from annotations")
    p.add_argument("--annos", required=True)
    p.add_argument("--dim", type=int, choices=(2, 3), default=3)
    p.add_argument("--k", type=int, default=6)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_anchors)

    p = sub.add_parser("decode", help="decode exported head tensors to boxes")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--head3d")
    group.add_argument("--head2d")
    p.add_argument("--anchors", required=True)
    p.add_argument("--frame-id")
    p.add_argument("--no-nms", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_decode)

    p = sub.add_parser("loss", help="loss breakdown of a head tensor vs targets")
    p.add_argument("--pred", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--anchors", required=True)
    p.set_defaults(fn=cmd_loss)

    p = sub.add_parser("eval", help="AP/mAP report")
    p.add_argument("--dets", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--mode", choices=("3d", "2d"), default="3d")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("split", help="class-stratified dataset split")
    p.add_argument("--annos", required=True)
    p.add_argument("--ratios", type=float, nargs=2, default=(0.8, 0.2))
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_split)

    p = sub.add_parser("pipeline", help="auto-annotate a dataset directory")
    p.add_argument("frames", nargs="*", help="frame ids (default: every ADC file)")
    p.set_defaults(fn=cmd_pipeline)

    p = sub.add_parser("serve", help="run the annotation review service")
    p.add_argument("--port", type=int)
    p.add_argument("--annotations", help="annotations JSONL override")
    p.add_argument("--ui", help="directory of static UI assets")
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "pipeline" and not args.config:
        print("pipeline requires --config", file=sys.stderr)
        return 1
    if args.command == "serve" and not args.config:
        print("serve requires --config", file=sys.stderr)
        return 1
    try:
        return args.fn(args)
    except Exception as exc:  # surface a clean error, not a stack dump
        if args.command in ("pipeline",):
            traceback.print_exc()
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
