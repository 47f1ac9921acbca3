"""Project configuration: one JSON document wiring all processing stages."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .annotate import DbscanConfig
from .cfar import CfarConfig
from .evaluation import IOU_THRESHOLDS
from .geometry import CartesianGrid, RANGE_BIN_METERS
from .tensorio import DEFAULT_CLASSES


@dataclass(frozen=True)
class ProjectConfig:
    dataset_root: Path = Path(".")
    class_names: tuple[str, ...] = DEFAULT_CLASSES
    range_bin_m: float = RANGE_BIN_METERS
    window: str | None = None
    normalize_by_std: bool = False
    cfar: CfarConfig = field(default_factory=CfarConfig)
    cfar_pfa: float = 1e-3
    connect_gap: int = 1
    azimuth_rel_threshold: float = 0.5
    dbscan: DbscanConfig = field(default_factory=DbscanConfig)
    label_margin_m: float = 0.5
    anchor_k: int = 6
    obj_threshold: float = 0.5
    nms3d: float = 0.1
    nms2d: float = 0.3
    eval_thresholds: tuple[float, ...] = IOU_THRESHOLDS
    grid: CartesianGrid = field(default_factory=CartesianGrid)
    emit_rad: bool = False
    host: str = "127.0.0.1"
    port: int = 8780
    jobs: int | None = None

    @property
    def adc_dir(self) -> Path:
        return self.dataset_root / "adc"

    @property
    def rad_dir(self) -> Path:
        return self.dataset_root / "rad"

    @property
    def stereo_dir(self) -> Path:
        return self.dataset_root / "stereo"

    @property
    def annotations_path(self) -> Path:
        return self.dataset_root / "annotations.jsonl"

    @property
    def n_jobs(self) -> int:
        return self.jobs if self.jobs else (os.cpu_count() or 1)


def _cfar_from_json(obj: dict) -> CfarConfig:
    return CfarConfig(
        variant=obj.get("variant", "ca"),
        train=tuple(obj.get("train", (8, 4))),
        guard=tuple(obj.get("guard", (2, 2))),
        alpha=obj.get("alpha"),
        os_rank=float(obj.get("os_rank", 0.75)),
    )


def _dbscan_from_json(obj: dict) -> DbscanConfig:
    return DbscanConfig(
        eps=float(obj.get("eps", 3.0)),
        min_pts=int(obj.get("min_pts", 4)),
        axis_scale=tuple(obj.get("axis_scale", (1.0, 1.0, 2.0))),
    )


def config_from_json(obj: dict, base_dir: Path = Path(".")) -> ProjectConfig:
    root = Path(obj.get("dataset_root", "."))
    if not root.is_absolute():
        root = base_dir / root
    if not root.exists():
        raise FileNotFoundError(f"dataset_root {root} does not exist")
    grid_obj = obj.get("grid", {})
    depth = int(grid_obj.get("depth_cells", 256))
    return ProjectConfig(
        dataset_root=root,
        class_names=tuple(obj.get("class_names", DEFAULT_CLASSES)),
        range_bin_m=float(obj.get("range_bin_m", RANGE_BIN_METERS)),
        window=obj.get("window"),
        normalize_by_std=bool(obj.get("normalize_by_std", False)),
        cfar=_cfar_from_json(obj.get("cfar", {})),
        cfar_pfa=float(obj.get("cfar_pfa", 1e-3)),
        connect_gap=int(obj.get("connect_gap", 1)),
        azimuth_rel_threshold=float(obj.get("azimuth_rel_threshold", 0.5)),
        dbscan=_dbscan_from_json(obj.get("dbscan", {})),
        label_margin_m=float(obj.get("label_margin_m", 0.5)),
        anchor_k=int(obj.get("anchor_k", 6)),
        obj_threshold=float(obj.get("obj_threshold", 0.5)),
        nms3d=float(obj.get("nms3d", 0.1)),
        nms2d=float(obj.get("nms2d", 0.3)),
        eval_thresholds=tuple(obj.get("eval_thresholds", IOU_THRESHOLDS)),
        grid=CartesianGrid(depth, int(grid_obj.get("width_cells", 2 * depth)),
                           float(grid_obj.get("meters_per_cell",
                                              obj.get("range_bin_m", RANGE_BIN_METERS)))),
        emit_rad=bool(obj.get("emit_rad", False)),
        host=obj.get("host", "127.0.0.1"),
        port=int(obj.get("port", 8780)),
        jobs=obj.get("jobs"),
    )


def load_config(path) -> ProjectConfig:
    path = Path(path)
    with open(path, "r", encoding="utf-8") as f:
        return config_from_json(json.load(f), base_dir=path.parent)
