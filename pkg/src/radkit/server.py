"""HTTP service backing the annotation review UI.

Endpoints (all JSON unless noted):

    GET  /api/classes                      class names
    GET  /api/frames                       frame listing with review status
    GET  /api/frames/{id}                  one record plus its revision
    GET  /api/frames/{id}/maps/{kind}.png  heatmap render, kind in rd|ra|cart
    GET  /api/frames/{id}/maps/{kind}.json raw heatmap values
    PUT  /api/frames/{id}                  body {revision, boxes3d, boxes2d}

Edits use optimistic concurrency: every frame carries a revision counter,
a PUT must echo the revision it loaded and gets 409 when it is stale.
Accepted edits set the record source to "human" and are persisted by
rewriting the annotations file to a temporary path and renaming it over the
original, so a crash mid-write never corrupts the file. Any other static
files (the review UI bundle) are served from ``ui_dir``.
"""

from __future__ import annotations

import io
import json
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np

from . import dsp
from .config import ProjectConfig
from .geometry import resample_ra_to_cart
from .tensorio import (AnnotationError, AnnotationRecord, RadCube,
                       read_annotations, read_tensor, record_from_json,
                       record_to_json, write_annotations)


class ConflictError(Exception):
    def __init__(self, current_revision: int):
        super().__init__(f"stale revision, current is {current_revision}")
        self.current_revision = current_revision


class UnknownFrameError(KeyError):
    pass


class AnnotationStore:
    """Annotation records plus per-frame revision counters, file-backed."""

    def __init__(self, path, class_names):
        self.path = Path(path)
        self.class_names = tuple(class_names)
        self._lock = threading.Lock()
        self._records: dict[str, AnnotationRecord] = {}
        self._revisions: dict[str, int] = {}
        if self.path.exists():
            for rec in read_annotations(self.path, self.class_names):
                self._records[rec.frame_id] = rec
                self._revisions[rec.frame_id] = int(rec.extras.get("revision", 0))

    def frame_ids(self) -> list[str]:
        with self._lock:
            return sorted(self._records)

    def listing(self) -> list[dict]:
        with self._lock:
            return [{
                "frame_id": fid,
                "revision": self._revisions[fid],
                "source": self._records[fid].source,
                "n_boxes3d": len(self._records[fid].boxes3d),
                "n_boxes2d": len(self._records[fid].boxes2d),
                "reviewed": self._records[fid].source == "human",
            } for fid in sorted(self._records)]

    def get(self, frame_id: str) -> tuple[AnnotationRecord, int]:
        with self._lock:
            if frame_id not in self._records:
                raise UnknownFrameError(frame_id)
            return self._records[frame_id], self._revisions[frame_id]

    def update(self, frame_id: str, revision: int, boxes3d: list,
               boxes2d: list) -> int:
        """Compare-and-set edit; returns the new revision."""
        with self._lock:
            if frame_id not in self._records:
                raise UnknownFrameError(frame_id)
            current = self._revisions[frame_id]
            if revision != current:
                raise ConflictError(current)
            old = self._records[frame_id]
            new_rev = current + 1
            extras = dict(old.extras)
            extras["revision"] = new_rev
            record = record_from_json({
                "frame_id": frame_id,
                "source": "human",
                "boxes3d": boxes3d,
                "boxes2d": boxes2d,
                "class_names": list(old.class_names),
                **{k: v for k, v in extras.items()},
            }, class_names=self.class_names)
            self._records[frame_id] = record
            self._revisions[frame_id] = new_rev
            self._persist()
            return new_rev

    def _persist(self):
        tmp = self.path.with_suffix(self.path.suffix + ".tmp")
        write_annotations(tmp, [self._records[fid] for fid in sorted(self._records)])
        tmp.replace(self.path)


class MapProvider:
    """Lazily computed display maps (RD, RA, Cartesian) per frame."""

    def __init__(self, cfg: ProjectConfig, max_cached: int = 8):
        self.cfg = cfg
        self._lock = threading.Lock()
        self._cache: dict[str, dict[str, np.ndarray]] = {}
        self._max_cached = max_cached

    def _load_rad(self, frame_id: str) -> RadCube:
        rad_path = self.cfg.rad_dir / f"{frame_id}.rdt"
        if rad_path.exists():
            return RadCube(read_tensor(rad_path).data, stage="complex")
        adc_path = self.cfg.adc_dir / f"{frame_id}.rdt"
        if adc_path.exists():
            from .tensorio import AdcCube
            adc = AdcCube(read_tensor(adc_path).data.astype(np.complex64))
            return dsp.rad_from_adc(adc, self.cfg.window)
        raise UnknownFrameError(frame_id)

    def maps(self, frame_id: str) -> dict[str, np.ndarray]:
        with self._lock:
            if frame_id in self._cache:
                return self._cache[frame_id]
        rad = self._load_rad(frame_id)
        rd = np.log10(dsp.rd_map(rad) + 1e-12)
        ra = np.log10(dsp.ra_map(rad) + 1e-12)
        cart = resample_ra_to_cart(ra, self.cfg.grid, self.cfg.range_bin_m)
        result = {"rd": rd, "ra": ra, "cart": cart}
        with self._lock:
            if len(self._cache) >= self._max_cached:
                self._cache.pop(next(iter(self._cache)))
            self._cache[frame_id] = result
        return result


def _to_png(arr: np.ndarray) -> bytes:
    """Grayscale PNG of a 2D map, min-max scaled per frame."""
    from PIL import Image
    a = np.asarray(arr, dtype=np.float64)
    lo, hi = float(a.min()), float(a.max())
    scaled = np.zeros_like(a) if hi <= lo else (a - lo) / (hi - lo)
    img = Image.fromarray((scaled * 255).astype(np.uint8), mode="L")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


_FRAME_RE = re.compile(r"^/api/frames/([^/]+)$")
_MAP_RE = re.compile(r"^/api/frames/([^/]+)/maps/(rd|ra|cart)\.(png|json)$")

_CONTENT_TYPES = {".html": "text/html", ".js": "application/javascript",
                  ".css": "text/css", ".map": "application/json",
                  ".svg": "image/svg+xml", ".png": "image/png",
                  ".ico": "image/x-icon"}


def make_handler(store: AnnotationStore, maps: MapProvider,
                 class_names: tuple[str, ...], ui_dir: Path | None):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):  # quiet by default
            pass

        def _send(self, code: int, body: bytes, content_type: str):
            self.send_response(code)
            self.send_header("Content-Type", content_type)
            self.send_header("Content-Length", str(len(body)))
            self.send_header("Cache-Control", "no-store")
            self.end_headers()
            self.wfile.write(body)

        def _json(self, code: int, obj):
            self._send(code, json.dumps(obj).encode("utf-8"), "application/json")

        def do_GET(self):
            try:
                self._get()
            except UnknownFrameError:
                self._json(404, {"error": "unknown frame"})
            except Exception as exc:
                self._json(500, {"error": str(exc)})

        def _get(self):
            if self.path == "/api/classes":
                self._json(200, {"class_names": list(class_names)})
                return
            if self.path == "/api/frames":
                self._json(200, store.listing())
                return
            m = _MAP_RE.match(self.path)
            if m:
                fid, kind, fmt = m.groups()
                arr = maps.maps(fid)[kind]
                if fmt == "png":
                    self._send(200, _to_png(arr), "image/png")
                else:
                    self._json(200, {"kind": kind, "shape": list(arr.shape),
                                     "data": arr.tolist()})
                return
            m = _FRAME_RE.match(self.path)
            if m:
                record, revision = store.get(m.group(1))
                obj = record_to_json(record)
                obj["revision"] = revision
                self._json(200, obj)
                return
            self._static()

        def _static(self):
            if ui_dir is None:
                self._json(404, {"error": "not found"})
                return
            rel = self.path.split("?", 1)[0].lstrip("/") or "index.html"
            target = (ui_dir / rel).resolve()
            if not str(target).startswith(str(ui_dir.resolve())) or not target.is_file():
                self._json(404, {"error": "not found"})
                return
            ctype = _CONTENT_TYPES.get(target.suffix, "application/octet-stream")
            self._send(200, target.read_bytes(), ctype)

        def do_PUT(self):
            m = _FRAME_RE.match(self.path)
            if not m:
                self._json(404, {"error": "not found"})
                return
            try:
                length = int(self.headers.get("Content-Length", 0))
                body = json.loads(self.rfile.read(length) or b"{}")
                revision = int(body["revision"])
                new_rev = store.update(m.group(1), revision,
                                       body.get("boxes3d", []),
                                       body.get("boxes2d", []))
                self._json(200, {"revision": new_rev})
            except UnknownFrameError:
                self._json(404, {"error": "unknown frame"})
            except ConflictError as exc:
                self._json(409, {"error": str(exc),
                                 "revision": exc.current_revision})
            except (AnnotationError, KeyError, TypeError, ValueError,
                    json.JSONDecodeError) as exc:
                self._json(400, {"error": f"invalid request: {exc}"})

    return Handler


def make_server(cfg: ProjectConfig, annotations_path=None,
                ui_dir=None) -> ThreadingHTTPServer:
    """Build (but do not start) the review service; useful for tests."""
    path = Path(annotations_path) if annotations_path else cfg.annotations_path
    store = AnnotationStore(path, cfg.class_names)
    maps = MapProvider(cfg)
    handler = make_handler(store, maps, cfg.class_names,
                           Path(ui_dir) if ui_dir else None)
    return ThreadingHTTPServer((cfg.host, cfg.port), handler)


def serve(cfg: ProjectConfig, annotations_path=None, ui_dir=None) -> None:
    """Run the review service until interrupted."""
    server = make_server(cfg, annotations_path, ui_dir)
    host, port = server.server_address[:2]
    print(f"review service on http://{host}:{port}/ "
          f"(annotations: {annotations_path or cfg.annotations_path})")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
