"""Build a small dataset, auto-annotate it, and exercise the review API.

The same flow the browser UI uses: list frames, fetch one with its revision,
edit a box, save with compare-and-set, and observe a conflict on a stale
revision.
"""

import json
import tempfile
import threading
import urllib.error
import urllib.request
from pathlib import Path

from radkit.cli import run_pipeline
from radkit.config import ProjectConfig
from radkit.server import make_server
from radkit.synth import PointTarget, Scene, synth_adc
from radkit.tensorio import write_tensor

workdir = Path(tempfile.mkdtemp(prefix="radkit-demo-"))
(workdir / "adc").mkdir(parents=True)
for i, az in enumerate((-30.0, 15.0)):
    scene = Scene((PointTarget(60.0 + 60 * i, 0.2, az, 20.0),), 0.5, i)
    write_tensor(workdir / "adc" / f"frame{i:03d}.rdt", synth_adc(scene).data)

cfg = ProjectConfig(dataset_root=workdir, port=0)
records, errors = run_pipeline(cfg)
print(f"pipeline: {len(records)} frames annotated, {len(errors)} errors")

server = make_server(cfg)
threading.Thread(target=server.serve_forever, daemon=True).start()
base = f"http://127.0.0.1:{server.server_address[1]}"
print(f"service at {base}")


def get(path):
    with urllib.request.urlopen(base + path) as r:
        return json.loads(r.read())


def put(path, obj):
    req = urllib.request.Request(base + path, method="PUT",
                                 data=json.dumps(obj).encode())
    try:
        with urllib.request.urlopen(req) as r:
            return r.status, json.loads(r.read())
    except urllib.error.HTTPError as err:
        return err.code, json.loads(err.read())


frames = get("/api/frames")
print("frames:", [(f["frame_id"], f["source"], f["revision"]) for f in frames])

frame = get(f"/api/frames/{frames[0]['frame_id']}")
print(f"frame {frame['frame_id']}: {len(frame['boxes3d'])} boxes, "
      f"revision {frame['revision']}")

boxes = frame["boxes3d"]
boxes[0]["center"][0] += 3.0
status, reply = put(f"/api/frames/{frame['frame_id']}",
                    {"revision": frame["revision"], "boxes3d": boxes,
                     "boxes2d": frame["boxes2d"]})
print(f"edit saved: HTTP {status}, new revision {reply['revision']}")

status, reply = put(f"/api/frames/{frame['frame_id']}",
                    {"revision": frame["revision"], "boxes3d": boxes,
                     "boxes2d": frame["boxes2d"]})
print(f"stale save rejected: HTTP {status} (current revision {reply['revision']})")

after = get(f"/api/frames/{frame['frame_id']}")
print(f"source after human edit: {after['source']!r}")

with urllib.request.urlopen(base + f"/api/frames/{frame['frame_id']}/maps/rd.png") as r:
    print(f"RD heatmap: {r.headers['Content-Type']}, {len(r.read())} bytes")

server.shutdown()
server.server_close()
print("done")
