// Heatmap panels with editable box overlays. 3D boxes are edited through
// their two 2D projections: a range-doppler rectangle and a range-azimuth
// rectangle; 2D boxes live on the Cartesian BEV panel. Projection math is
// kept in pure functions so it can be tested without a canvas.

import { WireBox2, WireBox3 } from './api';
import { AZIMUTH_BINS, DOPPLER_BINS, FrameModel, RANGE_BINS, Selection } from './model';

export type PanelKind = 'rd' | 'ra' | 'cart';

export interface Rect {
  x: number;
  y: number;
  w: number;
  h: number;
}

// Display constant for the default grid: 256 range bins at 0.1953 m/bin.
export const R_MAX_M = 256 * 0.1953;

const HANDLE_PX = 8;

/** Range-doppler projection; doppler wraps, so a box crossing the seam
 *  projects to two rectangles. */
export function box3ToRdRects(b: WireBox3, width: number, height: number): Rect[] {
  const sx = width / DOPPLER_BINS;
  const sy = height / RANGE_BINS;
  const y = (b.center[0] - b.size[0] / 2) * sy;
  const h = b.size[0] * sy;
  const d0 = (((b.center[2] - b.size[2] / 2) % DOPPLER_BINS) + DOPPLER_BINS) % DOPPLER_BINS;
  const rects: Rect[] = [];
  if (d0 + b.size[2] <= DOPPLER_BINS) {
    rects.push({ x: d0 * sx, y, w: b.size[2] * sx, h });
  } else {
    rects.push({ x: d0 * sx, y, w: (DOPPLER_BINS - d0) * sx, h });
    rects.push({ x: 0, y, w: (d0 + b.size[2] - DOPPLER_BINS) * sx, h });
  }
  return rects;
}

export function box3ToRaRect(b: WireBox3, width: number, height: number): Rect {
  const sx = width / AZIMUTH_BINS;
  const sy = height / RANGE_BINS;
  return {
    x: (b.center[1] - b.size[1] / 2) * sx,
    y: (b.center[0] - b.size[0] / 2) * sy,
    w: b.size[1] * sx,
    h: b.size[0] * sy,
  };
}

export function box2ToCartRect(b: WireBox2, width: number, height: number,
                               rMax: number = R_MAX_M): Rect {
  const sx = width / rMax;           // horizontal: x forward
  const sy = height / (2 * rMax);    // vertical: z lateral, -rMax at the top
  return {
    x: (b.center[0] - b.size[1] / 2) * sx,
    y: (b.center[1] - b.size[0] / 2 + rMax) * sy,
    w: b.size[1] * sx,
    h: b.size[0] * sy,
  };
}

/** Pixel delta -> model-space delta for the given panel. */
export function pixelDelta(kind: PanelKind, dxPx: number, dyPx: number,
                           width: number, height: number,
                           rMax: number = R_MAX_M): [number, number] {
  switch (kind) {
    case 'rd':
      return [dxPx * DOPPLER_BINS / width, dyPx * RANGE_BINS / height];
    case 'ra':
      return [dxPx * AZIMUTH_BINS / width, dyPx * RANGE_BINS / height];
    case 'cart':
      return [dxPx * rMax / width, dyPx * 2 * rMax / height];
  }
}

const inRect = (r: Rect, x: number, y: number) =>
  x >= r.x && x <= r.x + r.w && y >= r.y && y <= r.y + r.h;

const onHandle = (r: Rect, x: number, y: number) =>
  Math.abs(x - (r.x + r.w)) <= HANDLE_PX && Math.abs(y - (r.y + r.h)) <= HANDLE_PX;

type Drag = { mode: 'move' | 'resize'; lastX: number; lastY: number } | null;

export class Panel {
  private image: HTMLImageElement | null = null;
  private drag: Drag = null;

  constructor(
    readonly kind: PanelKind,
    readonly canvas: HTMLCanvasElement,
    private readonly getModel: () => FrameModel | null,
    private readonly onChange: () => void,
  ) {
    canvas.addEventListener('pointerdown', (e) => this.pointerDown(e));
    canvas.addEventListener('pointermove', (e) => this.pointerMove(e));
    canvas.addEventListener('pointerup', () => (this.drag = null));
    canvas.addEventListener('pointerleave', () => (this.drag = null));
  }

  setImage(img: HTMLImageElement | null): void {
    this.image = img;
    this.draw();
  }

  private rectsFor(model: FrameModel): { rects: Rect[]; sel: Selection }[] {
    const w = this.canvas.width;
    const h = this.canvas.height;
    if (this.kind === 'cart') {
      return model.boxes2d.map((b, i) => ({
        rects: [box2ToCartRect(b, w, h)],
        sel: { kind: 'box2', index: i } as Selection,
      }));
    }
    return model.boxes3d.map((b, i) => ({
      rects: this.kind === 'rd' ? box3ToRdRects(b, w, h) : [box3ToRaRect(b, w, h)],
      sel: { kind: 'box3', index: i } as Selection,
    }));
  }

  draw(classNames: string[] = []): void {
    const ctx = this.canvas.getContext('2d');
    if (!ctx) return;  // jsdom and friends: state still fully testable
    const w = this.canvas.width;
    const h = this.canvas.height;
    ctx.clearRect(0, 0, w, h);
    ctx.fillStyle = '#10141c';
    ctx.fillRect(0, 0, w, h);
    if (this.image && this.image.complete && this.image.naturalWidth > 0) {
      ctx.imageSmoothingEnabled = false;
      ctx.drawImage(this.image, 0, 0, w, h);
    }
    const model = this.getModel();
    if (!model) return;
    for (const { rects, sel } of this.rectsFor(model)) {
      const selected = JSON.stringify(sel) === JSON.stringify(model.selection);
      ctx.lineWidth = selected ? 2.5 : 1.5;
      ctx.strokeStyle = selected ? '#ffd24a' : '#36d399';
      for (const r of rects) {
        ctx.strokeRect(r.x, r.y, r.w, r.h);
      }
      const first = rects[0];
      const box = sel!.kind === 'box3'
        ? model.boxes3d[sel!.index] : model.boxes2d[sel!.index];
      const label = box.class === null
        ? '?' : classNames[box.class] ?? String(box.class);
      ctx.font = '12px sans-serif';
      ctx.fillStyle = selected ? '#ffd24a' : '#36d399';
      ctx.fillText(label, first.x + 2, Math.max(11, first.y - 3));
      if (selected) {
        ctx.fillRect(first.x + first.w - 4, first.y + first.h - 4, 8, 8);
      }
    }
  }

  /** Topmost box whose projection contains the point. */
  hitTest(x: number, y: number): { sel: Selection; resize: boolean } | null {
    const model = this.getModel();
    if (!model) return null;
    const entries = this.rectsFor(model);
    // check the selected box's resize handle first
    for (const { rects, sel } of entries) {
      if (JSON.stringify(sel) === JSON.stringify(model.selection)
          && rects.some((r) => onHandle(r, x, y))) {
        return { sel, resize: true };
      }
    }
    for (let i = entries.length - 1; i >= 0; i--) {
      if (entries[i].rects.some((r) => inRect(r, x, y))) {
        return { sel: entries[i].sel, resize: false };
      }
    }
    return null;
  }

  private eventPos(e: PointerEvent): [number, number] {
    const rect = this.canvas.getBoundingClientRect();
    const sx = rect.width > 0 ? this.canvas.width / rect.width : 1;
    const sy = rect.height > 0 ? this.canvas.height / rect.height : 1;
    return [(e.clientX - rect.left) * sx, (e.clientY - rect.top) * sy];
  }

  private pointerDown(e: PointerEvent): void {
    const model = this.getModel();
    if (!model) return;
    const [x, y] = this.eventPos(e);
    const hit = this.hitTest(x, y);
    model.selection = hit ? hit.sel : null;
    this.drag = hit ? { mode: hit.resize ? 'resize' : 'move', lastX: x, lastY: y } : null;
    this.onChange();
  }

  private pointerMove(e: PointerEvent): void {
    const model = this.getModel();
    if (!model || !this.drag || !model.selection) return;
    const [x, y] = this.eventPos(e);
    const [du, dv] = pixelDelta(this.kind, x - this.drag.lastX, y - this.drag.lastY,
                                this.canvas.width, this.canvas.height);
    this.applyDelta(model, du, dv, this.drag.mode);
    this.drag.lastX = x;
    this.drag.lastY = y;
    this.onChange();
  }

  applyDelta(model: FrameModel, du: number, dv: number,
             mode: 'move' | 'resize'): void {
    const sel = model.selection;
    if (!sel) return;
    if (sel.kind === 'box2') {
      if (this.kind !== 'cart') return;
      if (mode === 'move') model.moveBox2(sel.index, du, dv);
      else model.resizeBox2(sel.index, dv, du);  // (w, l) = (z, x) extents
      return;
    }
    if (this.kind === 'rd') {
      if (mode === 'move') model.moveBox3(sel.index, dv, 0, du);
      else model.resizeBox3(sel.index, dv, 0, du);
    } else if (this.kind === 'ra') {
      if (mode === 'move') model.moveBox3(sel.index, dv, du, 0);
      else model.resizeBox3(sel.index, dv, du, 0);
    }
  }
}
