// Client-side frame state: one box list per head, edited in place and
// compared against a baseline snapshot for no-op save detection. The three
// panels all render projections of this single source of truth, so an edit
// made on one panel shows up on the others immediately.

import { FrameRecord, WireBox2, WireBox3 } from './api';

export const RANGE_BINS = 256;
export const AZIMUTH_BINS = 256;
export const DOPPLER_BINS = 64;

export type Selection =
  | { kind: 'box3'; index: number }
  | { kind: 'box2'; index: number }
  | null;

const clamp = (v: number, lo: number, hi: number) =>
  Math.min(hi, Math.max(lo, v));

const mod = (v: number, period: number) => ((v % period) + period) % period;

export class FrameModel {
  readonly frameId: string;
  revision: number;
  source: string;
  boxes3d: WireBox3[];
  boxes2d: WireBox2[];
  selection: Selection = null;
  private baseline: string;

  constructor(record: FrameRecord) {
    this.frameId = record.frame_id;
    this.revision = record.revision;
    this.source = record.source;
    this.boxes3d = record.boxes3d.map((b) => structuredClone(b));
    this.boxes2d = record.boxes2d.map((b) => structuredClone(b));
    this.baseline = this.snapshot();
  }

  private snapshot(): string {
    return JSON.stringify({ b3: this.boxes3d, b2: this.boxes2d });
  }

  isDirty(): boolean {
    return this.snapshot() !== this.baseline;
  }

  /** Call after a successful save: the current state becomes the baseline. */
  committed(newRevision: number): void {
    this.revision = newRevision;
    this.source = 'human';
    this.baseline = this.snapshot();
  }

  selected(): WireBox3 | WireBox2 | null {
    if (!this.selection) return null;
    return this.selection.kind === 'box3'
      ? this.boxes3d[this.selection.index] ?? null
      : this.boxes2d[this.selection.index] ?? null;
  }

  moveBox3(index: number, dRange: number, dAzimuth: number, dDoppler: number): void {
    const b = this.boxes3d[index];
    if (!b) return;
    b.center[0] = clamp(b.center[0] + dRange, 0, RANGE_BINS);
    b.center[1] = clamp(b.center[1] + dAzimuth, 0, AZIMUTH_BINS);
    b.center[2] = mod(b.center[2] + dDoppler, DOPPLER_BINS);
  }

  resizeBox3(index: number, dRange: number, dAzimuth: number, dDoppler: number): void {
    const b = this.boxes3d[index];
    if (!b) return;
    b.size[0] = Math.max(1, b.size[0] + dRange);
    b.size[1] = Math.max(1, b.size[1] + dAzimuth);
    b.size[2] = clamp(b.size[2] + dDoppler, 1, DOPPLER_BINS);
  }

  moveBox2(index: number, dx: number, dz: number): void {
    const b = this.boxes2d[index];
    if (!b) return;
    b.center[0] += dx;
    b.center[1] += dz;
  }

  resizeBox2(index: number, dw: number, dl: number): void {
    const b = this.boxes2d[index];
    if (!b) return;
    b.size[0] = Math.max(0.1, b.size[0] + dw);
    b.size[1] = Math.max(0.1, b.size[1] + dl);
  }

  setClass(classId: number | null): void {
    const b = this.selected();
    if (b) b.class = classId;
  }

  addBox3(center: [number, number, number]): number {
    this.boxes3d.push({
      center: [clamp(center[0], 0, RANGE_BINS), clamp(center[1], 0, AZIMUTH_BINS),
               mod(center[2], DOPPLER_BINS)],
      size: [8, 16, 4],
      class: null,
      score: null,
    });
    this.selection = { kind: 'box3', index: this.boxes3d.length - 1 };
    return this.boxes3d.length - 1;
  }

  addBox2(center: [number, number]): number {
    this.boxes2d.push({
      center: [center[0], center[1]], size: [2, 4], class: null, score: null,
    });
    this.selection = { kind: 'box2', index: this.boxes2d.length - 1 };
    return this.boxes2d.length - 1;
  }

  deleteSelected(): void {
    if (!this.selection) return;
    if (this.selection.kind === 'box3') {
      this.boxes3d.splice(this.selection.index, 1);
    } else {
      this.boxes2d.splice(this.selection.index, 1);
    }
    this.selection = null;
  }

  payload(): { revision: number; boxes3d: WireBox3[]; boxes2d: WireBox2[] } {
    return { revision: this.revision, boxes3d: this.boxes3d, boxes2d: this.boxes2d };
  }
}
