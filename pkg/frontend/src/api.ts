// Typed client for the annotation review service. All editing goes through
// PUT /api/frames/{id} with compare-and-set on the frame's revision counter.

export interface WireBox3 {
  center: [number, number, number];
  size: [number, number, number];
  class: number | null;
  score: number | null;
}

export interface WireBox2 {
  center: [number, number];
  size: [number, number];
  class: number | null;
  score: number | null;
}

export interface FrameSummary {
  frame_id: string;
  revision: number;
  source: string;
  n_boxes3d: number;
  n_boxes2d: number;
  reviewed: boolean;
}

export interface FrameRecord {
  frame_id: string;
  source: string;
  revision: number;
  boxes3d: WireBox3[];
  boxes2d: WireBox2[];
  class_names?: string[];
}

export class ConflictError extends Error {
  constructor(public readonly currentRevision: number) {
    super(`stale revision, server is at ${currentRevision}`);
    this.name = 'ConflictError';
  }
}

export type MapKind = 'rd' | 'ra' | 'cart';

export class ApiClient {
  constructor(private readonly baseUrl: string = '') {}

  private async getJson<T>(path: string): Promise<T> {
    const resp = await fetch(this.baseUrl + path);
    if (!resp.ok) {
      throw new Error(`GET ${path} failed: ${resp.status}`);
    }
    return (await resp.json()) as T;
  }

  classNames(): Promise<{ class_names: string[] }> {
    return this.getJson('/api/classes');
  }

  listFrames(): Promise<FrameSummary[]> {
    return this.getJson('/api/frames');
  }

  getFrame(frameId: string): Promise<FrameRecord> {
    return this.getJson(`/api/frames/${encodeURIComponent(frameId)}`);
  }

  mapUrl(frameId: string, kind: MapKind): string {
    return `${this.baseUrl}/api/frames/${encodeURIComponent(frameId)}/maps/${kind}.png`;
  }

  /** Save edited boxes; resolves to the new revision, rejects with
   *  ConflictError when someone else saved first. */
  async putFrame(frameId: string, revision: number, boxes3d: WireBox3[],
                 boxes2d: WireBox2[]): Promise<number> {
    const resp = await fetch(
      `${this.baseUrl}/api/frames/${encodeURIComponent(frameId)}`,
      {
        method: 'PUT',
        headers: { 'Content-Type': 'application/json' },
        body: JSON.stringify({ revision, boxes3d, boxes2d }),
      });
    const body = await resp.json();
    if (resp.status === 409) {
      throw new ConflictError(body.revision as number);
    }
    if (!resp.ok) {
      throw new Error(`save failed (${resp.status}): ${body.error ?? 'unknown'}`);
    }
    return body.revision as number;
  }
}
