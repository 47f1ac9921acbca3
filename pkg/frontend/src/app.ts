// The review application: step through frames, inspect the RD/RA/Cartesian
// heatmaps with box overlays, move/resize/create/delete boxes, assign
// classes, and save through the compare-and-set API. A stale save (someone
// else edited the frame) surfaces a conflict prompt offering a reload.

import { ApiClient, ConflictError, FrameSummary } from './api';
import { FrameModel } from './model';
import { Panel } from './panels';

const PANEL_SIZES: Record<string, [number, number]> = {
  rd: [192, 512],
  ra: [512, 512],
  cart: [256, 512],
};

export class App {
  readonly api: ApiClient;
  model: FrameModel | null = null;
  frames: FrameSummary[] = [];
  current = -1;
  classNames: string[] = [];
  panels: Panel[] = [];

  readonly rootEl: HTMLElement;
  private els: Record<string, HTMLElement> = {};

  constructor(root: HTMLElement, baseUrl = '') {
    this.rootEl = root;
    this.api = new ApiClient(baseUrl);
  }

  async init(): Promise<void> {
    this.buildDom();
    this.classNames = (await this.api.classNames()).class_names;
    this.fillClassSelect();
    this.frames = await this.api.listFrames();
    if (this.frames.length) {
      await this.gotoFrame(0);
    } else {
      this.setStatus('no frames in the annotation set');
    }
  }

  private buildDom(): void {
    this.rootEl.innerHTML = `
      <header class="bar">
        <button id="prev" title="previous frame">&#9664;</button>
        <button id="next" title="next frame">&#9654;</button>
        <span id="frame-label">-</span>
        <span id="source-badge" class="badge">-</span>
        <span id="revision">rev -</span>
        <select id="class-select" disabled></select>
        <button id="add3d">+3D box</button>
        <button id="add2d">+2D box</button>
        <button id="delete" disabled>delete</button>
        <button id="save" disabled>save</button>
        <span id="status"></span>
      </header>
      <div id="conflict" class="conflict" hidden>
        <span>This frame changed on the server while you edited it.</span>
        <button id="reload">Reload frame</button>
      </div>
      <main class="panels">
        <figure><canvas id="rd"></canvas><figcaption>range-doppler</figcaption></figure>
        <figure><canvas id="ra"></canvas><figcaption>range-azimuth</figcaption></figure>
        <figure><canvas id="cart"></canvas><figcaption>Cartesian BEV</figcaption></figure>
      </main>`;
    for (const id of ['prev', 'next', 'frame-label', 'source-badge', 'revision',
                      'class-select', 'add3d', 'add2d', 'delete', 'save',
                      'status', 'conflict', 'reload']) {
      this.els[id] = this.rootEl.querySelector(`#${id}`) as HTMLElement;
    }
    for (const kind of ['rd', 'ra', 'cart'] as const) {
      const canvas = this.rootEl.querySelector(`#${kind}`) as HTMLCanvasElement;
      [canvas.width, canvas.height] = PANEL_SIZES[kind];
      this.panels.push(new Panel(kind, canvas, () => this.model,
                                 () => this.refresh()));
    }
    this.els['prev'].addEventListener('click', () => void this.step(-1));
    this.els['next'].addEventListener('click', () => void this.step(1));
    this.els['save'].addEventListener('click', () => void this.save());
    this.els['reload'].addEventListener('click', () => void this.reload());
    this.els['delete'].addEventListener('click', () => {
      this.model?.deleteSelected();
      this.refresh();
    });
    this.els['add3d'].addEventListener('click', () => {
      this.model?.addBox3([128, 128, 32]);
      this.refresh();
    });
    this.els['add2d'].addEventListener('click', () => {
      this.model?.addBox2([25, 0]);
      this.refresh();
    });
    this.els['class-select'].addEventListener('change', () => {
      const v = (this.els['class-select'] as HTMLSelectElement).value;
      this.model?.setClass(v === '' ? null : Number(v));
      this.refresh();
    });
    this.rootEl.ownerDocument.addEventListener('keydown', (e) => {
      if (e.key === 'ArrowRight' || e.key === 'n') void this.step(1);
      if (e.key === 'ArrowLeft' || e.key === 'p') void this.step(-1);
    });
  }

  private fillClassSelect(): void {
    const sel = this.els['class-select'] as HTMLSelectElement;
    sel.innerHTML = '<option value="">(no class)</option>'
      + this.classNames.map((n, i) => `<option value="${i}">${n}</option>`).join('');
  }

  async gotoFrame(index: number): Promise<void> {
    if (index < 0 || index >= this.frames.length) return;
    this.current = index;
    const record = await this.api.getFrame(this.frames[index].frame_id);
    this.model = new FrameModel(record);
    this.hideConflict();
    this.loadMaps(record.frame_id);
    this.refresh();
  }

  private loadMaps(frameId: string): void {
    this.panels.forEach((panel) => {
      const img = new Image();
      img.onload = () => panel.setImage(img);
      img.src = this.api.mapUrl(frameId, panel.kind);
    });
  }

  async step(direction: number): Promise<void> {
    if (this.model?.isDirty()
        && !this.confirmDiscard('Discard unsaved edits on this frame?')) {
      return;
    }
    await this.gotoFrame(this.current + direction);
  }

  confirmDiscard(message: string): boolean {
    const w = this.rootEl.ownerDocument.defaultView;
    return w && typeof w.confirm === 'function' ? w.confirm(message) : true;
  }

  /** Save the frame; a no-op edit issues no request at all. */
  async save(): Promise<void> {
    if (!this.model) return;
    if (!this.model.isDirty()) {
      this.setStatus('nothing to save');
      return;
    }
    const { revision, boxes3d, boxes2d } = this.model.payload();
    try {
      const newRev = await this.api.putFrame(this.model.frameId, revision,
                                             boxes3d, boxes2d);
      this.model.committed(newRev);
      this.frames[this.current].revision = newRev;
      this.frames[this.current].source = 'human';
      this.setStatus(`saved revision ${newRev}`);
      this.hideConflict();
    } catch (err) {
      if (err instanceof ConflictError) {
        this.showConflict();
      } else {
        // network trouble: keep the edits, let the reviewer retry
        this.setStatus(`save failed, edits kept: ${(err as Error).message}`);
      }
    }
    this.refresh();
  }

  async reload(): Promise<void> {
    await this.gotoFrame(this.current);
  }

  conflictVisible(): boolean {
    return !this.els['conflict'].hidden;
  }

  private showConflict(): void {
    this.els['conflict'].hidden = false;
  }

  private hideConflict(): void {
    this.els['conflict'].hidden = true;
  }

  private setStatus(text: string): void {
    this.els['status'].textContent = text;
  }

  refresh(): void {
    const m = this.model;
    this.els['frame-label'].textContent = m
      ? `${m.frameId} (${this.current + 1}/${this.frames.length})` : '-';
    this.els['source-badge'].textContent = m ? m.source : '-';
    this.els['source-badge'].className = `badge badge-${m?.source ?? 'none'}`;
    this.els['revision'].textContent = m ? `rev ${m.revision}` : 'rev -';
    (this.els['save'] as HTMLButtonElement).disabled = !m || !m.isDirty();
    (this.els['delete'] as HTMLButtonElement).disabled = !m?.selection;
    const sel = this.els['class-select'] as HTMLSelectElement;
    sel.disabled = !m?.selection;
    const box = m?.selected();
    sel.value = box && box.class !== null ? String(box.class) : '';
    this.panels.forEach((p) => p.draw(this.classNames));
  }
}
