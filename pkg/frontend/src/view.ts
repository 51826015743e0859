// Canvas rendering and pointer plumbing. The target stays invisible during
// exploration; the ground truth is drawn only from a score reveal.

import type { AppState } from "./appState.js";

export class BoardView {
  private ctx: CanvasRenderingContext2D;

  constructor(private canvas: HTMLCanvasElement, private state: AppState) {
    const ctx = canvas.getContext("2d");
    if (!ctx) throw new Error("canvas 2d context unavailable");
    this.ctx = ctx;
  }

  get scale(): number {
    return this.canvas.width / this.state.boardMm;
  }

  toMm(ev: PointerEvent): [number, number] {
    const rect = this.canvas.getBoundingClientRect();
    const x = ((ev.clientX - rect.left) / rect.width) * this.state.boardMm;
    // canvas y grows downward; board coordinates grow upward
    const y = this.state.boardMm - ((ev.clientY - rect.top) / rect.height) * this.state.boardMm;
    return [x, y];
  }

  private toPx(p: [number, number]): [number, number] {
    return [p[0] * this.scale, this.canvas.height - p[1] * this.scale];
  }

  draw(): void {
    const { ctx, canvas, state } = this;
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    ctx.fillStyle = "#fbf7f0";
    ctx.fillRect(0, 0, canvas.width, canvas.height);

    if (state.reveal) {
      const gt = state.reveal.gt;
      this.path(gt.vertices_mm, true);
      ctx.fillStyle = "rgba(200, 60, 60, 0.25)";
      ctx.fill();
      ctx.strokeStyle = "#c03c3c";
      ctx.lineWidth = 2;
      ctx.stroke();
      const [sx, sy] = this.toPx(gt.seed_mm);
      ctx.beginPath();
      ctx.arc(sx, sy, gt.seed_radius_mm * this.scale, 0, 2 * Math.PI);
      ctx.fillStyle = "#c03c3c";
      ctx.fill();
    }

    if (state.marginPath.length > 1) {
      this.path(state.marginPath, false);
      ctx.strokeStyle = "#2060c0";
      ctx.lineWidth = 2;
      ctx.stroke();
    }
    if (state.seedMark) {
      const [mx, my] = this.toPx(state.seedMark);
      ctx.beginPath();
      ctx.arc(mx, my, 4, 0, 2 * Math.PI);
      ctx.fillStyle = "#2060c0";
      ctx.fill();
    }
  }

  private path(points: [number, number][], close: boolean): void {
    this.ctx.beginPath();
    points.forEach((p, i) => {
      const [x, y] = this.toPx(p);
      if (i === 0) this.ctx.moveTo(x, y);
      else this.ctx.lineTo(x, y);
    });
    if (close) this.ctx.closePath();
  }
}
