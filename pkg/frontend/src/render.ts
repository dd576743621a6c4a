/** Overlay rendering, split into a pure draw-op stage and a canvas painter.
 *
 * The pure stage makes replay testable without a DOM: identical states
 * produce identical op lists.  Box coordinates are normalized scene
 * coordinates and map linearly onto the canvas.
 */

import { colorForHash } from './colors.js';
import { ViewState } from './state.js';

export type DrawOp =
  | { op: 'clear'; width: number; height: number }
  | { op: 'grid'; cols: number; rows: number }
  | { op: 'box'; x: number; y: number; w: number; h: number; color: string; label: string }
  | { op: 'status'; text: string };

export function drawOps(state: ViewState, width: number, height: number): DrawOp[] {
  const ops: DrawOp[] = [{ op: 'clear', width, height }];
  ops.push({ op: 'grid', cols: state.grid[0], rows: state.grid[1] });
  for (const t of state.boxes) {
    const [cx, cy, w, h] = t.box;
    ops.push({
      op: 'box',
      x: (cx - w / 2) * width,
      y: (cy - h / 2) * height,
      w: w * width,
      h: h * height,
      color: colorForHash(t.id_hash),
      label: `#${t.id} ${t.conf.toFixed(2)}`,
    });
  }
  const position = state.currentFrame >= 0 ? `frame ${state.currentFrame + 1}/${state.frames}` : 'ready';
  const suffix = state.ended ? ' (ended)' : state.connection !== 'live' ? ` (${state.connection})` : '';
  ops.push({ op: 'status', text: `${position} | prompt: ${state.prompt}${suffix}` });
  return ops;
}

export function paint(ctx: CanvasRenderingContext2D, ops: DrawOp[]): void {
  for (const it of ops) {
    switch (it.op) {
      case 'clear':
        ctx.fillStyle = '#101418';
        ctx.fillRect(0, 0, it.width, it.height);
        break;
      case 'grid': {
        ctx.strokeStyle = 'rgba(255,255,255,0.08)';
        ctx.lineWidth = 1;
        const { width, height } = ctx.canvas;
        for (let c = 1; c < it.cols; c++) {
          ctx.beginPath();
          ctx.moveTo((c * width) / it.cols, 0);
          ctx.lineTo((c * width) / it.cols, height);
          ctx.stroke();
        }
        for (let r = 1; r < it.rows; r++) {
          ctx.beginPath();
          ctx.moveTo(0, (r * height) / it.rows);
          ctx.lineTo(width, (r * height) / it.rows);
          ctx.stroke();
        }
        break;
      }
      case 'box':
        ctx.strokeStyle = it.color;
        ctx.lineWidth = 2;
        ctx.strokeRect(it.x, it.y, it.w, it.h);
        ctx.fillStyle = it.color;
        ctx.font = '12px monospace';
        ctx.fillText(it.label, it.x + 2, it.y - 4);
        break;
      case 'status':
        ctx.fillStyle = '#e8e8e8';
        ctx.font = '13px monospace';
        ctx.fillText(it.text, 8, ctx.canvas.height - 8);
        break;
    }
  }
}
