import { describe, expect, it } from 'vitest';

import { colorForHash } from '../src/colors.js';
import { drawOps } from '../src/render.js';
import { initialState, reduce } from '../src/state.js';
import { ServerMessage } from '../src/protocol.js';

function stateWithBoxes(tracklets: any[]) {
  let state = reduce(initialState(), {
    kind: 'hello',
    frames: 4,
    grid: [10, 10],
    prompt: 'car',
    vocabulary: [],
    categories: [],
  });
  return reduce(state, { kind: 'frame_result', frame: 0, prompt: 'car', tracklets });
}

describe('draw ops', () => {
  it('no tracklets renders background and status only', () => {
    const ops = drawOps(stateWithBoxes([]), 640, 480);
    expect(ops.map((o) => o.op)).toEqual(['clear', 'grid', 'status']);
  });

  it('normalized corners map to exact pixel corners', () => {
    const ops = drawOps(
      stateWithBoxes([{ id: 1, box: [0.5, 0.5, 1.0, 1.0], conf: 1, id_hash: 3 }]),
      640,
      480
    );
    const box = ops.find((o) => o.op === 'box') as any;
    expect(box).toMatchObject({ x: 0, y: 0, w: 640, h: 480 });

    const corner = drawOps(
      stateWithBoxes([{ id: 1, box: [0.25, 0.75, 0.5, 0.5], conf: 1, id_hash: 3 }]),
      100,
      100
    ).find((o) => o.op === 'box') as any;
    expect(corner).toMatchObject({ x: 0, y: 50, w: 50, h: 50 });
  });

  it('identity color is stable across frames and distinct per id hash', () => {
    const one = drawOps(
      stateWithBoxes([{ id: 9, box: [0.5, 0.5, 0.1, 0.1], conf: 1, id_hash: 1234 }]),
      64,
      64
    ).find((o) => o.op === 'box') as any;
    const again = drawOps(
      stateWithBoxes([{ id: 9, box: [0.2, 0.7, 0.1, 0.1], conf: 0.8, id_hash: 1234 }]),
      64,
      64
    ).find((o) => o.op === 'box') as any;
    expect(one.color).toBe(again.color);
    expect(colorForHash(1234)).toBe(one.color);
    expect(colorForHash(1234)).not.toBe(colorForHash(4321));
  });

  it('status line reports frame position and prompt', () => {
    const ops = drawOps(stateWithBoxes([]), 64, 64);
    const status = ops[ops.length - 1] as any;
    expect(status.text).toContain('frame 1/4');
    expect(status.text).toContain('prompt: car');
  });
});
