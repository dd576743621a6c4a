/** Golden-session replay: rendering is a pure function of the messages. */

import { readFileSync } from 'node:fs';
import { describe, expect, it } from 'vitest';

import { drawOps } from '../src/render.js';
import { initialState, reduce } from '../src/state.js';
import { ServerMessage } from '../src/protocol.js';

const messages: ServerMessage[] = JSON.parse(
  readFileSync(new URL('./fixtures/golden_session.json', import.meta.url), 'utf-8')
);
const golden = JSON.parse(
  readFileSync(new URL('./fixtures/golden_ops.json', import.meta.url), 'utf-8')
);

function replay() {
  let state = initialState();
  const frames = [];
  for (const message of messages) {
    state = reduce(state, message);
    frames.push(drawOps(state, 640, 640));
  }
  return frames;
}

describe('golden session replay', () => {
  it('reproduces the frozen overlay sequence exactly', () => {
    expect(replay()).toEqual(golden);
  });

  it('is deterministic across replays', () => {
    expect(replay()).toEqual(replay());
  });

  it('keeps box colors stable for surviving ids across the prompt change', () => {
    const frames = replay();
    const switchIndex = messages.findIndex((m) => m.kind === 'prompt_change');
    const before = frames[switchIndex - 1].filter((op: any) => op.op === 'box');
    const after = frames[switchIndex + 1].filter((op: any) => op.op === 'box');
    expect(after.length).toBeGreaterThan(0);
    expect(after.length).toBeLessThan(before.length); // subset prompt
    for (const box of after) {
      const match = before.find((b: any) => b.label.split(' ')[0] === box.label.split(' ')[0]);
      expect(match, `id ${box.label} must survive`).toBeDefined();
      expect(box.color).toBe(match.color);
    }
  });

  it('final frame reports the ended state', () => {
    const frames = replay();
    const status = frames.at(-1)!.find((op: any) => op.op === 'status') as any;
    expect(status.text).toContain('(ended)');
  });
});
