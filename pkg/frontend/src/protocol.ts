/** Wire schema of the tracking session protocol (JSON per socket frame). */

export interface TrackletPayload {
  id: number;
  box: [number, number, number, number]; // (cx, cy, w, h), normalized
  conf: number;
  id_hash: number;
}

export type ServerMessage =
  | { kind: 'hello'; frames: number; grid: [number, number]; prompt: string; vocabulary: string[]; categories: string[] }
  | { kind: 'frame_result'; frame: number; prompt: string; tracklets: TrackletPayload[] }
  | { kind: 'prompt_change'; text: string; effective_frame: number }
  | { kind: 'error'; message: string }
  | { kind: 'end'; frame: number };

export type ClientMessage =
  | { kind: 'frame_request' }
  | { kind: 'prompt_change'; text: string };

export function parseServerMessage(raw: string): ServerMessage {
  const parsed = JSON.parse(raw);
  if (typeof parsed.kind !== 'string') {
    throw new Error('server message without kind');
  }
  return parsed as ServerMessage;
}
