/** View state: a pure reducer over incoming session messages.
 *
 * Rendering reads nothing but this state, and the state is a function of
 * the message sequence alone, so replaying a recorded session reproduces
 * the identical overlay sequence.
 */

import { ServerMessage, TrackletPayload } from './protocol.js';

export interface PromptEntry {
  frame: number; // first frame the prompt governs
  text: string;
}

export interface ViewState {
  connection: 'connecting' | 'live' | 'closed';
  frames: number;
  grid: [number, number];
  vocabulary: string[];
  currentFrame: number;
  playbackRate: number; // frame requests per second while playing
  boxes: TrackletPayload[];
  prompt: string;
  promptHistory: PromptEntry[];
  lastError: string | null;
  ended: boolean;
}

export function initialState(): ViewState {
  return {
    connection: 'connecting',
    frames: 0,
    grid: [1, 1],
    vocabulary: [],
    currentFrame: -1,
    playbackRate: 8,
    boxes: [],
    prompt: '',
    promptHistory: [],
    lastError: null,
    ended: false,
  };
}

export function reduce(state: ViewState, message: ServerMessage): ViewState {
  switch (message.kind) {
    case 'hello':
      return {
        ...state,
        connection: 'live',
        frames: message.frames,
        grid: message.grid,
        vocabulary: message.vocabulary,
        prompt: message.prompt,
        promptHistory: [{ frame: 0, text: message.prompt }],
      };
    case 'frame_result':
      return {
        ...state,
        currentFrame: message.frame,
        boxes: message.tracklets,
        prompt: message.prompt,
        lastError: null,
      };
    case 'prompt_change':
      return {
        ...state,
        promptHistory: [...state.promptHistory, { frame: message.effective_frame, text: message.text }],
      };
    case 'error':
      return { ...state, lastError: message.message };
    case 'end':
      return { ...state, ended: true };
  }
}

export function markClosed(state: ViewState): ViewState {
  return { ...state, connection: 'closed' };
}
