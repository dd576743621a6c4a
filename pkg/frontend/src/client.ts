/** Session client over any WebSocket-like transport.
 *
 * The browser passes the native WebSocket constructor; node tests pass the
 * 'ws' implementation.  All tracking state lives server-side: this client
 * only forwards messages and exposes the reduced view state.
 */

import { ClientMessage, parseServerMessage, ServerMessage } from './protocol.js';
import { initialState, markClosed, reduce, ViewState } from './state.js';

export interface SocketLike {
  send(data: string): void;
  close(): void;
  addEventListener(type: 'open' | 'message' | 'close' | 'error', handler: (event: any) => void): void;
}

export type SocketFactory = (url: string) => SocketLike;

export class SessionClient {
  state: ViewState = initialState();
  private socket: SocketLike | null = null;
  private listeners: Array<(state: ViewState, message: ServerMessage | null) => void> = [];

  constructor(private readonly factory: SocketFactory) {}

  connect(url: string): void {
    this.socket = this.factory(url);
    this.socket.addEventListener('message', (event) => {
      const message = parseServerMessage(
        typeof event.data === 'string' ? event.data : event.data.toString()
      );
      this.state = reduce(this.state, message);
      this.emit(message);
    });
    this.socket.addEventListener('close', () => {
      this.state = markClosed(this.state);
      this.emit(null);
    });
  }

  onUpdate(listener: (state: ViewState, message: ServerMessage | null) => void): void {
    this.listeners.push(listener);
  }

  private emit(message: ServerMessage | null): void {
    for (const listener of this.listeners) {
      listener(this.state, message);
    }
  }

  private send(message: ClientMessage): void {
    if (!this.socket) {
      throw new Error('not connected');
    }
    this.socket.send(JSON.stringify(message));
  }

  requestFrame(): void {
    this.send({ kind: 'frame_request' });
  }

  /** The only client-to-server mutation besides frame advancement. */
  submitPrompt(text: string): boolean {
    if (!text.trim()) {
      return false; // rejected client-side; the server never sees it
    }
    this.send({ kind: 'prompt_change', text });
    return true;
  }

  close(): void {
    this.socket?.close();
  }
}
