/** Browser entry: canvas playback, prompt box with vocabulary hints. */

import { SessionClient } from './client.js';
import { drawOps, paint } from './render.js';

const canvas = document.getElementById('scene') as HTMLCanvasElement;
const ctx = canvas.getContext('2d')!;
const promptInput = document.getElementById('prompt') as HTMLInputElement;
const promptForm = document.getElementById('prompt-form') as HTMLFormElement;
const historyList = document.getElementById('history') as HTMLUListElement;
const playButton = document.getElementById('play') as HTMLButtonElement;
const rateInput = document.getElementById('rate') as HTMLInputElement;
const statusLine = document.getElementById('connection') as HTMLSpanElement;
const vocabularyList = document.getElementById('vocabulary') as HTMLDataListElement;

const endpoint = new URLSearchParams(location.search).get('ws') ?? 'ws://127.0.0.1:8765';
const client = new SessionClient((url) => new WebSocket(url));

let playing = false;
let timer: number | null = null;

function schedule(): void {
  if (timer !== null) {
    clearTimeout(timer);
    timer = null;
  }
  if (!playing || client.state.ended || client.state.connection !== 'live') {
    return;
  }
  timer = window.setTimeout(() => {
    client.requestFrame();
  }, 1000 / client.state.playbackRate);
}

client.onUpdate((state, message) => {
  paint(ctx, drawOps(state, canvas.width, canvas.height));
  statusLine.textContent = state.connection + (state.lastError ? ` — ${state.lastError}` : '');
  if (message?.kind === 'hello') {
    vocabularyList.replaceChildren(
      ...state.vocabulary.map((word) => {
        const option = document.createElement('option');
        option.value = word;
        return option;
      })
    );
  }
  if (message?.kind === 'hello' || message?.kind === 'frame_result') {
    schedule();
  }
  historyList.replaceChildren(
    ...state.promptHistory.map((entry) => {
      const item = document.createElement('li');
      item.textContent = `frame ${entry.frame}: ${entry.text}`;
      return item;
    })
  );
});

promptForm.addEventListener('submit', (event) => {
  event.preventDefault();
  if (client.submitPrompt(promptInput.value)) {
    promptInput.value = '';
  }
});

playButton.addEventListener('click', () => {
  playing = !playing;
  playButton.textContent = playing ? 'pause' : 'play';
  if (playing) {
    client.requestFrame();
  } else {
    schedule();
  }
});

rateInput.addEventListener('change', () => {
  client.state = { ...client.state, playbackRate: Number(rateInput.value) || 8 };
});

client.connect(endpoint);
