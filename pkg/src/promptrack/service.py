"""Interactive tracking sessions over a message socket.

One connection is one session.  The protocol is UTF-8 JSON, one message per
socket frame, usable directly from a browser:

* server -> client: ``hello`` (scenario dimensions, current prompt, the
  known vocabulary), ``frame_result`` (one per frame request, frames
  strictly increasing), ``error`` (bad input; the session continues), and
  ``end`` after the last frame.
* client -> server: ``frame_request`` to advance one frame and
  ``prompt_change`` to retarget the tracker; the new prompt takes effect at
  the next frame boundary, never mid-forward.

Prompt text is tokenized against the controlled vocabulary; unknown words
are dropped with a warning so humans can type naturally.  A prompt with no
known words is rejected and the previous prompt stays active.

Sessions are isolated: each connection owns its tracker state; the weights
and scenario are shared read-only.
"""

from __future__ import annotations

import asyncio
import json
import threading

from websockets.asyncio.server import serve as ws_serve

from .simworld import OracleDecoder, Scenario
from .tokens import PromptKind, PromptText
from .tracker import PromptSchedule, TrackerParams, TrackerSession

_WORD_MASK = (1 << 32) - 1


def stable_id_hash(track_id: int) -> int:
    """Deterministic 32-bit mixer; clients derive identity colors from it."""
    h = (track_id * 0x9E3779B1) & _WORD_MASK
    h ^= h >> 16
    h = (h * 0x85EBCA6B) & _WORD_MASK
    h ^= h >> 13
    return h


def tracklet_payload(record) -> dict:
    return {
        "id": record.id,
        "box": [float(v) for v in record.box],
        "conf": float(record.conf),
        "id_hash": stable_id_hash(record.id),
    }


class Session:
    """Message-level state machine for one connection."""

    def __init__(self, scenario: Scenario, decoder_factory, params: TrackerParams, vocab):
        self.scenario = scenario
        self.vocab = vocab
        decoder = decoder_factory()
        schedule = PromptSchedule(((0, scenario.schedule[0][1]),))
        self.tracker = TrackerSession(decoder, schedule, params)
        self.pending_prompt = None
        self.done = False

    def hello(self) -> dict:
        return {
            "kind": "hello",
            "frames": self.scenario.frames,
            "grid": list(self.scenario.grid),
            "prompt": self.tracker.current_prompt.text,
            "vocabulary": list(self.vocab.words),
            "categories": list(self.scenario.categories_present()),
        }

    def handle(self, message: dict) -> dict:
        kind = message.get("kind")
        if kind == "prompt_change":
            return self._change_prompt(message.get("text", ""))
        if kind == "frame_request":
            return self._advance()
        return {"kind": "error", "message": f"unknown message kind {kind!r}"}

    def _change_prompt(self, text: str) -> dict:
        if not text.strip():
            return {"kind": "error", "message": "prompt_change needs non-empty text"}
        words = [w for w in PromptText(PromptKind.NM, (text,)).words() if w in self.vocab]
        if not words:
            return {
                "kind": "error",
                "message": f"no vocabulary words in {text!r}; keeping the previous prompt",
            }
        self.pending_prompt = PromptText(PromptKind.NM, tuple(dict.fromkeys(words)))
        return {
            "kind": "prompt_change",
            "text": self.pending_prompt.text,
            "effective_frame": self.tracker.frame,
        }

    def _advance(self) -> dict:
        if self.done or self.tracker.frame >= self.scenario.frames:
            self.done = True
            return {"kind": "end", "frame": self.scenario.frames - 1}
        if self.pending_prompt is not None:
            self.tracker.current_prompt = self.pending_prompt
            self.pending_prompt = None
        result = self.tracker.step(self.scenario.frame(self.tracker.frame))
        return {
            "kind": "frame_result",
            "frame": result.frame,
            "prompt": result.prompt,
            "tracklets": [tracklet_payload(t) for t in result.tracklets],
        }


class SessionServer:
    """Serves tracking sessions on a local port until stopped."""

    def __init__(self, scenario: Scenario, net=None, params: TrackerParams = TrackerParams(), oracle: bool = False, encoder=None, vocab=None, announce: bool = False):
        self.scenario = scenario
        self.params = params
        self.announce = announce
        if oracle:
            if encoder is None or vocab is None:
                raise ValueError("oracle serving needs an encoder and vocabulary for features")
            self._vocab = vocab
            self._factory = lambda: OracleDecoder(scenario, encoder, vocab)
        else:
            if net is None:
                raise ValueError("serving needs either weights or the oracle")
            self._vocab = net.vocab
            self._factory = lambda: net  # stateless; safe to share across sessions
        self._loop = None
        self._server = None
        self._thread = None
        self._started = threading.Event()
        self.port = None

    async def _handler(self, socket):
        session = Session(self.scenario, self._factory, self.params, self._vocab)
        await socket.send(json.dumps(session.hello()))
        async for raw in socket:
            try:
                message = json.loads(raw)
            except json.JSONDecodeError:
                await socket.send(json.dumps({"kind": "error", "message": "not valid JSON"}))
                continue
            reply = session.handle(message)
            await socket.send(json.dumps(reply))

    async def _run(self, host: str, port: int):
        async with ws_serve(self._handler, host, port) as server:
            self._server = server
            self.port = server.sockets[0].getsockname()[1]
            self._started.set()
            if self.announce:
                print(f"listening on ws://{host}:{self.port}", flush=True)
            await asyncio.get_running_loop().create_future()  # run until cancelled

    def start(self, host: str = "127.0.0.1", port: int = 0) -> int:
        """Start serving on a background thread; returns the bound port."""
        self._loop = asyncio.new_event_loop()
        self._thread = threading.Thread(
            target=self._loop.run_until_complete, args=(self._main(host, port),), daemon=True
        )
        self._thread.start()
        if not self._started.wait(timeout=10):
            raise RuntimeError("session server failed to start")
        return self.port

    async def _main(self, host: str, port: int):
        try:
            await self._run(host, port)
        except asyncio.CancelledError:
            pass

    def stop(self) -> None:
        if self._loop is None:
            return
        self._loop.call_soon_threadsafe(self._cancel_all)
        self._thread.join(timeout=10)
        self._loop.close()
        self._loop = None

    def _cancel_all(self) -> None:
        for task in asyncio.all_tasks(self._loop):
            task.cancel()

    def serve_forever(self, host: str = "127.0.0.1", port: int = 8765) -> None:
        """Blocking variant for the command line."""
        asyncio.run(self._run(host, port))
