"""The trainable tracker network bundled behind the decode-provider API.

A :class:`TrackerNet` owns the image encoder, the prompt vocabulary and the
correlation/decoder weights, and exposes the four methods the tracking
session drives: ``image_tokens``, ``prompt_tokens``, ``ground`` and
``track``.  The correlation mode is switchable between the factorized
(default) and the full third-order form with identical weights.
"""

from __future__ import annotations

from . import model
from .errors import ConfigError
from .tokens import EncoderConfig, ImageEncoder, PromptText, TokenMatrix, default_vocabulary, embed_prompt


class TrackerNet:
    def __init__(
        self,
        dim: int = 64,
        heads: int = 4,
        grid: tuple = (10, 10),
        seed: int = 0,
        mode: str = "simplified",
        use_positions: bool = True,
    ):
        if mode not in ("simplified", "full"):
            raise ConfigError(f"unknown correlation mode {mode!r}")
        self.encoder = ImageEncoder(EncoderConfig(grid=grid, dim=dim, seed=seed, use_positions=use_positions))
        self.vocab = default_vocabulary(dim, seed + 1)
        self.weights = model.ModelWeights.create(dim=dim, heads=heads, seed=seed + 2)
        self.mode = mode
        self.step_count = 0  # optimizer steps applied so far

    @property
    def dim(self) -> int:
        return self.weights.dim

    def parameters(self) -> dict:
        out = {"vocab": self.vocab.embeddings}
        out.update(self.encoder.parameters())
        out.update(self.weights.parameters())
        return out

    def apply_parameters(self, params: dict) -> None:
        self.vocab.embeddings = params["vocab"]
        self.encoder.load_parameters(params)
        self.weights = self.weights.with_parameters(params)

    # Decode-provider API -------------------------------------------------

    def image_tokens(self, frame) -> TokenMatrix:
        return self.encoder.encode(frame)

    def prompt_tokens(self, prompt: PromptText) -> TokenMatrix:
        return embed_prompt(prompt, self.vocab)

    def ground(self, frame, img: TokenMatrix, prm: TokenMatrix, prompt, gamma: float) -> list:
        return model.ground_regions(img, prm, self.weights, gamma)

    def track(self, frame, img: TokenMatrix, trk: TokenMatrix, prm: TokenMatrix, prompt, gamma: float) -> list:
        if self.mode == "full":
            _, _, _, z = model.forward_full(img, trk, prm, self.weights)
        else:
            _, _, z = model.forward_simplified(img, trk, prm, self.weights)
        return model.decode(z, img, self.weights, gamma)
