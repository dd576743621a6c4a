"""Prompt-driven multiple object tracking at desk scale.

A tracker that takes a typed description of what to follow, grounds it in a
synthetic scene, and carries identities forward through a factorized
region-tracklet-prompt attention whose full third-order form is kept around
for ablation.  Includes the training losses, class-agnostic tracking
metrics, an annotation format with prompt constructors, a deterministic
world with exact ground truth, and an interactive session service.
"""

from .metrics import TrackRecord, TrackSet, summary
from .net import TrackerNet
from .simworld import Scenario, WorldConfig, generate
from .tokens import PromptKind, PromptText
from .tracker import PromptSchedule, TrackerParams, TrackerSession

__version__ = "0.1.0"

__all__ = [
    "PromptKind",
    "PromptText",
    "PromptSchedule",
    "Scenario",
    "TrackRecord",
    "TrackSet",
    "TrackerNet",
    "TrackerParams",
    "TrackerSession",
    "WorldConfig",
    "generate",
    "summary",
    "__version__",
]
