"""Stalled-vehicle detection for fixed-camera frame sequences.

Stages: corrupted-frame filtering, dual-direction adaptive background
modeling, detection cleanup (NMS + spatial filters), clustered candidate
regions, windowed similarity evidence, and onset estimation by threshold
backtracking or sequential accumulation. A deterministic synthetic scene
generator and an event-level evaluation harness round out the package.
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .config import PipelineConfig, load_config
from .errors import StallSentinelError
from .pipeline import RunResult, run_video

__version__ = "0.1.0"

__all__ = [
    "KERNEL_BACKEND",
    "PipelineConfig",
    "RunResult",
    "StallSentinelError",
    "__version__",
    "load_config",
    "run_video",
]
