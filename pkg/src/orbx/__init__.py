"""Fixed-point streaming ORB front end with a floating-point reference,
Hamming matching, motion-only bundle adjustment and trajectory evaluation."""

from ._stream import BACKEND as STREAM_BACKEND
from .imgcore import GrayImage, QuantSpec, load_pgm, quantize_pixels, write_pgm
from .pipeline import FrameResult, Keypoint, PipelineConfig, run_frame

__version__ = "0.1.0"

__all__ = [
    "GrayImage",
    "QuantSpec",
    "load_pgm",
    "write_pgm",
    "quantize_pixels",
    "PipelineConfig",
    "Keypoint",
    "FrameResult",
    "run_frame",
    "STREAM_BACKEND",
    "__version__",
]
