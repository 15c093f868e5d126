"""Unsupervised multi-scale superpixel graph segmentation and its evaluation metrics."""

from .config import PipelineConfig
from .metrics import bde, evaluate, gce, pri, voi
from .pipeline import benchmark, segment, segment_many

__all__ = ["PipelineConfig", "benchmark", "bde", "evaluate", "gce", "pri", "segment", "segment_many", "voi"]
__version__ = "0.1.0"
