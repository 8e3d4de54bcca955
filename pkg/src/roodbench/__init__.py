"""Corruption benchmarks and robustness metrics for 3D MRI segmentation."""

__version__ = "0.1.0"
