"""Dual-stream dynamic graph learning on ROI time series."""

__version__ = "0.1.0"
