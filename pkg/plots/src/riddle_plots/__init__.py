"""Batch plotting from training-metrics CSV files.

Deliberately independent of the training package: everything here consumes
the fixed CSV schemas (metrics/ablation and action-frequency tables) and
produces static figures.
"""
from .curves import CurveSpec, load_metrics, plot_curves
from .heatmap import load_freq, plot_freq_heatmap

__version__ = "0.1.0"

__all__ = [
    "CurveSpec",
    "load_metrics",
    "plot_curves",
    "load_freq",
    "plot_freq_heatmap",
]
