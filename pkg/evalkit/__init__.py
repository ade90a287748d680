"""
Evaluation toolkit: metrics, noise robustness and report export.

`evalkit.robustness` and `evalkit.reports` depend on the model package and
are imported explicitly by their callers.
"""

from evalkit.metrics import ConfusionMatrix, MetricsReport, accuracy, metrics

__all__ = [
    'ConfusionMatrix',
    'MetricsReport',
    'accuracy',
    'metrics',
]
