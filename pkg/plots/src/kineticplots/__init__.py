"""Batch figure scripts over finished run directories.

This package consumes only the documented on-disk contract (CSV time
series, raw f64 fields with JSON sidecars, manifest.json) and never
writes into a run directory.
"""

from .errors import SchemaMismatch
from .figures import plot_heatmap, plot_hprofiles, plot_observables

__all__ = ["SchemaMismatch", "plot_heatmap", "plot_hprofiles",
           "plot_observables"]
