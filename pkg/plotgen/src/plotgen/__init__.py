"""Figure rendering for matchreweight aggregate CSVs.

Consumes only the versioned aggregate schema written by the experiment
runner; nothing here imports the training code.
"""

from .tables import SchemaMismatch, SweepTable, load_table
from .plots import plot_proportion_error, plot_sweep

__all__ = [
    "SchemaMismatch",
    "SweepTable",
    "load_table",
    "plot_proportion_error",
    "plot_sweep",
]
