"""Figure rendering for isinglab CSV outputs.

Strictly a presentation layer: every plotted number is read from a CSV
produced by the isinglab CLI, never recomputed, and renders are deterministic
(identical CSVs give byte-identical SVG files).
"""

from .figures import FIGURE_KINDS, FigureSpec, SchemaError, plotted_checksum, render

__version__ = "0.1.0"
