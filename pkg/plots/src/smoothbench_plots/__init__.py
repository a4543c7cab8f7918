"""Batch SVG figure generator for smoothbench artifacts.

Reads rows.csv / summary.json written by the experiment runner and emits
deterministic SVG files.  No statistics are recomputed here: every number
drawn comes straight from the artifacts.
"""

__version__ = "0.1.0"

from .spec import FigureSpec, SpecError, parse_spec_file
from .render import render

__all__ = ["FigureSpec", "SpecError", "parse_spec_file", "render", "__version__"]
