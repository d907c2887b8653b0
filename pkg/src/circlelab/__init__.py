"""circlelab: a numerical laboratory for circle homeomorphisms with break points."""

__version__ = "0.1.0"
