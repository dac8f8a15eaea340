"""Polynomial invariants of tensor spaces under O(n)/SO(n) and function-basis cardinality bounds."""

__version__ = "0.1.0"
