"""Alternating and simultaneous projected gradient descent-ascent on matrix games.

Submodules: ``game`` (payoffs, equilibria, generators), ``projections``,
``dynamics`` (AltGDA/SimGDA runs and diagnostics), ``invariants``,
``pep`` (performance-estimation SDP), ``search`` (stepsize tuning),
``bench`` and ``cli``.
"""

__version__ = "0.1.0"
