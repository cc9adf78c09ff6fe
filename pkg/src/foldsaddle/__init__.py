"""Fold-saddle singularities of planar Filippov systems.

Numerical toolkit for the two-parameter family made of an invisible or
visible fold of the upper field and a boundary saddle of the lower field:
Sigma-region analysis, Filippov trajectories, half-return maps, canard
cycles and the case taxonomy of the unfolding.
"""

__version__ = "0.1.0"
