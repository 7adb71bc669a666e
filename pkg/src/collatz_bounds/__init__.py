"""Difference-inequality lower bounds for the 3x+1 problem.

Builds the inequality systems mod 3^k, eliminates advanced terms, compiles
the parametric linear programs, brackets the largest feasible lambda with
certified feasibility checks, and tests the resulting counting bounds against
direct iteration of the 3x+1 map.
"""

__version__ = "0.1.0"
