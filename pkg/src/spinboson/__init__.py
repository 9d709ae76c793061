"""Real-time spin-boson dynamics on the unfolded Keldysh contour.

Two solvers share one set of building blocks: a bare Dyson-series Monte Carlo
estimator (``dyson``) and an inchworm integro-differential solver
(``inchworm``) that steps full propagators over a two-time grid.
"""

__version__ = "0.1.0"
