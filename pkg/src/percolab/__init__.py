"""percolab: a laboratory for Bernoulli bond percolation on Z^d.

Exact (enumeration) and Monte Carlo estimators of restricted two-point
functions and the quantities built from them, plus both-sides checks of the
classical correlation inequalities on small graphs.
"""
__version__ = "0.1.0"
