"""Short-maturity ATM skew of ranked-index options.

Simulation (GBM, fractional Stein-Stein, fractional Bergomi), Monte Carlo
pricing on top-ranked equity indexes and the small-time asymptotics the
simulations are checked against.
"""

__version__ = '0.3.0'
