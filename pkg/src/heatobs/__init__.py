"""Obstacle reconstruction for the 2D heat equation from lateral Cauchy data.

Space-time mixed quasi-reversibility on the exterior domain alternates with
a Poisson level-set update that shrinks the obstacle estimate.
"""

__version__ = "0.1.0"
