"""Exact Bezier nets for common analytic surfaces.

Used by the shipped demo model and throughout the test suite.
"""

from __future__ import annotations

import numpy as np

from .bezier import BezierSurface, bernstein_from_monomial


def flat_patch(z: float = 0.0) -> BezierSurface:
    """Bilinear patch (u, v, z) over the unit square."""
    net = np.array([
        [[0.0, 0.0, z], [0.0, 1.0, z]],
        [[1.0, 0.0, z], [1.0, 1.0, z]],
    ])
    return BezierSurface(net)


def plane_patch(a: float, b: float, c: float) -> BezierSurface:
    """Bilinear patch (u, v, a*u + b*v + c)."""
    net = np.empty((2, 2, 3))
    for i, u in enumerate((0.0, 1.0)):
        for j, v in enumerate((0.0, 1.0)):
            net[i, j] = (u, v, a * u + b * v + c)
    return BezierSurface(net)


def paraboloid_patch(height: float = 1.0) -> BezierSurface:
    """Biquadratic patch (u, v, height * ((u-0.5)^2 + (v-0.5)^2)).

    The z net is the exact tensor Bernstein form: each axis contributes the
    degree-2 coefficients of (x-0.5)^2, i.e. (0.25, -0.25, 0.25).
    """
    quad = bernstein_from_monomial(np.array([0.25, -1.0, 1.0]))
    lin = np.array([0.0, 0.5, 1.0])
    net = np.empty((3, 3, 3))
    for i in range(3):
        for j in range(3):
            net[i, j] = (lin[i], lin[j], height * (quad[i] + quad[j]))
    return BezierSurface(net)


def paraboloid_height(u: float, v: float, height: float = 1.0) -> float:
    """Analytic z of paraboloid_patch, for oracle checks."""
    return height * ((u - 0.5) ** 2 + (v - 0.5) ** 2)
