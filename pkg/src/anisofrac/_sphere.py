"""Angular quadrature on the unit sphere for n = 1, 2, 3.

n = 1: the two-point counting measure on {-1, +1}.
n = 2: uniform M-point circle rule (trapezoid; spectrally accurate for
       smooth periodic integrands).
n = 3: Gauss-Legendre in cos(theta) times a uniform rule in phi.
"""

from __future__ import annotations

import numpy as np
from numpy.polynomial.legendre import leggauss


def sphere_rule(n: int, points: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Directions (M, n) and weights (M,) summing to the sphere measure."""
    if n == 1:
        dirs = np.array([[-1.0], [1.0]])
        return dirs, np.array([1.0, 1.0])
    if n == 2:
        m = 256 if points is None else int(points)
        if m < 4 or m % 2:
            raise ValueError("circle rule needs an even point count >= 4")
        theta = 2.0 * np.pi * np.arange(m) / m
        dirs = np.column_stack([np.cos(theta), np.sin(theta)])
        return dirs, np.full(m, 2.0 * np.pi / m)
    if n == 3:
        n_mu = 32
        n_phi = 64
        mu, w_mu = leggauss(n_mu)
        phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
        w_phi = 2.0 * np.pi / n_phi
        MU, PHI = np.meshgrid(mu, phi, indexing="ij")
        sin_t = np.sqrt(1.0 - MU ** 2)
        dirs = np.column_stack(
            [(sin_t * np.cos(PHI)).ravel(), (sin_t * np.sin(PHI)).ravel(), MU.ravel()]
        )
        weights = (w_mu[:, None] * np.full((n_mu, n_phi), w_phi)).ravel()
        return dirs, weights
    raise ValueError(f"sphere rule only available for n in {{1,2,3}}, got {n}")


def sphere_measure(n: int) -> float:
    """|S^{n-1}| = n * omega_n."""
    if n == 1:
        return 2.0
    if n == 2:
        return 2.0 * np.pi
    if n == 3:
        return 4.0 * np.pi
    raise ValueError(f"n must be in {{1,2,3}}, got {n}")
