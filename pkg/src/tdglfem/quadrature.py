"""Quadrature on the reference triangle and on segments."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre


@dataclass(frozen=True)
class QuadratureRule:
    """Rule on the reference triangle (0,0), (1,0), (0,1).

    ``points`` are Cartesian reference coordinates, ``bary`` the matching
    barycentric coordinates (lambda_0 = 1 - x - y, lambda_1 = x,
    lambda_2 = y), and the weights sum to the reference area 1/2.
    """

    points: np.ndarray
    bary: np.ndarray
    weights: np.ndarray
    degree: int

    def __len__(self):
        return len(self.weights)


@lru_cache(maxsize=None)
def triangle_rule(degree: int) -> QuadratureRule:
    """Collapsed (Duffy) Gauss rule, exact for total degree ``degree``.

    x = s, y = t (1 - s); the (1 - s) Jacobian is absorbed into a
    Gauss-Jacobi rule in s, and t uses Gauss-Legendre.
    """
    n = degree // 2 + 1
    xs, ws = roots_jacobi(n, 1.0, 0.0)
    xt, wt = roots_legendre(n)
    s = 0.5 * (xs + 1.0)
    ws = 0.25 * ws
    t = 0.5 * (xt + 1.0)
    wt = 0.5 * wt
    S, T = np.meshgrid(s, t, indexing="ij")
    W = np.outer(ws, wt)
    x = S.ravel()
    y = (T * (1.0 - S)).ravel()
    pts = np.column_stack([x, y])
    bary = np.column_stack([1.0 - x - y, x, y])
    return QuadratureRule(pts, bary, W.ravel(), degree)


@lru_cache(maxsize=None)
def segment_rule(n: int = 3):
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = roots_legendre(n)
    return 0.5 * (x + 1.0), 0.5 * w
