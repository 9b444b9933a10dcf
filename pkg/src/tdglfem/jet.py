"""Second-order forward-mode automatic differentiation.

A ``Jet`` carries the value, gradient and Hessian of a quantity with respect
to a fixed set of independent variables, vectorised over sample points.
"""
from __future__ import annotations

import numpy as np


class Jet:
    __slots__ = ("v", "g", "h")
    __array_priority__ = 100

    def __init__(self, v, g, h):
        self.v = v  # (...)
        self.g = g  # (..., n)
        self.h = h  # (..., n, n)

    @classmethod
    def variable(cls, x, index: int, nvars: int):
        x = np.asarray(x, dtype=float)
        g = np.zeros(x.shape + (nvars,))
        g[..., index] = 1.0
        return cls(x, g, np.zeros(x.shape + (nvars, nvars)))

    @classmethod
    def constant(cls, c, like: "Jet"):
        c = np.broadcast_to(np.asarray(c, dtype=float), like.v.shape)
        return cls(c.copy(), np.zeros_like(like.g), np.zeros_like(like.h))

    @property
    def nvars(self):
        return self.g.shape[-1]

    def _lift(self, other):
        return other if isinstance(other, Jet) else Jet.constant(other, self)

    def __add__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.v + other, self.g, self.h)
        return Jet(self.v + other.v, self.g + other.g, self.h + other.h)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.v, -self.g, -self.h)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.v * other, self.g * np.asarray(other)[..., None],
                       self.h * np.asarray(other)[..., None, None])
        a, b = self, other
        outer = a.g[..., :, None] * b.g[..., None, :]
        return Jet(
            a.v * b.v,
            a.v[..., None] * b.g + b.v[..., None] * a.g,
            a.v[..., None, None] * b.h + b.v[..., None, None] * a.h + outer + np.swapaxes(outer, -1, -2),
        )

    __rmul__ = __mul__

    def apply(self, f0, f1, f2):
        """Compose with a scalar function given its value and first two derivatives at ``self.v``."""
        gg = self.g[..., :, None] * self.g[..., None, :]
        return Jet(f0, f1[..., None] * self.g, f1[..., None, None] * self.h + f2[..., None, None] * gg)

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return self * (1.0 / np.asarray(other))
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def reciprocal(self):
        x = self.v
        return self.apply(1.0 / x, -1.0 / x**2, 2.0 / x**3)

    def __pow__(self, p: float):
        x = self.v
        return self.apply(x**p, p * x ** (p - 1), p * (p - 1) * x ** (p - 2))

    def sqrt(self):
        s = np.sqrt(self.v)
        return self.apply(s, 0.5 / s, -0.25 / (s * self.v))

    def sin(self):
        return self.apply(np.sin(self.v), np.cos(self.v), -np.sin(self.v))

    def cos(self):
        return self.apply(np.cos(self.v), -np.sin(self.v), -np.cos(self.v))


def atan2(y: Jet, x: Jet) -> Jet:
    r2 = x.v**2 + y.v**2
    ty, tx = x.v / r2, -y.v / r2
    txx = 2 * x.v * y.v / r2**2
    tyy = -txx
    txy = (y.v**2 - x.v**2) / r2**2
    g = tx[..., None] * x.g + ty[..., None] * y.g
    xx = x.g[..., :, None] * x.g[..., None, :]
    yy = y.g[..., :, None] * y.g[..., None, :]
    xy = x.g[..., :, None] * y.g[..., None, :]
    h = (
        tx[..., None, None] * x.h + ty[..., None, None] * y.h
        + txx[..., None, None] * xx + tyy[..., None, None] * yy
        + txy[..., None, None] * (xy + np.swapaxes(xy, -1, -2))
    )
    return Jet(np.arctan2(y.v, x.v), g, h)
