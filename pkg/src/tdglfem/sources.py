"""Right-hand-side data passed to the time stepper.

A source object exposes ``evaluate(x, y, t) -> (g, g_vec, H)`` where ``g``
is the complex source of the order-parameter equation, ``g_vec`` the
vector source of the potential equation (shape ``x.shape + (2,)``) and
``H`` the applied field.  Any entry may be ``None`` for zero.
"""
from __future__ import annotations

import numpy as np


class ZeroSources:
    def evaluate(self, x, y, t):
        return None, None, None

    def H(self, x, y, t):
        return None


class UniformField(ZeroSources):
    """Constant applied field H and no artificial sources."""

    def __init__(self, H: float = 1.0):
        self.value = float(H)

    def evaluate(self, x, y, t):
        return None, None, np.full(np.shape(x), self.value)

    def H(self, x, y, t):
        return np.full(np.shape(x), self.value)
