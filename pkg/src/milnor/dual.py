"""First-order jets (value + gradient) for forward-mode differentiation."""

from __future__ import annotations

import numpy as np


class Jet:
    """A value together with its gradient in R^n.

    Only the operations the germ language needs are defined: +, -, *,
    unary minus and non-negative integer powers. Mixed arithmetic with
    plain floats treats the float as a constant.
    """

    __slots__ = ("value", "grad")

    def __init__(self, value, grad):
        self.value = float(value)
        self.grad = grad

    @classmethod
    def variable(cls, value, index, n):
        grad = np.zeros(n)
        grad[index] = 1.0
        return cls(value, grad)

    def __add__(self, other):
        if isinstance(other, Jet):
            return Jet(self.value + other.value, self.grad + other.grad)
        return Jet(self.value + other, self.grad)

    def __radd__(self, other):
        return Jet(other + self.value, self.grad)

    def __sub__(self, other):
        if isinstance(other, Jet):
            return Jet(self.value - other.value, self.grad - other.grad)
        return Jet(self.value - other, self.grad)

    def __rsub__(self, other):
        return Jet(other - self.value, -self.grad)

    def __mul__(self, other):
        if isinstance(other, Jet):
            return Jet(self.value * other.value,
                       self.value * other.grad + other.value * self.grad)
        return Jet(self.value * other, other * self.grad)

    def __rmul__(self, other):
        return Jet(other * self.value, other * self.grad)

    def __neg__(self):
        return Jet(-self.value, -self.grad)

    def __pow__(self, exponent):
        if not isinstance(exponent, int) or exponent < 0:
            raise ValueError("jets support non-negative integer powers only")
        if exponent == 0:
            return Jet(1.0, np.zeros_like(self.grad))
        return Jet(self.value ** exponent,
                   (exponent * self.value ** (exponent - 1)) * self.grad)

    def __repr__(self):
        return f"Jet({self.value!r}, {self.grad!r})"
