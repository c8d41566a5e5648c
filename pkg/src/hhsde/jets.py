"""Truncated Taylor (jet) arithmetic in one scalar variable, order 4.

A jet stores the Taylor coefficients c0..c4 of a function at a point, so
c_k = f^(k)(v) / k!.  Sums, products, quotients and exp follow the usual
Cauchy/Leibniz recurrences, which are exact up to floating-point rounding.
The quotient x/(e^x - 1) gets a dedicated guarded evaluation because the
raw formula is 0/0 at x = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

ORDER = 4

# Series for x/(e^x - 1) = sum B_n x^n / n!, kept through x^6.  Used inside
# the guard band |x| < SERIES_BAND where expm1 cancellation would bite.
_EXPM1_RATIO_SERIES = (1.0, -0.5, 1.0 / 12.0, 0.0, -1.0 / 720.0, 0.0, 1.0 / 30240.0)
SERIES_BAND = 1e-3


@dataclass(frozen=True, slots=True)
class Jet4:
    """Taylor coefficients (orders 0..4) of a scalar function at a point."""

    c0: float
    c1: float = 0.0
    c2: float = 0.0
    c3: float = 0.0
    c4: float = 0.0

    @staticmethod
    def constant(x: float) -> "Jet4":
        return Jet4(x)

    @staticmethod
    def variable(v: float) -> "Jet4":
        """Seed jet of the identity map at v."""
        return Jet4(v, 1.0)

    def coeffs(self) -> tuple[float, float, float, float, float]:
        return (self.c0, self.c1, self.c2, self.c3, self.c4)

    def derivative(self, k: int) -> float:
        """k-th derivative value, i.e. c_k * k!."""
        return self.coeffs()[k] * math.factorial(k)

    def __add__(self, other):
        o = _as_jet(other)
        return Jet4(*(a + b for a, b in zip(self.coeffs(), o.coeffs())))

    __radd__ = __add__

    def __neg__(self):
        return Jet4(*(-a for a in self.coeffs()))

    def __sub__(self, other):
        return self + (-_as_jet(other))

    def __rsub__(self, other):
        return _as_jet(other) + (-self)

    def __mul__(self, other):
        o = _as_jet(other)
        a, b = self.coeffs(), o.coeffs()
        return Jet4(*(
            math.fsum(a[i] * b[k - i] for i in range(k + 1)) for k in range(ORDER + 1)
        ))

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = _as_jet(other)
        a, b = self.coeffs(), o.coeffs()
        if b[0] == 0.0:
            raise ZeroDivisionError("jet division by a jet with zero value")
        q = [0.0] * (ORDER + 1)
        for k in range(ORDER + 1):
            q[k] = (a[k] - math.fsum(q[i] * b[k - i] for i in range(k))) / b[0]
        return Jet4(*q)

    def __rtruediv__(self, other):
        return _as_jet(other) / self

    def exp(self) -> "Jet4":
        a = self.coeffs()
        h = [math.exp(a[0])] + [0.0] * ORDER
        for k in range(1, ORDER + 1):
            h[k] = math.fsum(j * a[j] * h[k - j] for j in range(1, k + 1)) / k
        return Jet4(*h)


def _as_jet(x) -> Jet4:
    if isinstance(x, Jet4):
        return x
    return Jet4(float(x))


def poly_eval(jet: Jet4, coeffs) -> Jet4:
    """Evaluate a polynomial (ascending coefficients) on a jet by Horner."""
    acc = Jet4.constant(0.0)
    for c in reversed(coeffs):
        acc = acc * jet + c
    return acc


def expm1_ratio(x: float) -> float:
    """x / (e^x - 1), with the removable singularity at 0 filled in.

    Uses the Bernoulli series through x^6 for |x| < SERIES_BAND, the raw
    expm1 quotient elsewhere.
    """
    if abs(x) < SERIES_BAND:
        acc = 0.0
        for c in reversed(_EXPM1_RATIO_SERIES):
            acc = acc * x + c
        return acc
    return x / math.expm1(x)


def expm1_ratio_jet(x: Jet4) -> Jet4:
    """Jet of x/(e^x - 1); series branch inside the guard band."""
    if abs(x.c0) < SERIES_BAND:
        return poly_eval(x, _EXPM1_RATIO_SERIES)
    den = x.exp()
    # replace the order-0 coefficient with expm1 to avoid cancellation
    den = Jet4(math.expm1(x.c0), den.c1, den.c2, den.c3, den.c4)
    return x / den
