"""Wide-precision evaluation helpers (mpmath-backed).

Reference-side quantities -- the analytic solution, error norms, eigenvalue
moduli -- must not carry measurable round-off of their own.  Everything here
is evaluated at ``WIDE_PREC_BITS`` and returned as an exact ``Fraction`` of
the computed value, so downstream arithmetic stays exact.  The one inexact
step per quantity (a square root or a trig call) is correct to within a few
ulps at 240 bits, i.e. relative error below 2**-230, far under the 2**-100
budget the reference side must honor.
"""

from __future__ import annotations

import math
from fractions import Fraction

import mpmath

WIDE_PREC_BITS = 240


def mpf_to_fraction(x: mpmath.mpf) -> Fraction:
    """Exact rational value of a finite mpmath float."""
    sign, man, exp, _ = x._mpf_
    man = int(man)
    if man == 0:
        if x == 0:
            return Fraction(0)
        raise ValueError("non-finite value has no rational representation")
    value = Fraction(man << exp) if exp >= 0 else Fraction(man, 1 << -exp)
    return -value if sign else value


def _to_mpf(x: Fraction) -> mpmath.mpf:
    return mpmath.mpf(x.numerator) / x.denominator


def wide_sqrt(x: Fraction) -> Fraction:
    """sqrt(x) for x >= 0: exact when x is a rational square, otherwise
    correct to within a few ulps at 240 bits."""
    if x < 0:
        raise ValueError("square root of a negative value")
    if x == 0:
        return Fraction(0)
    n = math.isqrt(x.numerator)
    d = math.isqrt(x.denominator)
    if n * n == x.numerator and d * d == x.denominator:
        return Fraction(n, d)
    with mpmath.workprec(WIDE_PREC_BITS):
        return mpf_to_fraction(mpmath.sqrt(_to_mpf(x)))


def wide_norm2(x: Fraction, y: Fraction) -> Fraction:
    """Euclidean norm of (x, y): the sum of squares is exact, one wide sqrt."""
    return wide_sqrt(x * x + y * y)


def wide_cos_sin(x: Fraction) -> tuple[Fraction, Fraction]:
    """(cos x, sin x) at 240 bits; mpmath raises its working precision
    internally for the argument reduction, so accuracy holds for the
    large phase arguments long integrations produce."""
    with mpmath.workprec(WIDE_PREC_BITS):
        mx = _to_mpf(x)
        return mpf_to_fraction(mpmath.cos(mx)), mpf_to_fraction(mpmath.sin(mx))
