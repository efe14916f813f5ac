"""Conversions between :class:`XReal` and mpmath high-precision numbers.

mpmath floats carry arbitrary-size binary exponents, so they can hold any
depth-0 or depth-1 XReal exactly and any depth-2 XReal whose level-1
logarithm still fits in a Python integer exponent.  They serve as the
independent higher-precision oracle for the double-precision tables.
"""

from __future__ import annotations

import math

import mpmath

from .xreal import MANTISSA_LIMIT, XReal, ZERO

# Above this level-1 logarithm we refuse to expand a depth-2 value into an
# mpf (the binary exponent would need more than ~10^5 digits).
_MAX_MP_LOG = mpmath.mpf(10) ** 300


def xreal_to_mp(x: XReal) -> mpmath.mpf:
    """Exact mpf for depth 0, exp of the mantissa for depths 1 and 2."""
    if x.sign == 0:
        return mpmath.mpf(0)
    if x.depth == 0:
        return mpmath.mpf(x.mantissa)
    if x.depth == 1:
        return x.sign * mpmath.exp(mpmath.mpf(x.mantissa))
    level1 = mpmath.exp(mpmath.mpf(abs(x.mantissa)))
    if x.mantissa < 0:
        level1 = -level1
    if abs(level1) > _MAX_MP_LOG:
        raise OverflowError("depth-2 value too large for mpmath expansion")
    return x.sign * mpmath.exp(level1)


def xreal_log_to_mp(x: XReal) -> mpmath.mpf:
    """``ln|x|`` as an mpf (always representable)."""
    return xreal_to_mp(x.log_abs())


def mp_to_xreal(v) -> XReal:
    """Round an mpf (any magnitude) to the nearest normal-form XReal."""
    v = mpmath.mpf(v)
    if v == 0:
        return ZERO
    s = 1 if v > 0 else -1
    a = abs(v)
    if mpmath.mpf("1e-300") <= a <= MANTISSA_LIMIT:
        return XReal.normalize(s, 0, float(v))
    la = mpmath.log(a)
    if abs(la) <= MANTISSA_LIMIT:
        return XReal.normalize(s, 1, float(la))
    lla = mpmath.log(abs(la))
    return XReal.normalize(s, 2, math.copysign(float(lla), float(la)))


def mp_log_to_xreal(log_value, sign: int = 1) -> XReal:
    """XReal for ``sign * exp(log_value)`` given an mpf logarithm."""
    return XReal.from_log(mp_to_xreal(log_value), sign)
