"""Extended-range real numbers stored as a sign plus a nested-logarithm mantissa.

An :class:`XReal` represents a value ``v`` at one of three *depths*:

* depth 0 -- the mantissa *is* the value (a plain float);
* depth 1 -- the mantissa is ``ln|v|``;
* depth 2 -- the mantissa is ``sgn(l) * ln|l|`` where ``l = ln|v|`` is the
  level-1 value.  Because a depth-2 number always has ``|l| > 1e15`` we have
  ``|ln|l|| > 34``, so the sign of ``l`` can be folded into the mantissa
  without ambiguity.

Normal form picks the smallest depth whose mantissa is at most ``1e15`` in
magnitude.  Two practical exceptions apply:

* values smaller than ``1e-300`` in magnitude are moved to depth 1 so that
  they do not underflow to subnormal floats;
* depth is capped at 2, so a depth-2 mantissa may exceed ``1e15``
  ("saturated").  The represented value is still well defined and ordered,
  it merely carries fewer significant digits in its level-1 logarithm.

All arithmetic is carried out on logarithms when the operands leave float
range, so magnitudes like ``exp(exp(1e50))`` are handled without overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

MANTISSA_LIMIT = 1e15
TINY_LIMIT = 1e-300
_LN_LIMIT = math.log(MANTISSA_LIMIT)
_LN_TINY = math.log(TINY_LIMIT)
# exp(d) underflows to zero (relative to 1) for d below this value
_NEGLIGIBLE_LOG_RATIO = -800.0

Number = Union[int, float, Fraction, "XReal"]


def _sgn(x: float) -> int:
    return (x > 0) - (x < 0)


@dataclass(frozen=True)
class XReal:
    """Sign/depth/mantissa scalar. Construct with :meth:`of` or the helpers."""

    sign: int
    depth: int
    mantissa: float

    # ------------------------------------------------------------------ build
    @staticmethod
    def normalize(sign: int, depth: int, mantissa: float) -> "XReal":
        """Bring an arbitrary (sign, depth, mantissa) triple to normal form."""
        mantissa = float(mantissa)
        if math.isnan(mantissa):
            raise ValueError("XReal mantissa is NaN")
        if depth == 0:
            v = mantissa if sign >= 0 else -abs(mantissa)
            if sign == 0 or v == 0.0:
                return ZERO
            if math.isinf(v):
                raise OverflowError("infinite value cannot be represented")
            a = abs(v)
            if TINY_LIMIT <= a <= MANTISSA_LIMIT:
                return XReal(_sgn(v), 0, v)
            return XReal.normalize(_sgn(v), 1, math.log(a))
        if sign == 0:
            return ZERO
        s = 1 if sign > 0 else -1
        if depth == 1:
            if math.isinf(mantissa):
                if mantissa < 0:
                    return ZERO
                raise OverflowError("XReal overflow at depth 1")
            if _LN_TINY <= mantissa <= _LN_LIMIT:
                return XReal(s, 0, s * math.exp(mantissa))
            if abs(mantissa) <= MANTISSA_LIMIT:
                return XReal(s, 1, mantissa)
            return XReal(s, 2, _sgn(mantissa) * math.log(abs(mantissa)))
        if depth == 2:
            if math.isinf(mantissa):
                if mantissa < 0:
                    return ZERO
                raise OverflowError("XReal overflow at depth 2")
            am = abs(mantissa)
            if am <= _LN_LIMIT:
                # level-1 value fits in a depth-1 mantissa
                return XReal.normalize(s, 1, _sgn(mantissa) * math.exp(am))
            return XReal(s, 2, mantissa)
        raise ValueError(f"unsupported XReal depth {depth}")

    @staticmethod
    def of(value: Number) -> "XReal":
        """Convert an int (exact, any size), float, Fraction or XReal."""
        if isinstance(value, XReal):
            return value
        if isinstance(value, bool):
            value = int(value)
        if isinstance(value, int):
            if value == 0:
                return ZERO
            s = 1 if value > 0 else -1
            a = abs(value)
            if a <= 2**53:
                return XReal.normalize(s, 0, float(value))
            # math.log is exact-to-rounding for arbitrarily large ints
            return XReal.normalize(s, 1, math.log(a))
        if isinstance(value, Fraction):
            if value == 0:
                return ZERO
            s = 1 if value > 0 else -1
            a = abs(value)
            return XReal.normalize(s, 1, math.log(a.numerator) - math.log(a.denominator))
        return XReal.normalize(1, 0, float(value))

    @staticmethod
    def from_log(log_value: Number, sign: int = 1) -> "XReal":
        """Return ``sign * exp(log_value)`` where ``log_value`` may itself be an XReal."""
        lv = XReal.of(log_value)
        if sign == 0:
            return ZERO
        if lv.depth == 0:
            return XReal.normalize(sign, 1, lv.mantissa)
        if lv.depth == 1:
            if lv.mantissa < 0:
                # |lv| < 1e-300: exp(lv) is 1 to double precision
                return XReal.normalize(sign, 0, 1.0)
            # level-1 value of the result is lv = s*exp(m), |lv| > 1e15
            return XReal.normalize(sign, 2, lv.sign * lv.mantissa)
        # lv at depth 2: ln|lv| = l = sgn(m) * exp(|m|)
        if lv.mantissa < 0:
            # |lv| < exp(-1e15): exp(lv) equals 1 to every representable digit
            return XReal.normalize(sign, 0, 1.0)
        level1 = math.exp(lv.mantissa)
        if math.isinf(level1):
            raise OverflowError("XReal overflow: exponent needs depth 3")
        return XReal.normalize(sign, 2, lv.sign * level1)

    # --------------------------------------------------------------- queries
    def is_zero(self) -> bool:
        return self.sign == 0

    @property
    def saturated(self) -> bool:
        return self.depth == 2 and abs(self.mantissa) > MANTISSA_LIMIT

    def log_abs(self) -> "XReal":
        """Natural log of ``|self|`` as an XReal."""
        if self.sign == 0:
            raise ValueError("log of zero")
        if self.depth == 0:
            return XReal.normalize(1, 0, math.log(abs(self.mantissa)))
        if self.depth == 1:
            return XReal.normalize(1, 0, self.mantissa)
        m = self.mantissa
        # level-1 value l = sgn(m) * exp(|m|)
        return XReal.normalize(_sgn(m), 1, abs(m))

    def log(self) -> "XReal":
        if self.sign < 0:
            raise ValueError("log of a negative XReal")
        return self.log_abs()

    def log10_abs(self) -> "XReal":
        return self.log_abs() * (1.0 / math.log(10.0))

    def exp(self) -> "XReal":
        return XReal.from_log(self)

    def __float__(self) -> float:
        if self.depth == 0:
            return float(self.mantissa)
        if self.depth == 1:
            try:
                return self.sign * math.exp(self.mantissa)
            except OverflowError:
                return self.sign * math.inf
        return self.sign * (math.inf if self.mantissa > 0 else 0.0)

    def to_float(self) -> float:
        """Like ``float(x)`` but raises instead of returning an infinity."""
        v = float(self)
        if math.isinf(v):
            raise OverflowError(f"{self!r} exceeds float range")
        return v

    # ----------------------------------------------------------- arithmetic
    def __neg__(self) -> "XReal":
        if self.sign == 0:
            return self
        if self.depth == 0:
            return XReal(-self.sign, 0, -self.mantissa)
        return XReal(-self.sign, self.depth, self.mantissa)

    def __abs__(self) -> "XReal":
        return -self if self.sign < 0 else self

    def __mul__(self, other: Number) -> "XReal":
        o = XReal.of(other)
        if self.sign == 0 or o.sign == 0:
            return ZERO
        if self.depth == 0 and o.depth == 0:
            p = self.mantissa * o.mantissa
            if p != 0.0 and not math.isinf(p) and abs(p) >= TINY_LIMIT:
                return XReal.normalize(1, 0, p)
        return XReal.from_log(self.log_abs() + o.log_abs(), self.sign * o.sign)

    __rmul__ = __mul__

    def __truediv__(self, other: Number) -> "XReal":
        o = XReal.of(other)
        if o.sign == 0:
            raise ZeroDivisionError("XReal division by zero")
        if self.sign == 0:
            return ZERO
        if self.depth == 0 and o.depth == 0:
            q = self.mantissa / o.mantissa
            if q != 0.0 and not math.isinf(q) and abs(q) >= TINY_LIMIT:
                return XReal.normalize(1, 0, q)
        return XReal.from_log(self.log_abs() - o.log_abs(), self.sign * o.sign)

    def __rtruediv__(self, other: Number) -> "XReal":
        return XReal.of(other) / self

    def __pow__(self, p: Number) -> "XReal":
        if isinstance(p, int) and not isinstance(p, bool):
            if p == 0:
                return ONE
            if self.sign == 0:
                if p < 0:
                    raise ZeroDivisionError("0 to a negative power")
                return ZERO
            s = self.sign if p % 2 else 1
            if self.depth == 0:
                try:
                    v = self.mantissa ** p
                    if v != 0.0 and not math.isinf(v) and abs(v) >= TINY_LIMIT:
                        return XReal.normalize(1, 0, v)
                except OverflowError:
                    pass
            return XReal.from_log(self.log_abs() * p, s)
        if self.sign < 0:
            raise ValueError("non-integer power of a negative XReal")
        if self.sign == 0:
            return ZERO
        if self.depth == 0 and not isinstance(p, XReal):
            try:
                v = self.mantissa ** float(p)
                if v != 0.0 and not math.isinf(v) and abs(v) >= TINY_LIMIT:
                    return XReal.normalize(1, 0, v)
            except OverflowError:
                pass
        return XReal.from_log(self.log_abs() * XReal.of(p))

    def sqrt(self) -> "XReal":
        return self ** 0.5

    def __add__(self, other: Number) -> "XReal":
        o = XReal.of(other)
        if o.sign == 0:
            return self
        if self.sign == 0:
            return o
        if self.depth == 0 and o.depth == 0:
            return XReal.normalize(1, 0, self.mantissa + o.mantissa)
        big, small = (self, o) if _cmp_abs(self, o) >= 0 else (o, self)
        la, lb = big.log_abs(), small.log_abs()
        d = lb - la  # <= 0
        if d.sign == 0 or (d.depth == 1 and d.mantissa < 0):
            ratio = 1.0
        elif d.depth > 0 or d.mantissa < _NEGLIGIBLE_LOG_RATIO:
            return big
        else:
            ratio = math.exp(d.mantissa)
        if big.sign == small.sign:
            return XReal.from_log(la + math.log1p(ratio), big.sign)
        if ratio == 1.0:
            return ZERO
        return XReal.from_log(la + math.log1p(-ratio), big.sign)

    __radd__ = __add__

    def __sub__(self, other: Number) -> "XReal":
        return self + (-XReal.of(other))

    def __rsub__(self, other: Number) -> "XReal":
        return XReal.of(other) - self

    # ----------------------------------------------------------- comparison
    def _cmp(self, other: Number) -> int:
        o = XReal.of(other)
        if self.sign != o.sign:
            return (self.sign > o.sign) - (self.sign < o.sign)
        if self.sign == 0:
            return 0
        return self.sign * _cmp_abs(self, o)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, (XReal, int, float, Fraction)):
            return NotImplemented
        return self._cmp(other) == 0

    def __hash__(self) -> int:
        return hash((self.sign, self.depth, self.mantissa))

    def __lt__(self, other: Number) -> bool:
        return self._cmp(other) < 0

    def __le__(self, other: Number) -> bool:
        return self._cmp(other) <= 0

    def __gt__(self, other: Number) -> bool:
        return self._cmp(other) > 0

    def __ge__(self, other: Number) -> bool:
        return self._cmp(other) >= 0

    # ------------------------------------------------------------ serialize
    def to_json(self) -> dict:
        return {"sign": self.sign, "depth": self.depth, "mantissa": self.mantissa}

    @staticmethod
    def from_json(obj: dict) -> "XReal":
        x = XReal(int(obj["sign"]), int(obj["depth"]), float(obj["mantissa"]))
        n = XReal.normalize(x.sign, x.depth, x.mantissa)
        if (n.sign, n.depth, n.mantissa) != (x.sign, x.depth, x.mantissa):
            raise ValueError(f"XReal JSON not in normal form: {obj}")
        return x

    def __repr__(self) -> str:
        return f"XReal(sign={self.sign}, depth={self.depth}, mantissa={self.mantissa!r})"

    def __str__(self) -> str:
        if self.depth == 0:
            return repr(self.mantissa)
        sgn = "-" if self.sign < 0 else ""
        if self.depth == 1:
            l10 = self.mantissa / math.log(10.0)
            e = math.floor(l10)
            frac = 10 ** (l10 - e)
            if round(frac, 6) >= 10.0:
                frac, e = frac / 10.0, e + 1
            return f"{sgn}{frac:.6f}e{e:+d}"
        inner = "-" if self.mantissa < 0 else ""
        return f"{sgn}exp({inner}exp({abs(self.mantissa)!r}))"


def _cmp_abs(a: XReal, b: XReal) -> int:
    """Compare |a| and |b| for nonzero a, b."""
    if a.sign == 0 or b.sign == 0:
        return (a.sign != 0) - (b.sign != 0)
    if a.depth == 0 and b.depth == 0:
        x, y = abs(a.mantissa), abs(b.mantissa)
        return (x > y) - (x < y)
    if a.depth == 1 and b.depth == 1:
        return (a.mantissa > b.mantissa) - (a.mantissa < b.mantissa)
    if a.depth == 2 and b.depth == 2:
        # |v| ordered by the level-1 value l, encoded monotonically in the mantissa
        return (a.mantissa > b.mantissa) - (a.mantissa < b.mantissa)
    la, lb = a.log_abs(), b.log_abs()
    return la._cmp(lb)


ZERO = XReal(0, 0, 0.0)
ONE = XReal(1, 0, 1.0)


def xr(value: Number) -> XReal:
    """Shorthand for :meth:`XReal.of`."""
    return XReal.of(value)


def xsum(values) -> XReal:
    total = ZERO
    for v in values:
        total = total + v
    return total


def xmin(*values: Number) -> XReal:
    vals = [XReal.of(v) for v in values]
    best = vals[0]
    for v in vals[1:]:
        if v < best:
            best = v
    return best
