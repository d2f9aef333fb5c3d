"""Exact arithmetic in the Gaussian integers Z[i]."""

from __future__ import annotations

import re as _re
from dataclasses import dataclass
from typing import Union

INT_BITS = 128
_LIMIT = 1 << (INT_BITS - 1)


@dataclass(frozen=True, slots=True, order=True)
class GaussianInt:
    """A Gaussian integer ``re + im*i``.

    Components are checked against a signed 128-bit range; anything wider
    raises :class:`OverflowError`.
    """

    re: int
    im: int = 0

    def __post_init__(self):
        if not (-_LIMIT <= self.re < _LIMIT and -_LIMIT <= self.im < _LIMIT):
            raise OverflowError(f"component out of {INT_BITS}-bit range: ({self.re}, {self.im})")

    # ring operations -------------------------------------------------
    def __add__(self, other: GaussLike) -> GaussianInt:
        o = as_gint(other)
        return GaussianInt(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __sub__(self, other: GaussLike) -> GaussianInt:
        o = as_gint(other)
        return GaussianInt(self.re - o.re, self.im - o.im)

    def __rsub__(self, other: GaussLike) -> GaussianInt:
        return as_gint(other) - self

    def __mul__(self, other: GaussLike) -> GaussianInt:
        o = as_gint(other)
        return GaussianInt(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __neg__(self) -> GaussianInt:
        return GaussianInt(-self.re, -self.im)

    def __pow__(self, k: int) -> GaussianInt:
        if k < 0:
            raise ValueError("negative exponent")
        out, base = ONE, self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def __truediv__(self, other: GaussLike) -> GaussianInt:
        """Exact division; raises ``ValueError`` when the quotient is not integral."""
        d = as_gint(other)
        n = d.norm()
        if n == 0:
            raise ZeroDivisionError("division by zero Gaussian integer")
        num = self * d.conj()
        if num.re % n or num.im % n:
            raise ValueError(f"{d} does not divide {self}")
        return GaussianInt(num.re // n, num.im // n)

    def __bool__(self) -> bool:
        return bool(self.re or self.im)

    def conj(self) -> GaussianInt:
        return GaussianInt(self.re, -self.im)

    def norm(self) -> int:
        n = self.re * self.re + self.im * self.im
        if n >= _LIMIT:
            raise OverflowError(f"norm of {self} exceeds {INT_BITS}-bit range")
        return n

    def is_unit(self) -> bool:
        return self.norm() == 1

    def associates(self) -> list[GaussianInt]:
        return [u * self for u in UNITS]

    def to_pair(self) -> list[int]:
        return [self.re, self.im]

    def __str__(self) -> str:
        return format_gint(self)

    def __repr__(self) -> str:
        return f"GaussianInt({self.re}, {self.im})"


GaussLike = Union[GaussianInt, int, complex, tuple]

ONE = GaussianInt(1, 0)
I = GaussianInt(0, 1)
ZERO = GaussianInt(0, 0)
UNITS = (GaussianInt(1, 0), GaussianInt(0, 1), GaussianInt(-1, 0), GaussianInt(0, -1))


def as_gint(z: GaussLike) -> GaussianInt:
    if isinstance(z, GaussianInt):
        return z
    if isinstance(z, bool):
        raise TypeError("bool is not a Gaussian integer")
    if isinstance(z, int):
        return GaussianInt(z, 0)
    if isinstance(z, complex):
        if z.real != int(z.real) or z.imag != int(z.imag):
            raise ValueError(f"{z} has non-integral parts")
        return GaussianInt(int(z.real), int(z.imag))
    if isinstance(z, (tuple, list)) and len(z) == 2:
        return GaussianInt(int(z[0]), int(z[1]))
    if isinstance(z, str):
        return parse_gint(z)
    raise TypeError(f"cannot interpret {z!r} as a Gaussian integer")


def norm(z: GaussLike) -> int:
    return as_gint(z).norm()


def conj(z: GaussLike) -> GaussianInt:
    return as_gint(z).conj()


def divides(d: GaussLike, n: GaussLike) -> bool:
    """True iff ``n/d`` lies in Z[i]."""
    d, n = as_gint(d), as_gint(n)
    if not d:
        raise ValueError("divisor must be nonzero")
    q = n * d.conj()
    m = d.norm()
    return q.re % m == 0 and q.im % m == 0


def _round_div(num: int, den: int) -> int:
    # nearest integer to num/den (den > 0), ties toward zero
    q, r = divmod(num, den)
    if 2 * r > den:
        return q + 1
    if 2 * r == den:
        return q if q >= 0 else q + 1
    return q


def canonical(z: GaussLike) -> GaussianInt:
    """The associate of ``z`` lying in the quadrant ``re > 0, im >= 0``."""
    z = as_gint(z)
    if not z:
        raise ValueError("zero has no canonical associate")
    a, b = z.re, z.im
    if a > 0 and b >= 0:
        return z
    if a <= 0 and b > 0:  # multiply by -i
        return GaussianInt(b, -a)
    if a < 0 and b <= 0:
        return GaussianInt(-a, -b)
    return GaussianInt(-b, a)  # a >= 0, b < 0: multiply by i


def unit_of(z: GaussLike) -> GaussianInt:
    """The unit ``u`` with ``z == u * canonical(z)``."""
    z = as_gint(z)
    c = canonical(z)
    for u in UNITS:
        if u * c == z:
            return u
    raise AssertionError("unreachable")


def gcd(a: GaussLike, b: GaussLike) -> GaussianInt:
    """Greatest common divisor by the Euclidean algorithm, returned canonical."""
    a, b = as_gint(a), as_gint(b)
    if not a and not b:
        raise ValueError("gcd(0, 0) is undefined")
    while b:
        n = b.norm()
        num = a * b.conj()
        q = GaussianInt(_round_div(num.re, n), _round_div(num.im, n))
        a, b = b, a - q * b
    return canonical(a)


def lcm(a: GaussLike, b: GaussLike) -> GaussianInt:
    a, b = as_gint(a), as_gint(b)
    if not a or not b:
        return ZERO
    return canonical((a * b) / gcd(a, b))


_TOKEN = _re.compile(r"\s*([+-]?)\s*(\d*)\s*(i?)\s*")


def parse_gint(text: str) -> GaussianInt:
    """Parse ``"a+bi"`` style text, e.g. ``"2-i"``, ``"-3"``, ``"4i"``, ``"1+2i"``."""
    s = text.strip().replace(" ", "").replace("j", "i")
    if not s:
        raise ValueError("empty Gaussian integer literal")
    re_part = im_part = 0
    pos = 0
    seen = False
    while pos < len(s):
        m = _TOKEN.match(s, pos)
        if m is None or m.end() == pos:
            raise ValueError(f"malformed Gaussian integer literal: {text!r}")
        sign, digits, unit = m.groups()
        if not digits and not unit:
            raise ValueError(f"malformed Gaussian integer literal: {text!r}")
        if seen and not sign:
            raise ValueError(f"malformed Gaussian integer literal: {text!r}")
        val = int(digits) if digits else 1
        if sign == "-":
            val = -val
        if unit:
            im_part += val
        else:
            re_part += val
        seen = True
        pos = m.end()
    return GaussianInt(re_part, im_part)


def format_gint(z: GaussianInt) -> str:
    a, b = z.re, z.im
    if b == 0:
        return str(a)
    mag = "" if abs(b) == 1 else str(abs(b))
    if a == 0:
        return f"{'-' if b < 0 else ''}{mag}i"
    return f"{a}{'-' if b < 0 else '+'}{mag}i"
