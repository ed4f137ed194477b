"""Bit-exact arithmetic over Z_{2^l} and fixed-point encode/decode.

Everything here is the cleartext ground truth that the two-party protocols
must reproduce.  Values live in ``numpy.uint64`` words; the ring width is
carried separately and every operation reduces with a mask.  Scalars are
accepted everywhere and come back as plain ``int``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Union

import numpy as np

MAX_WIDTH = 64

ArrayLike = Union[int, np.ndarray]


class ContractError(ValueError):
    """A caller broke an operation's precondition."""


def check_width(l: int) -> None:
    if not 1 <= l <= MAX_WIDTH:
        raise ContractError(f"ring width {l} outside [1, {MAX_WIDTH}]")


def mask(l: int) -> np.uint64:
    check_width(l)
    return np.uint64((1 << l) - 1)


def _u64(x: ArrayLike) -> np.ndarray:
    if isinstance(x, np.ndarray):
        if x.dtype == np.uint64:
            return x
        if x.dtype.kind == "i":
            return x.astype(np.int64).view(np.uint64)
        return x.astype(np.uint64)
    return np.asarray(int(x) & 0xFFFFFFFFFFFFFFFF, dtype=np.uint64)


def _out(x: np.ndarray, like: ArrayLike):
    if isinstance(like, np.ndarray):
        return x
    return int(x)


def reduce(x: ArrayLike, l: int):
    """x mod 2^l (accepts negative Python ints and int64 arrays)."""
    return _out(_u64(x) & mask(l), x)


def add(x: ArrayLike, y: ArrayLike, l: int):
    return _out((_u64(x) + _u64(y)) & mask(l), x)


def sub(x: ArrayLike, y: ArrayLike, l: int):
    return _out((_u64(x) - _u64(y)) & mask(l), x)


def neg(x: ArrayLike, l: int):
    return _out((np.uint64(0) - _u64(x)) & mask(l), x)


def mul_mod(x: ArrayLike, y: ArrayLike, l: int):
    """uint(x) * uint(y) mod 2^l (uint64 products already wrap mod 2^64)."""
    return _out((_u64(x) * _u64(y)) & mask(l), x)


def msb(x: ArrayLike, l: int):
    return _out((_u64(x) >> np.uint64(l - 1)) & np.uint64(1), x)


def to_signed(x: ArrayLike, l: int):
    """int(x): two's-complement value of an l-bit word, as int64."""
    check_width(l)
    u = _u64(x) & mask(l)
    if l == 64:
        s = u.view(np.int64) if u.ndim else np.int64(u.astype(np.int64))
    else:
        s = u.astype(np.int64) - ((u >> np.uint64(l - 1)).astype(np.int64) << np.int64(l))
    if isinstance(x, np.ndarray):
        return s
    return int(s)


def wrap(x: ArrayLike, y: ArrayLike, l: int):
    """1 iff x + y >= 2^l over the integers."""
    check_width(l)
    xu, yu = _u64(x), _u64(y)
    m = mask(l)
    if np.any(xu > m) or np.any(yu > m):
        raise ContractError(f"wrap operands exceed width {l}")
    s = xu + yu
    if l == 64:
        w = (s < xu).astype(np.uint64)
    else:
        w = s >> np.uint64(l)
    return _out(w, x)


def _check_shift(s: int, l: int) -> None:
    check_width(l)
    if not 0 <= s < l:
        raise ContractError(f"shift amount {s} must satisfy 0 <= s < {l}")


def logical_shift_right(x: ArrayLike, l: int, s: int):
    _check_shift(s, l)
    return _out((_u64(x) & mask(l)) >> np.uint64(s), x)


def arith_shift_right(x: ArrayLike, l: int, s: int):
    _check_shift(s, l)
    v = to_signed(_u64(x), l) >> np.int64(s)
    return _out(_u64(v) & mask(l), x)


def truncate_reduce(x: ArrayLike, l: int, s: int):
    """Drop the low s bits; the result lives in Z_{2^{l-s}}."""
    _check_shift(s, l)
    return _out((_u64(x) & mask(l)) >> np.uint64(s), x)


def zero_extend(x: ArrayLike, m: int, n: int):
    if n < m:
        raise ContractError(f"cannot zero-extend {m} bits to {n}")
    check_width(n)
    return _out(_u64(x) & mask(m), x)


def sign_extend(x: ArrayLike, m: int, n: int):
    if n < m:
        raise ContractError(f"cannot sign-extend {m} bits to {n}")
    check_width(n)
    return _out(_u64(to_signed(_u64(x), m)) & mask(n), x)


def c_div_pow2(x: ArrayLike, l: int, s: int):
    """C-style int(x) / 2^s (quotient rounded toward zero), mod 2^l."""
    _check_shift(s, l)
    xu = _u64(x) & mask(l)
    low = (xu & np.uint64((1 << s) - 1)) != 0
    bump = (((xu >> np.uint64(l - 1)) & np.uint64(1)) == 1) & low
    q = _u64(arith_shift_right(xu, l, s)) + bump.astype(np.uint64)
    return _out(q & mask(l), x)


def smul(x: ArrayLike, m: int, y: ArrayLike, n: int, l: int):
    """int(x) * int(y) mod 2^l for x in Z_{2^m}, y in Z_{2^n}."""
    xs = _u64(to_signed(_u64(x), m))
    ys = _u64(to_signed(_u64(y), n))
    return _out((xs * ys) & mask(l), x)


def umul(x: ArrayLike, m: int, y: ArrayLike, n: int, l: int):
    """uint(x) * uint(y) mod 2^l."""
    return _out(((_u64(x) & mask(m)) * (_u64(y) & mask(n))) & mask(l), x)


# -- fixed point ---------------------------------------------------------


@dataclass(frozen=True)
class FixFmt:
    width: int
    scale: int
    signed: bool = True

    def __post_init__(self) -> None:
        check_width(self.width)
        if not 0 <= self.scale < self.width:
            raise ContractError(f"scale {self.scale} must be in [0, {self.width})")


def encode(r, fmt: FixFmt):
    """floor(r * 2^s) mod 2^l.  Floats are taken at their exact binary value."""
    if isinstance(r, np.ndarray):
        v = np.floor(r.astype(np.float64) * float(2**fmt.scale)).astype(np.int64)
        return _u64(v) & mask(fmt.width)
    q = Fraction(r) * (1 << fmt.scale)
    return (q.numerator // q.denominator) & ((1 << fmt.width) - 1)


def interpret(x: ArrayLike, fmt: FixFmt):
    """Rational value of x under fmt: exact Fraction for scalars, float64 for arrays."""
    if fmt.signed:
        v = to_signed(x, fmt.width)
    else:
        v = reduce(x, fmt.width)
    if isinstance(x, np.ndarray):
        return np.asarray(v, dtype=np.float64) / float(2**fmt.scale)
    return Fraction(int(v), 1 << fmt.scale)


# -- scalar wrapper ------------------------------------------------------


@dataclass(frozen=True)
class RingElem:
    """A single element of Z_{2^width}."""

    value: int
    width: int

    def __post_init__(self) -> None:
        check_width(self.width)
        if not 0 <= self.value < (1 << self.width):
            raise ContractError(f"{self.value} does not fit in {self.width} bits")

    @classmethod
    def of(cls, v: int, width: int) -> "RingElem":
        return cls(v & ((1 << width) - 1), width)

    def _same(self, other: "RingElem") -> None:
        if self.width != other.width:
            raise ContractError(f"width mismatch: {self.width} vs {other.width}")

    def __add__(self, other: "RingElem") -> "RingElem":
        self._same(other)
        return RingElem(add(self.value, other.value, self.width), self.width)

    def __sub__(self, other: "RingElem") -> "RingElem":
        self._same(other)
        return RingElem(sub(self.value, other.value, self.width), self.width)

    def __neg__(self) -> "RingElem":
        return RingElem(neg(self.value, self.width), self.width)

    def __mul__(self, other: "RingElem") -> "RingElem":
        self._same(other)
        return RingElem(mul_mod(self.value, other.value, self.width), self.width)

    @property
    def msb(self) -> int:
        return msb(self.value, self.width)

    @property
    def signed(self) -> int:
        return to_signed(self.value, self.width)

    def wraps_with(self, other: "RingElem") -> int:
        self._same(other)
        return wrap(self.value, other.value, self.width)

    def lshr(self, s: int) -> "RingElem":
        return RingElem(logical_shift_right(self.value, self.width, s), self.width)

    def ashr(self, s: int) -> "RingElem":
        return RingElem(arith_shift_right(self.value, self.width, s), self.width)

    def tr(self, s: int) -> "RingElem":
        return RingElem(truncate_reduce(self.value, self.width, s), self.width - s)

    def zext(self, n: int) -> "RingElem":
        return RingElem(zero_extend(self.value, self.width, n), n)

    def sext(self, n: int) -> "RingElem":
        return RingElem(sign_extend(self.value, self.width, n), n)

    def div_pow2(self, s: int) -> "RingElem":
        return RingElem(c_div_pow2(self.value, self.width, s), self.width)


@dataclass
class Matrix:
    """Row-major matrix of ring elements sharing one width."""

    rows: int
    cols: int
    elems: np.ndarray
    width: int

    def __post_init__(self) -> None:
        check_width(self.width)
        self.elems = _u64(np.asarray(self.elems)).reshape(self.rows, self.cols)
        if np.any(self.elems > mask(self.width)):
            raise ContractError("matrix entry exceeds declared width")

    def matmul(self, other: "Matrix", l: int) -> "Matrix":
        """uint(X) x uint(Y) mod 2^l, accumulating in exact integers."""
        if self.cols != other.rows:
            raise ContractError(f"cannot multiply {self.rows}x{self.cols} by {other.rows}x{other.cols}")
        a = self.elems.astype(object)
        b = other.elems.astype(object)
        z = (a @ b) % (1 << l)
        return Matrix(self.rows, other.cols, z.astype(np.uint64), l)


def msnzb(x: ArrayLike, l: int):
    """Index of the most significant non-zero bit; MSNZB(0) = 0."""
    xu = _u64(x) & mask(l)
    k = np.zeros(xu.shape, dtype=np.uint64)
    for i in range(1, l):
        k = np.where((xu >> np.uint64(i)) != 0, np.uint64(i), k)
    return _out(k, x)
