"""Cleartext fixed-point math: LUT builders and bit-exact reference functions.

These functions define, bit for bit, what the secure protocols in
:mod:`twopc_math.secmath` must output.  All of them are vectorised over
``numpy.uint64`` inputs.  Passing ``checked=True`` additionally asserts that
every intermediate value fits the bitwidth it is declared at, i.e. that the
modular reductions in the pipeline never actually discard information.
"""

from __future__ import annotations

import functools
import math
import struct
from dataclasses import dataclass
from fractions import Fraction
from typing import BinaryIO, List, Optional

import gmpy2
import numpy as np

from . import ring
from .ring import ContractError

U64 = np.uint64


@dataclass(frozen=True)
class MathParams:
    """Bitwidths/scales of one math call plus its approximation knobs.

    ``m, s`` describe the input, ``n, s_out`` the output.  ``d`` is the digit
    size for the exponential LUTs, ``g`` the number of fraction bits indexing
    the reciprocal / rsqrt LUTs and ``t`` the Goldschmidt iteration count.
    """

    m: int
    s: int
    n: int
    s_out: int
    d: int = 8
    g: int = 0
    t: int = 0

    def __post_init__(self) -> None:
        if self.t < 0:
            raise ContractError("iteration count t must be >= 0")

    @classmethod
    def exp(cls, s: int, s_out: int, m: int = 16, n: int = 16, d: int = 8) -> "MathParams":
        return cls(m, s, n, s_out, d=d)

    @classmethod
    def sigmoid(cls, s: int, s_out: int, m: int = 16, n: int = 16, d: int = 8) -> "MathParams":
        return cls(m, s, n, s_out, d=d, g=math.ceil((s_out - 2) / 2), t=0)

    tanh = sigmoid

    @classmethod
    def rsqrt(cls, s: int, s_out: int, l: int = 16) -> "MathParams":
        return cls(l, s, l, s_out, g=math.ceil(s_out / 2), t=1)


@dataclass
class Lut:
    """2^m entries of n bits each."""

    m: int
    n: int
    entries: np.ndarray

    def __post_init__(self) -> None:
        self.entries = np.asarray(self.entries, dtype=U64)
        if self.entries.shape != (1 << self.m,):
            raise ContractError(f"LUT needs {1 << self.m} entries, got {self.entries.shape}")
        if np.any(self.entries > ring.mask(self.n)):
            raise ContractError(f"LUT entry exceeds {self.n} bits")

    def __getitem__(self, idx):
        return self.entries[idx]

    _HEADER = struct.Struct("<4sBBI")

    def dump(self, fh: BinaryIO) -> None:
        fh.write(self._HEADER.pack(b"LUT1", self.m, self.n, len(self.entries)))
        fh.write(self.entries.astype("<u8").tobytes())

    @classmethod
    def load(cls, fh: BinaryIO) -> "Lut":
        magic, m, n, count = cls._HEADER.unpack(fh.read(cls._HEADER.size))
        if magic != b"LUT1":
            raise ValueError("not a LUT file")
        data = np.frombuffer(fh.read(8 * count), dtype="<u8")
        if len(data) != count:
            raise ValueError("truncated LUT file")
        return cls(m, n, data.astype(U64))


# -- LUT construction ----------------------------------------------------

_PREC = 160


@functools.lru_cache(maxsize=None)
def build_exp_luts(m: int, s: int, s_out: int, d: int) -> tuple:
    """Tables L_i(j) = floor(e^{-2^{d i - s} j} * 2^{s_out}) at width s_out + 2."""
    if d <= 0 or m % d:
        raise ContractError(f"digit size {d} must divide input width {m}")
    luts = []
    with gmpy2.context(gmpy2.get_context(), precision=_PREC):
        for i in range(m // d):
            step = gmpy2.mpfr(2) ** (d * i - s)
            vals = [int(gmpy2.floor(gmpy2.exp(-step * j) * (1 << s_out))) for j in range(1 << d)]
            luts.append(Lut(d, s_out + 2, vals))
    return tuple(luts)


def recip_entry(e: int, g: int) -> tuple:
    """Tangent-at-midpoint coefficients (c0, c1) for segment e of [1, 2)."""
    vm = 1 + Fraction(2 * e + 1, 1 << (g + 1))
    c1 = (1 / vm + Fraction(1, 1 << (g + 1)) / (vm * vm)) * (1 << (2 * g + 2))
    c0 = Fraction(1 << (g + 3)) / (vm * vm)
    return math.floor(c0), math.floor(c1)


@functools.lru_cache(maxsize=None)
def build_recip_luts(g: int) -> tuple:
    """(c0 table, c1 table), indexed by (bit_s(v) << g) | e.

    Rows with the integer bit clear only arise for v = 2 exactly (the input
    2^{s'} + 1 reaches it when the exponential returns 1); they hold the
    constants that make the pipeline return exactly 1/2.
    """
    c0 = np.zeros(1 << (g + 1), dtype=U64)
    c1 = np.full(1 << (g + 1), 1 << (2 * g + 1), dtype=U64)
    for e in range(1 << g):
        a, b = recip_entry(e, g)
        c0[(1 << g) | e] = a
        c1[(1 << g) | e] = b
    return Lut(g + 1, g + 4, c0), Lut(g + 1, 2 * g + 3, c1)


@functools.lru_cache(maxsize=None)
def build_rsqrt_lut(g: int) -> Lut:
    """floor(2^{g+2} / sqrt((B+1)(1 + e/2^g))) indexed by (e << 1) | B."""
    vals = np.zeros(1 << (g + 1), dtype=U64)
    for e in range(1 << g):
        for b in (0, 1):
            num = (1 << (2 * g + 4)) << g
            den = (b + 1) * ((1 << g) + e)
            vals[(e << 1) | b] = math.isqrt(num // den)
    return Lut(g + 1, g + 4, vals)


@functools.lru_cache(maxsize=None)
def msnzb_digit_luts(d: int, l: int, offset: int) -> tuple:
    """(proj, zeros) tables for one d-bit digit sitting ``offset`` bits up.

    proj(y) = MSNZB(y) + offset (offset itself for y = 0), zeros(y) = [y == 0].
    """
    iota = _log2_exact(l)
    ys = np.arange(1 << d, dtype=U64)
    proj = (ring.msnzb(ys, d) + U64(offset)) & ring.mask(iota)
    zeros = (ys == 0).astype(U64)
    return Lut(d, iota, proj), Lut(d, 1, zeros)


@functools.lru_cache(maxsize=None)
def onehot_lut_bits(l: int) -> np.ndarray:
    """(l, l) 0/1 matrix: row z is the one-hot encoding of index z."""
    return np.eye(l, dtype=U64)


def _log2_exact(l: int) -> int:
    iota = l.bit_length() - 1
    if 1 << iota != l:
        raise ContractError(f"bitwidth {l} is not a power of two")
    return iota


# -- shared pipeline helpers --------------------------------------------


class _Check:
    def __init__(self, on: bool) -> None:
        self.on = on

    def signed(self, val: np.ndarray, width: int, what: str) -> None:
        if not self.on:
            return
        lo, hi = -(1 << (width - 1)), (1 << (width - 1)) - 1
        if np.any(val < lo) or np.any(val > hi):
            raise OverflowError(f"{what}: value escapes signed {width}-bit range")

    def unsigned(self, val: np.ndarray, width: int, what: str) -> None:
        if not self.on:
            return
        if np.any(val < 0) or np.any(val >= (1 << width)):
            raise OverflowError(f"{what}: value escapes unsigned {width}-bit range")


def _sint(x, w):
    return ring.to_signed(np.asarray(x, dtype=U64), w)


def smult_tr(a, m, b, n, l, s, chk: Optional[_Check] = None):
    """TR(int(a) * int(b) mod 2^l, s): the multiply-then-truncate composite."""
    if chk is not None and chk.on:
        chk.signed(_sint(a, m) * _sint(b, n), l, "smult")
    z = ring.smul(a, m, b, n, l)
    return tr(z, l, s)


def umult(a, m, b, n, l, chk: Optional[_Check] = None):
    if chk is not None and chk.on:
        chk.unsigned(a.astype(np.int64) * b.astype(np.int64), l, "umult")
    return ring.umul(a, m, b, n, l)


def tr(x, l, s):
    if s == 0:
        return x & ring.mask(l)
    return ring.truncate_reduce(x, l, s)


def sx(x, m, n):
    if n == m:
        return x & ring.mask(m)
    return ring.sign_extend(x, m, n)


def tree_order(k: int) -> List[List[int]]:
    """Pairing schedule for a product of k leaves.

    Each level pairs adjacent items left to right; an odd item at the end is
    promoted unchanged.  Returned as the list of level widths, which is all
    both the cleartext and the secure tree need.
    """
    levels = []
    while k > 1:
        levels.append(k)
        k = (k + 1) // 2
    return levels


# -- reference functions -------------------------------------------------


def rexp_ref(x, p: MathParams, checked: bool = False):
    """e^{-z} for unsigned z = x / 2^s, output at (n, s_out)."""
    chk = _Check(checked)
    x = np.asarray(x, dtype=U64) & ring.mask(p.m)
    if p.n < p.s_out + 2:
        raise ContractError("exp output width must be at least s_out + 2")
    luts = build_exp_luts(p.m, p.s, p.s_out, p.d)
    w = p.s_out + 2
    vals = [luts[i][(x >> U64(p.d * i)) & ring.mask(p.d)] for i in range(len(luts))]
    while len(vals) > 1:
        nxt = []
        for j in range(0, len(vals) - 1, 2):
            nxt.append(smult_tr(vals[j], w, vals[j + 1], w, 2 * p.s_out + 2, p.s_out, chk))
        if len(vals) % 2:
            nxt.append(vals[-1])
        vals = nxt
    g = vals[0]
    chk.signed(_sint(g, w), w, "exp product")
    return sx(g, w, p.n)


def _recip_fields(v, s, g):
    f = v & ring.mask(s - g)
    idx = (v >> U64(s - g)) & ring.mask(g + 1)
    return f, idx


def recip_ref(v, l: int, s: int, g: int, t: int, checked: bool = False):
    """1/v for 1 <= v/2^s <= 2: LUT-seeded tangent approximation + Goldschmidt."""
    chk = _Check(checked)
    v = np.asarray(v, dtype=U64) & ring.mask(l)
    if not 0 < g <= s:
        raise ContractError(f"need 0 < g <= s, got g={g}, s={s}")
    if checked:
        lo, hi = 1 << s, 1 << (s + 1)
        if np.any(v < lo) or np.any(v > hi):
            raise ContractError("reciprocal input outside [1, 2]")
    lut0, lut1 = build_recip_luts(g)
    f, idx = _recip_fields(v, s, g)
    c0, c1 = lut0[idx], lut1[idx]
    c2 = sx(umult(c0, g + 4, f, s - g, s + 4, chk), s + 4, s + g + 4)
    chk.signed(_sint(c2, s + g + 4), s + 4, "c2")
    w_pre = (ring.mul_mod(c1, 1 << (s - g + 1), s + g + 4) - c2) & ring.mask(s + g + 4)
    chk.signed((c1.astype(np.int64) << (s - g + 1)) - c2.astype(np.int64), s + g + 4, "w'")
    w = tr(w_pre, s + g + 4, g + 3)
    chk.signed(_sint(w, s + 1), s + 1, "w")
    if t == 0:
        return sx(w, s + 1, l)
    prod = umult(v, l, w, s + 1, 2 * s + 2, chk)
    p = (U64(1 << s) - tr(prod, 2 * s + 2, s)) & ring.mask(s + 2)
    q = (p + U64(1 << s)) & ring.mask(s + 2)
    a = smult_tr(w, s + 1, q, s + 2, 2 * s + 2, s, chk)
    for _ in range(2, t + 1):
        p = smult_tr(p, s + 2, p, s + 2, 2 * s + 2, s, chk)
        q = (p + U64(1 << s)) & ring.mask(s + 2)
        a = smult_tr(a, s + 2, q, s + 2, 2 * s + 2, s, chk)
    return sx(a, s + 2, l)


def h_ref(x, p: MathParams, checked: bool = False, extend: bool = True):
    """1 / (1 + e^{-z}) for unsigned z = x / 2^s."""
    w = p.s_out + 2
    inner = MathParams(p.m, p.s, w, p.s_out, d=p.d)
    u = rexp_ref(x, inner, checked)
    v = (u + U64(1 << p.s_out)) & ring.mask(w)
    r = recip_ref(v, w, p.s_out, p.g, p.t, checked)
    return sx(r, w, p.n) if extend else r


def _abs_and_sign(x, m):
    x = np.asarray(x, dtype=U64) & ring.mask(m)
    mx = ring.msb(x, m)
    a = (x - U64(2) * mx * x) & ring.mask(m)
    return a, mx


def sigmoid_ref(x, p: MathParams, checked: bool = False):
    """sigmoid(int(x) / 2^s), folded through 1 - sigmoid(|z|) for negative z."""
    w = p.s_out + 2
    a, mx = _abs_and_sign(x, p.m)
    u = h_ref(a, p, checked, extend=False)
    y = (u + mx * ((U64(1 << p.s_out) - U64(2) * u) & ring.mask(w))) & ring.mask(w)
    return sx(y, w, p.n)


def tanh_ref(x, p: MathParams, checked: bool = False):
    """tanh(z) = 2 sigmoid(2z) - 1, doubling z by reading x at scale s - 1."""
    if p.s < 1:
        raise ContractError("tanh needs input scale >= 1")
    half = MathParams(p.m, p.s - 1, p.n, p.s_out, d=p.d, g=p.g, t=p.t)
    u = sigmoid_ref(x, half, checked)
    return (U64(2) * u - U64(1 << p.s_out)) & ring.mask(p.n)


def rsqrt_consts(l: int, s: int, k):
    """(A, B, C) of the range reduction for MSNZB index k (array)."""
    k = np.asarray(k, dtype=np.int64)
    a = np.left_shift(np.int64(1), (l - 1 - k))
    b = np.mod(s - k, 2)
    c_exp = -np.floor_divide(-(s - k), 2) + (l - s - 1) // 2
    return a.astype(U64), b.astype(U64), np.left_shift(np.int64(1), c_exp).astype(U64)


def rsqrt_widths(l: int, s: int, s_out: int) -> dict:
    return {
        "cw": l // 2 + 2,
        "final": l // 2 + s_out + 3,
        "final_tr": (l - s - 1) // 2,
    }


def rsqrt_ref(x, l: int, s: int, s_out: int, g: int, t: int, checked: bool = False):
    """1/sqrt(x / 2^s) for unsigned x > 0, output at (l, s_out).

    x is normalised to x' = x * 2^{l-1-k} in [2^{l-1}, 2^l), so its top bit
    is always set and the next g bits index the seed table.
    """
    chk = _Check(checked)
    x = np.asarray(x, dtype=U64) & ring.mask(l)
    if checked and np.any(x == 0):
        raise ContractError("rsqrt input must be positive")
    if not (s_out >= g + 2 and l - 2 - s_out >= 0):
        raise ContractError("rsqrt needs g + 2 <= s_out <= l - 2")
    k = ring.msnzb(x, l).astype(np.int64)
    A, B, C = rsqrt_consts(l, s, k)
    xn = umult(x, l, A, l, l, chk)
    chk.unsigned(x.astype(object) << (l - 1 - k).astype(object), l, "normalised x")
    e = (xn >> U64(l - 1 - g)) & ring.mask(g)
    w = build_rsqrt_lut(g)[(e << U64(1)) | B]
    sw = s_out + 2
    x2 = tr(xn, l, l - 2 - s_out)
    q = np.where(B == 1, x2, x2 >> U64(1)) & ring.mask(sw)
    chk.unsigned(np.where(B == 1, x2, x2 >> U64(1)).astype(np.int64), sw, "q0")
    a = (w << U64(s_out - g - 2)) & ring.mask(sw)
    p = a
    for _ in range(t):
        y = smult_tr(p, sw, p, sw, 2 * s_out + 2, s_out, chk)
        if checked:
            chk.unsigned(q.astype(np.int64) * y.astype(np.int64), 2 * s_out + 2, "q*Y")
        q = tr(ring.umul(q, sw, y, sw, 2 * s_out + 2), 2 * s_out + 2, s_out)
        chk.signed(_sint(q, sw), sw, "q")
        p = (U64(3 << (s_out - 1)) - ring.arith_shift_right(q, sw, 1)) & ring.mask(sw)
        a = smult_tr(a, sw, p, sw, 2 * s_out + 2, s_out, chk)
    wd = rsqrt_widths(l, s, s_out)
    z = smult_tr(a, sw, C, wd["cw"], wd["final"], wd["final_tr"], chk)
    zw = wd["final"] - wd["final_tr"]
    chk.signed(_sint(z, zw), min(zw, l), "rsqrt result")
    if zw >= l:
        return z & ring.mask(l)
    return ring.zero_extend(z, zw, l)
