"""Closed-form communication costs.

:class:`CostModel` gives the exact number of payload bits (both directions
summed) that this implementation sends for each gadget, block and math
function, computed from the protocol structure alone.  ``paper_bound`` holds
the published per-block expressions for comparison.  The audit measures the
real protocols and checks them against both.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence

from . import cleartext as ct
from .cleartext import MathParams
from .gadgets import LEAF_BITS

# hint kinds accepted by the block formulas
NONE, PUBLIC, SHARED = "none", "public", "shared"


@dataclass(frozen=True)
class CostModel:
    lam: int = 128

    # -- gadgets ---------------------------------------------------------

    def ot(self, k: int, n: int) -> int:
        return (self.lam if k == 2 else 2 * self.lam) + k * n

    def cot(self, n: int, d: int = 1) -> int:
        return self.lam + d * n

    def b2a(self, l: int) -> int:
        return self.cot(l)

    def mux(self, l: int) -> int:
        return 2 * self.cot(l)

    def lut(self, m: int, n: int) -> int:
        return self.ot(1 << m, n)

    def and1(self) -> int:
        return self.ot(4, 1) + 4

    def and2(self) -> int:
        return self.ot(8, 2) + 6

    def mill(self, l: int, lt: bool = True, eq: bool = False) -> int:
        """Comparison tree over LEAF_BITS-bit leaves, paired from the bottom."""
        nleaves = -(-l // LEAF_BITS)
        # each tree node: [width, need_lt, need_eq, children]
        level = [[min(LEAF_BITS, l - i * LEAF_BITS), False, False, None] for i in range(nleaves)]
        while len(level) > 1:
            nxt = [[0, False, False, (level[i], level[i + 1])] for i in range(0, len(level) - 1, 2)]
            if len(level) % 2:
                nxt.append(level[-1])
            level = nxt
        root = level[0]
        root[1], root[2] = lt, eq
        total = 0
        stack = [root]
        while stack:
            node = stack.pop()
            _, nlt, neq, kids = node
            if kids is None:
                total += self.ot(1 << node[0], int(nlt) + int(neq))
                continue
            lo, hi = kids
            hi[1] |= nlt
            hi[2] |= nlt or neq
            lo[1] |= nlt
            lo[2] |= neq
            total += self.and2() if (nlt and neq) else self.and1()
            stack += [hi, lo]
        return total

    def wrap(self, l: int) -> int:
        return self.mill(l, True, False)

    def wrap_eq(self, l: int) -> int:
        return self.mill(l, True, True)

    def eq(self, l: int) -> int:
        return self.mill(l, False, True)

    # -- blocks ----------------------------------------------------------

    def msb_to_wrap(self, hint: str) -> int:
        return self.ot(2, 1) if hint == PUBLIC else self.ot(4, 1)

    def _w(self, l: int, hint: str) -> int:
        return self.wrap(l) if hint == NONE else self.msb_to_wrap(hint)

    def zxt(self, m: int, n: int, hint: str = NONE) -> int:
        return self._w(m, hint) + self.b2a(n - m)

    sxt = zxt

    def lrs(self, l: int, s: int, hint: str = NONE) -> int:
        hi = self.wrap_eq(l - s) + self.and1() if hint == NONE else self.msb_to_wrap(hint)
        return self.wrap(s) + hi + self.b2a(l) + self.b2a(s)

    ars = lrs

    def tr(self, l: int, s: int) -> int:
        return self.wrap(s) + self.b2a(l - s)

    def msb(self, l: int) -> int:
        return self.wrap(l - 1) if l > 1 else 0

    def div_pow2(self, l: int, s: int) -> int:
        return self.msb(l) + self.eq(s) + self.and1() + self.b2a(l) + self.ars(l, s, SHARED)

    def cross(self, bits: int, l: int, d: int = 1, rows: int = 1) -> int:
        return sum(rows * self.cot(l - i, d) for i in range(min(bits, l)))

    def umult(self, m: int, n: int, l: int, hx: str = NONE, hy: str = NONE) -> int:
        mu = min(m, n)
        cost = 2 * self.cross(mu, l) + self._w(m, hx) + self._w(n, hy)
        if l > m:
            cost += self.mux(l - m)
        if l > n:
            cost += self.mux(l - n)
        return cost

    smult = umult

    def smult_tr(self, m: int, n: int, l: int, s: int, hx: str = NONE, hy: str = NONE) -> int:
        return self.smult(m, n, l, hx, hy) + (self.tr(l, s) if s else 0)

    def bitmat(self, d1: int, d2: int, d3: int, l: int) -> int:
        return 2 * d1 * d2 * self.cot(l, d3)

    def matmul(self, m: int, n: int, d1: int, d2: int, d3: int) -> int:
        if m > n:
            return self.matmul(n, m, d3, d2, d1)
        e = math.ceil(math.log2(d2)) if d2 > 1 else 0
        n2 = n + e
        l = m + n2
        cost = d2 * d3 * self.zxt(n, n2) if e else 0
        cost += 2 * self.cross(m, l, d=d3, rows=d1 * d2)
        cost += d1 * d2 * self.wrap(m) + d2 * d3 * self.wrap(n2)
        cost += self.bitmat(d1, d2, d3, l - m) + self.bitmat(d3, d2, d1, l - n2)
        return cost

    def digdec(self, digits: Sequence[int]) -> int:
        c = len(digits)
        if c == 1:
            return 0
        cost = self.wrap(digits[0]) + sum(self.wrap_eq(d) for d in digits[1:-1])
        cost += (c - 2) * self.and1()
        return cost + sum(self.b2a(d) for d in digits[1:])

    def msnzb(self, l: int, d: int = 8) -> int:
        iota = l.bit_length() - 1
        d = min(d, l)
        c = l // d
        return (
            self.digdec([d] * c)
            + c * self.lut(d, iota + 1)
            + (c - 1) * self.and1()
            + c * self.mux(iota)
            + self.lut(iota, l)
        )

    # -- math functions --------------------------------------------------

    def exp(self, p: MathParams) -> int:
        k = p.m // p.d
        w = p.s_out + 2
        cost = self.digdec([p.d] * k) + k * self.lut(p.d, w)
        while k > 1:
            cost += (k // 2) * self.smult_tr(w, w, 2 * p.s_out + 2, p.s_out, PUBLIC, PUBLIC)
            k = (k + 1) // 2
        if p.n > w:
            cost += self.sxt(w, p.n, PUBLIC)
        return cost

    def recip(self, l: int, s: int, g: int, t: int) -> int:
        cost = self.digdec([s - g, g + 1]) + self.ot(1 << (g + 1), 3 * g + 7)
        cost += self.umult(g + 4, s - g, s + 4, PUBLIC) + self.sxt(s + 4, s + g + 4, PUBLIC)
        cost += self.tr(s + g + 4, g + 3)
        if t == 0:
            return cost + (self.sxt(s + 1, l, PUBLIC) if l > s + 1 else 0)
        cost += self.umult(l, s + 1, 2 * s + 2, PUBLIC, PUBLIC) + self.tr(2 * s + 2, s)
        cost += self.smult_tr(s + 1, s + 2, 2 * s + 2, s, PUBLIC, PUBLIC)
        cost += (t - 1) * (self.smult_tr(s + 2, s + 2, 2 * s + 2, s) + self.smult_tr(s + 2, s + 2, 2 * s + 2, s, PUBLIC, PUBLIC))
        return cost + (self.sxt(s + 2, l, PUBLIC) if l > s + 2 else 0)

    def h(self, p: MathParams, extend: bool = True) -> int:
        w = p.s_out + 2
        cost = self.exp(MathParams(p.m, p.s, w, p.s_out, d=p.d)) + self.recip(w, p.s_out, p.g, p.t)
        if extend and p.n > w:
            cost += self.sxt(w, p.n, PUBLIC)
        return cost

    def sigmoid(self, p: MathParams) -> int:
        w = p.s_out + 2
        cost = self.msb(p.m) + self.mux(p.m) + self.h(p, extend=False) + self.mux(w)
        return cost + (self.sxt(w, p.n, PUBLIC) if p.n > w else 0)

    def tanh(self, p: MathParams) -> int:
        return self.sigmoid(MathParams(p.m, p.s - 1, p.n, p.s_out, d=p.d, g=p.g, t=p.t))

    def rsqrt(self, l: int, s: int, s_out: int, g: int, t: int) -> int:
        sw = s_out + 2
        wd = ct.rsqrt_widths(l, s, s_out)
        cost = self.msnzb(l) + l * self.b2a(l)
        cost += self.umult(l, l, l, SHARED, SHARED)
        cost += self.tr(l - 1, l - 1 - g) + self.lut(g + 1, g + 4)
        cost += (self.tr(l, l - 2 - s_out) if l - 2 - s_out else 0) + self.tr(l, l - 1 - s_out)
        cost += self.zxt(s_out + 1, sw, PUBLIC) + self.mux(sw)
        for i in range(t):
            ph = PUBLIC if i == 0 else NONE
            cost += self.smult_tr(sw, sw, 2 * s_out + 2, s_out, ph, ph)
            cost += self.umult(sw, sw, 2 * s_out + 2, SHARED if i == 0 else PUBLIC, PUBLIC) + self.tr(2 * s_out + 2, s_out)
            cost += self.ars(sw, 1, PUBLIC)
            cost += self.smult_tr(sw, sw, 2 * s_out + 2, s_out, PUBLIC)
        cost += self.smult_tr(sw, wd["cw"], wd["final"], wd["final_tr"], PUBLIC, PUBLIC)
        zw = wd["final"] - wd["final_tr"]
        if zw < l:
            cost += self.zxt(zw, l, PUBLIC)
        return cost

    def math(self, fn: str, s: int, s_out: int, m: int = 16) -> int:
        if fn == "exp":
            return self.exp(MathParams.exp(s, s_out, m, m))
        if fn == "sigmoid":
            return self.sigmoid(MathParams.sigmoid(s, s_out, m, m))
        if fn == "tanh":
            return self.tanh(MathParams.tanh(s, s_out, m, m))
        if fn == "rsqrt":
            p = MathParams.rsqrt(s, s_out, m)
            return self.rsqrt(m, s, s_out, p.g, p.t)
        raise ValueError(f"unknown function {fn!r}")


# -- published per-block expressions ------------------------------------


def _log2(x: int) -> int:
    return math.ceil(math.log2(x))


def paper_bound(name: str, lam: int = 128, **kw) -> float:
    """Published communication expression for block ``name`` (bits).

    ``name`` may carry a leading "*" for the variant with public input MSBs.
    Keyword arguments are the block's widths (l, s, m, n, d, d1, d2, d3, ...).
    """
    f = _PAPER.get(name)
    if f is None:
        raise KeyError(f"no published expression for {name!r}")
    return f(lam, **kw)


def _mult(lam, m, n, **_):
    mu, nu = min(m, n), max(m, n)
    return lam * (3 * mu + nu + 4) + 2 * mu * nu + mu * mu + 17 * mu + 16 * nu


def _mult_star(lam, m, n, **_):
    mu, nu = min(m, n), max(m, n)
    return lam * (2 * mu + 6) + 2 * mu * nu + mu * mu + 3 * mu + 2 * nu + 4


def _msnzb(lam, l, d, **_):
    iota = l.bit_length() - 1
    c = l // d
    per = lam * (d + 8) + (1 << d) * (iota + 1) + 15 * d + 2 * iota + 60
    return (c - 1) * per + 6 * lam + (1 << d) * (iota + 1) + l * l + 2 * iota


_PAPER: Dict[str, Callable[..., float]] = {
    "OT": lambda lam, k, n, **_: (lam if k == 2 else 2 * lam) + k * n,
    "COT": lambda lam, n, **_: lam + n,
    "B2A": lambda lam, l, **_: lam + l,
    "MUX": lambda lam, l, **_: 2 * (lam + l),
    "LUT": lambda lam, m, n, **_: 2 * lam + (1 << m) * n,
    "Mill": lambda lam, l, **_: lam * l + 14 * l,
    "ZXt": lambda lam, m, n, **_: lam * (m + 1) + 13 * m + n,
    "SXt": lambda lam, m, n, **_: lam * (m + 1) + 13 * m + n,
    "*ZXt": lambda lam, m, n, **_: 2 * lam - m + n + 2,
    "*SXt": lambda lam, m, n, **_: 2 * lam - m + n + 2,
    "LRS": lambda lam, l, s, **_: lam * (l + 3) + 15 * l + s + 20,
    "ARS": lambda lam, l, s, **_: lam * (l + 3) + 15 * l + s + 20,
    "*LRS": lambda lam, l, s, **_: lam * (s + 3) + l + 15 * s + 2,
    "*ARS": lambda lam, l, s, **_: lam * (s + 3) + l + 15 * s + 2,
    "TR": lambda lam, l, s, **_: lam * (s + 1) + l + 13 * s,
    "DivPow2": lambda lam, l, s, **_: lam * (l + 7 * s / 4 + 4) + 16 * l + 23 * s - 5,
    "UMult": _mult,
    "SMult": _mult,
    "*UMult": _mult_star,
    "*SMult": _mult_star,
    "DigDec": lambda lam, l, d, **_: (l // d - 1) * (lam * (d + 2) + 15 * d + 20),
    "MSNZB": _msnzb,
}


def paper_names() -> List[str]:
    return sorted(_PAPER)


def shared_hint_extra(lam: int, inputs: int) -> int:
    """Extra bits when the MSBs are known in shared rather than public form."""
    return inputs * (lam + 2)


def kb(bits: float) -> float:
    """Bits to kilobytes (1 KB = 1024 bytes)."""
    return bits / 8 / 1024


def paper_kb(fn: str) -> Optional[float]:
    """Published per-instance communication for the math functions (KB)."""
    return {"exp": 2.12, "sigmoid": 4.88, "rsqrt": 6.0}.get(fn)
