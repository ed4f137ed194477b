"""Mixed-bitwidth building blocks over additive shares.

Each function is called by both parties with their own local shares and
returns this party's output share.  Widths are explicit.  Hints let a caller
that already knows the MSB of the shared value (publicly or as a boolean
share) replace the expensive wrap computation with :func:`msb_to_wrap`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import gadgets as gd
from . import ring
from .gadgets import OtBatch
from .ring import ContractError
from .transport import Session

U64 = np.uint64
ONE = U64(1)


def _m(l: int) -> np.uint64:
    return ring.mask(l)


def _arr(x) -> np.ndarray:
    return np.asarray(x, dtype=U64)


def _p0(sess: Session) -> np.uint64:
    return U64(1 if sess.party == 0 else 0)


@dataclass(frozen=True)
class WrapHint:
    """What is known about the MSB of a shared value.

    kind "none": nothing; "public": ``bit`` is the MSB, known to both
    parties; "shared": ``bit`` is this party's XOR share of the MSB.
    """

    kind: str = "none"
    bit: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        if self.kind not in ("none", "public", "shared"):
            raise ContractError(f"unknown hint kind {self.kind!r}")
        if self.kind != "none" and self.bit is None:
            raise ContractError("hint needs a bit")

    @classmethod
    def public(cls, bit) -> "WrapHint":
        return cls("public", _arr(bit))

    @classmethod
    def shared(cls, bit) -> "WrapHint":
        return cls("shared", _arr(bit))

    def flipped(self, sess: Session) -> "WrapHint":
        """Hint for x + 2^{l-1}: the MSB flips (P0 flips its share)."""
        if self.kind == "public":
            return WrapHint("public", self.bit ^ ONE)
        if self.kind == "shared":
            return WrapHint("shared", self.bit ^ _p0(sess))
        return self


NO_HINT = WrapHint()


def _msb_wrap_fn(mx, m0, m1):
    return ((mx ^ ONE) & (m0 ^ m1)) ^ (m0 & m1)


def msb_to_wrap(sess: Session, x, l: int, hint: WrapHint) -> np.ndarray:
    """Share of wrap(x_0, x_1, 2^l) given the MSB of x (public or shared)."""
    if hint.kind == "none":
        raise ContractError("msb_to_wrap needs a public or shared MSB")
    x = _arr(x)
    shape = x.shape
    mine = ring.msb(x.ravel() & _m(l), l)
    hb = np.broadcast_to(hint.bit, shape).ravel().astype(U64)
    count = mine.shape[0]
    with sess.scope("MSB2Wrap"):
        if hint.kind == "public":
            if sess.party == 0:
                r = sess.private.bits((count,))
                j = np.arange(2, dtype=U64)[None, :]
                msgs = _msb_wrap_fn(hb[:, None], mine[:, None], j) ^ r[:, None]
                gd.ot(sess, 0, 2, 1, msgs=msgs)
                w = r
            else:
                w = gd.ot(sess, 0, 2, 1, idx=mine)
        else:
            if sess.party == 0:
                r = sess.private.bits((count,))
                j = np.arange(4, dtype=U64)[None, :]
                jm, jx = j & ONE, j >> ONE
                msgs = _msb_wrap_fn(hb[:, None] ^ jx, mine[:, None], jm) ^ r[:, None]
                gd.ot(sess, 0, 4, 1, msgs=msgs)
                w = r
            else:
                w = gd.ot(sess, 0, 4, 1, idx=mine | (hb << ONE))
    return w.reshape(shape)


def _wrap_or_hint(sess, x, l, hint: WrapHint):
    if hint.kind == "none":
        return gd.wrap(sess, x, l)
    return msb_to_wrap(sess, x, l, hint)


# -- extension -----------------------------------------------------------


def zxt(sess: Session, x, m: int, n: int, hint: WrapHint = NO_HINT) -> np.ndarray:
    """Zero-extend shares over 2^m to shares over 2^n."""
    if n <= m:
        raise ContractError(f"zxt needs n > m, got m={m}, n={n}")
    x = _arr(x) & _m(m)
    with sess.scope("ZXt"):
        w = _wrap_or_hint(sess, x, m, hint)
        wa = gd.b2a(sess, w, n - m)
        y = (x - (wa << U64(m))) & _m(n)
    return y


def sxt(sess: Session, x, m: int, n: int, hint: WrapHint = NO_HINT) -> np.ndarray:
    """Sign-extend shares over 2^m to shares over 2^n."""
    if n <= m:
        raise ContractError(f"sxt needs n > m, got m={m}, n={n}")
    half = U64(1 << (m - 1))
    x = _arr(x) & _m(m)
    with sess.scope("SXt"):
        xp = (x + _p0(sess) * half) & _m(m)
        y = zxt(sess, xp, m, n, hint.flipped(sess))
        y = (y - _p0(sess) * half) & _m(n)
    return y


# -- truncation family ---------------------------------------------------


def _check_shift(l: int, s: int) -> None:
    if not 0 < s < l:
        raise ContractError(f"shift {s} must satisfy 0 < s < {l}")


def lrs(sess: Session, x, l: int, s: int, hint: WrapHint = NO_HINT) -> np.ndarray:
    """Logical right shift by s, staying over 2^l."""
    _check_shift(l, s)
    x = _arr(x) & _m(l)
    u, v = x >> U64(s), x & _m(s)
    with sess.scope("LRS"):
        c = gd.wrap(sess, v, s)
        if hint.kind == "none":
            d, e = gd.wrap_eq(sess, u, l - s)
            w = d ^ gd.and_(sess, c, e)
        else:
            w = msb_to_wrap(sess, x, l, hint)
        ca = gd.b2a(sess, c, l)
        wa = gd.b2a(sess, w, s)
        y = (u - (wa << U64(l - s)) + ca) & _m(l)
    return y


def ars(sess: Session, x, l: int, s: int, hint: WrapHint = NO_HINT) -> np.ndarray:
    """Arithmetic right shift by s, staying over 2^l."""
    _check_shift(l, s)
    x = _arr(x) & _m(l)
    p0 = _p0(sess)
    with sess.scope("ARS"):
        xp = (x + p0 * U64(1 << (l - 1))) & _m(l)
        y = lrs(sess, xp, l, s, hint.flipped(sess))
        y = (y - p0 * U64(1 << (l - s - 1))) & _m(l)
    return y


def tr(sess: Session, x, l: int, s: int) -> np.ndarray:
    """Truncate-reduce: drop s low bits, result over 2^{l-s}.

    Knowledge of the MSB does not help here: only the carry out of the low s
    bits is needed, so there is no hinted variant.
    """
    _check_shift(l, s)
    x = _arr(x) & _m(l)
    u, v = x >> U64(s), x & _m(s)
    with sess.scope("TR"):
        c = gd.wrap(sess, v, s)
        ca = gd.b2a(sess, c, l - s)
        y = (u + ca) & _m(l - s)
    return y


def msb(sess: Session, x, l: int) -> np.ndarray:
    """Boolean share of MSB(x), via a wrap over the low l-1 bits."""
    x = _arr(x) & _m(l)
    mine = ring.msb(x, l)
    if l == 1:
        return mine
    carry = gd.wrap(sess, x & _m(l - 1), l - 1)
    return mine ^ carry


def div_pow2(sess: Session, x, l: int, s: int) -> np.ndarray:
    """C-style signed division by 2^s (quotient rounded toward zero)."""
    _check_shift(l, s)
    x = _arr(x) & _m(l)
    p0 = _p0(sess)
    with sess.scope("DivPow2"):
        mx = msb(sess, x, l)
        v = x & _m(s)
        if sess.party == 1:
            v = (v - ONE) & _m(s)
        c = gd.eq_ones(sess, v, s) ^ p0  # [low s bits of x != 0]
        t = gd.and_(sess, mx, c)
        ta = gd.b2a(sess, t, l)
        y = ars(sess, x, l, s, WrapHint.shared(mx))
        y = (y + ta) & _m(l)
    return y


# -- multiplication ------------------------------------------------------


def cross_mult(sess: Session, x, m: int, n: int, l: int, short_party: int) -> np.ndarray:
    """Shares of x_P0 * y_P1 mod 2^l for values private to each party.

    Each party passes its own private operand (P0 an m-bit value, P1 an
    n-bit value).  ``short_party`` holds the operand that gets bit-decomposed:
    it acts as COT receiver once per bit i < min(width, l) while the other
    party supplies its operand as correlation over 2^{l-i}.
    """
    if l > m + n:
        raise ContractError(f"output width {l} exceeds m + n = {m + n}")
    x = _arr(x)
    shape = x.shape
    x = x.ravel()
    bits = min(m if short_party == 0 else n, l)
    out = np.zeros(x.shape, dtype=U64)
    with sess.scope("CrossMult"):
        batch = OtBatch(sess)
        groups = []
        for i in range(bits):
            w = l - i
            if sess.party == short_party:
                groups.append(batch.cot(1 - short_party, w, choice=(x >> U64(i)) & ONE))
            else:
                groups.append(batch.cot(1 - short_party, w, corr=x & _m(w)))
        batch.run()
        for i, g in enumerate(groups):
            out = (out + (g.out << U64(i))) & _m(l)
    return out.reshape(shape)


def _cross_terms(sess: Session, x, m: int, y, n: int, l: int) -> np.ndarray:
    """Share of x_0 y_1 + x_1 y_0 mod 2^l."""
    # term x_0 * y_1: P0 owns an m-bit value, P1 an n-bit one
    short_a = 0 if m <= n else 1
    a = cross_mult(sess, x if sess.party == 0 else y, m, n, l, short_a)
    # term y_0 * x_1: P0 owns n bits, P1 owns m bits
    short_b = 0 if n <= m else 1
    b = cross_mult(sess, y if sess.party == 0 else x, n, m, l, short_b)
    return (a + b) & _m(l)


def umult(
    sess: Session,
    x,
    m: int,
    y,
    n: int,
    l: int,
    hx: WrapHint = NO_HINT,
    hy: WrapHint = NO_HINT,
    with_wraps: bool = False,
):
    """Shares of uint(x) * uint(y) mod 2^l, for l <= m + n."""
    if l > m + n:
        raise ContractError(f"output width {l} exceeds m + n = {m + n}")
    x = _arr(x) & _m(m)
    y = _arr(y) & _m(n)
    with sess.scope("UMult"):
        z = _umult_core(sess, x, m, y, n, l, hx, hy)
    return z if with_wraps else z[0]


def _umult_core(sess, x, m, y, n, l, hx, hy):
    local = (x * y) & _m(l)
    cross = _cross_terms(sess, x, m, y, n, l)
    wx = _wrap_or_hint(sess, x, m, hx)
    wy = _wrap_or_hint(sess, y, n, hy)
    z = (local + cross) & _m(l)
    if l > m:
        g = gd.mux(sess, wx, y & _m(l - m), l - m)
        z = (z - (g << U64(m))) & _m(l)
    if l > n:
        h = gd.mux(sess, wy, x & _m(l - n), l - n)
        z = (z - (h << U64(n))) & _m(l)
    return z, wx, wy


def smult(sess: Session, x, m: int, y, n: int, l: int, hx: WrapHint = NO_HINT, hy: WrapHint = NO_HINT) -> np.ndarray:
    """Shares of int(x) * int(y) mod 2^l, for l <= m + n."""
    if l > m + n:
        raise ContractError(f"output width {l} exceeds m + n = {m + n}")
    p0 = _p0(sess)
    x = _arr(x) & _m(m)
    y = _arr(y) & _m(n)
    with sess.scope("SMult"):
        xp = (x + p0 * U64(1 << (m - 1))) & _m(m)
        yp = (y + p0 * U64(1 << (n - 1))) & _m(n)
        z, wx, wy = _umult_core(sess, xp, m, yp, n, l, hx.flipped(sess), hy.flipped(sess))
        z = z - (yp << U64(m - 1)) - (xp << U64(n - 1))
        if m + n - 2 < l:
            z = z + p0 * U64(1 << (m + n - 2))
        if m + n - 1 < l:
            z = z + ((wx + wy) << U64(m + n - 1))
        z &= _m(l)
    return z


def smult_tr(sess: Session, x, m: int, y, n: int, l: int, s: int, hx: WrapHint = NO_HINT, hy: WrapHint = NO_HINT) -> np.ndarray:
    """TR(int(x) * int(y) mod 2^l, s)."""
    with sess.scope("SMultTR"):
        z = smult(sess, x, m, y, n, l, hx, hy)
        return tr(sess, z, l, s)


def umult_tr(sess: Session, x, m: int, y, n: int, l: int, s: int, hx: WrapHint = NO_HINT, hy: WrapHint = NO_HINT) -> np.ndarray:
    with sess.scope("UMultTR"):
        z = umult(sess, x, m, y, n, l, hx, hy)
        return tr(sess, z, l, s)


# -- matrices ------------------------------------------------------------


def bitmat_mul(sess: Session, w, x, l: int) -> np.ndarray:
    """Shares of W X mod 2^l for a shared bit matrix W (d1 x d2) and X (d2 x d3)."""
    w = _arr(w)
    x = _arr(x) & _m(l)
    d1, d2 = w.shape
    d2b, d3 = x.shape
    if d2 != d2b:
        raise ContractError(f"cannot multiply {w.shape} by {x.shape}")
    with sess.scope("BitMatMul"):
        rows = np.repeat(x[None, :, :], d1, axis=0).reshape(d1 * d2, d3)
        prod = gd.cot_mux_rows(sess, w.reshape(-1), rows, l).reshape(d1, d2, d3)
        out = prod.sum(axis=1, dtype=U64) & _m(l)
    return out


def matmul(sess: Session, x, m: int, y, n: int, shape: Tuple[int, int, int]) -> np.ndarray:
    """Shares of X Y (unsigned) over 2^{m + n + e}, e = ceil(log2 d2).

    X is d1 x d2 over 2^m and Y is d2 x d3 over 2^n.  The wider-element
    matrix is zero-extended by e bits first so that sums cannot overflow.
    """
    d1, d2, d3 = shape
    x = _arr(x).reshape(d1, d2) & _m(m)
    y = _arr(y).reshape(d2, d3) & _m(n)
    if m > n:
        zt = matmul(sess, y.T.copy(), n, x.T.copy(), m, (d3, d2, d1))
        return zt.T.copy()
    e = math.ceil(math.log2(d2)) if d2 > 1 else 0
    n2 = n + e
    l = m + n2
    if l > 64:
        raise ContractError(f"matmul output width {l} exceeds 64")
    with sess.scope("MatMul"):
        yx = zxt(sess, y, n, n2) if e else y
        local = _matprod(x, yx, l)
        c = _cross_mat(sess, x, m, yx, n2, l, (d1, d2, d3))
        wx = gd.wrap(sess, x, m)
        wy = gd.wrap(sess, yx, n2)
        z = (local + c) & _m(l)
        # X Y' = ... - 2^m W_X Y' - 2^{n'} X W_Y  (mod 2^l)
        g = bitmat_mul(sess, wx, yx & _m(l - m), l - m)
        h = bitmat_mul(sess, wy.T.copy(), x.T.copy() & _m(l - n2), l - n2).T
        z = (z - (g << U64(m)) - (h << U64(n2))) & _m(l)
    return z


def _matprod(a, b, l):
    # uint64 products wrap mod 2^64, which is all that is needed for l <= 64
    return (a @ b) & _m(l)


def _cross_mat(sess, x, m, y, n, l, shape):
    """Share of X_0 Y_1 + X_1 Y_0 mod 2^l; X (m bits) is the decomposed side."""
    d1, d2, d3 = shape
    total = np.zeros((d1, d3), dtype=U64)
    with sess.scope("MatCross"):
        batch = OtBatch(sess)
        bits = min(m, l)
        plans = []
        for chooser in (0, 1):
            gs = []
            for i in range(bits):
                w = l - i
                if sess.party == chooser:
                    ch = ((x >> U64(i)) & ONE).reshape(-1)
                    gs.append(batch.cot(1 - chooser, w, choice=ch, d=d3))
                else:
                    corr = np.broadcast_to((y & _m(w))[None, :, :], (d1, d2, d3)).reshape(d1 * d2, d3)
                    gs.append(batch.cot(1 - chooser, w, corr=corr, d=d3))
            plans.append(gs)
        batch.run()
        for gs in plans:
            for i, g in enumerate(gs):
                t = g.out.reshape(d1, d2, d3).sum(axis=1, dtype=U64)
                total = (total + (t << U64(i))) & _m(l)
    return total


# -- digit decomposition and MSNZB ---------------------------------------


def digdec(sess: Session, x, l: int, digits: Sequence[int]) -> List[np.ndarray]:
    """Shares of the digits of x, least significant first; digits[i] bits each."""
    digits = list(digits)
    if sum(digits) != l or any(d <= 0 for d in digits):
        raise ContractError(f"digit sizes {digits} must be positive and sum to {l}")
    x = _arr(x) & _m(l)
    c = len(digits)
    offs = np.cumsum([0] + digits[:-1]).tolist()
    ys = [(x >> U64(o)) & _m(d) for o, d in zip(offs, digits)]
    if c == 1:
        return ys
    with sess.scope("DigDec"):
        w = [None] * (c - 1)
        e = [None] * (c - 1)
        w[0] = gd.wrap(sess, ys[0], digits[0])
        # WrapEq for the middle digits, grouped by width into single calls
        by_width = {}
        for i in range(1, c - 1):
            by_width.setdefault(digits[i], []).append(i)
        for d, idxs in by_width.items():
            stacked = np.stack([ys[i] for i in idxs])
            ws, es = gd.wrap_eq(sess, stacked, d)
            for k, i in enumerate(idxs):
                w[i], e[i] = ws[k], es[k]
        carries = [w[0]]
        for i in range(2, c):
            carries.append(w[i - 1] ^ gd.and_(sess, carries[-1], e[i - 1]))
        out = [ys[0]]
        for i in range(1, c):
            ua = gd.b2a(sess, carries[i - 1], digits[i])
            out.append((ys[i] + ua) & _m(digits[i]))
    return out


def msnzb(sess: Session, x, l: int, d: int = 8) -> np.ndarray:
    """XOR shares of the one-hot encoding of MSNZB(x); shape (..., l)."""
    iota = l.bit_length() - 1
    if 1 << iota != l:
        raise ContractError(f"msnzb needs a power-of-two width, got {l}")
    if d >= l:
        d = l
    if l % d:
        raise ContractError(f"digit size {d} must divide {l}")
    x = _arr(x) & _m(l)
    c = l // d
    p0 = _p0(sess)
    with sess.scope("MSNZB"):
        ys = digdec(sess, x, l, [d] * c)
        us, vs = [], []
        for i, y in enumerate(ys):
            proj = (ring.msnzb(np.arange(1 << d, dtype=U64), d) + U64(i * d)) & _m(iota)
            zero = (np.arange(1 << d) == 0).astype(U64)
            u, v = gd.lut(sess, [gd.Field(proj, iota, "a"), gd.Field(zero, 1, "b")], [(y, d, "a")])
            us.append(u.reshape(x.shape))
            vs.append(v.reshape(x.shape))
        # sel_i = [digit i is the highest non-zero one]; with pre_i = [all
        # digits above i are zero], sel_i = pre_i AND NOT v_i = pre_i XOR pre_{i-1}
        pre = [None] * c
        pre[c - 1] = np.full(x.shape, p0, dtype=U64)
        if c >= 2:
            pre[c - 2] = vs[c - 1]
        for i in range(c - 2, 0, -1):
            pre[i - 1] = gd.and_(sess, pre[i], vs[i])
        below = gd.and_(sess, pre[0], vs[0]) if c > 1 else vs[0]
        sel = [pre[i] ^ (pre[i - 1] if i > 0 else below) for i in range(c)]
        zsum = np.zeros(x.shape, dtype=U64)
        picked = gd.mux(sess, np.stack(sel), np.stack(us), iota)
        for i in range(c):
            zsum = (zsum + picked[i]) & _m(iota)
        out = gd.onehot(sess, zsum, l)
    return out
