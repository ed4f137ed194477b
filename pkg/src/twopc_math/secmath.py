"""Secure math functions over additive shares.

Every function here mirrors the matching reference in
:mod:`twopc_math.cleartext` step for step, so the revealed output equals the
reference bit for bit.  Where an operand is known to be nonnegative (or its
MSB is available as a shared bit) the multiplication and extension blocks are
given that MSB as a hint.
"""

from __future__ import annotations

import numpy as np

from . import blocks as bk
from . import cleartext as ct
from . import gadgets as gd
from . import ring
from .blocks import WrapHint
from .cleartext import MathParams
from .ring import ContractError
from .transport import Session

U64 = np.uint64


def _m(l: int) -> np.uint64:
    return ring.mask(l)


def _p0(sess: Session) -> np.uint64:
    return U64(1 if sess.party == 0 else 0)


def _pos(shape=()) -> WrapHint:
    """Public hint: MSB is 0."""
    return WrapHint.public(np.zeros(shape, dtype=U64))


def _add_const(sess: Session, x, c: int, l: int) -> np.ndarray:
    return (x + _p0(sess) * U64(c % (1 << l))) & _m(l)


def _extend_pos(sess: Session, x, m: int, n: int) -> np.ndarray:
    """Sign-extend a value whose MSB is known to be 0."""
    if n == m:
        return x & _m(m)
    return bk.sxt(sess, x, m, n, _pos())


def _tr(sess: Session, x, l: int, s: int) -> np.ndarray:
    if s == 0:
        return x & _m(l)
    return bk.tr(sess, x, l, s)


def _smult_tr(sess, a, m, b, n, l, s, ha=bk.NO_HINT, hb=bk.NO_HINT):
    z = bk.smult(sess, a, m, b, n, l, ha, hb)
    return _tr(sess, z, l, s)


# -- exponential ---------------------------------------------------------


def sec_exp(sess: Session, x, p: MathParams) -> np.ndarray:
    """Shares of e^{-x/2^s} at (n, s_out); matches ``rexp_ref``."""
    if p.n < p.s_out + 2:
        raise ContractError("exp output width must be at least s_out + 2")
    x = np.asarray(x, dtype=U64) & _m(p.m)
    luts = ct.build_exp_luts(p.m, p.s, p.s_out, p.d)
    w = p.s_out + 2
    with sess.scope("exp"):
        digits = bk.digdec(sess, x, p.m, [p.d] * len(luts))
        vals = [gd.lut1(sess, lut.entries, w, dig, p.d) for lut, dig in zip(luts, digits)]
        while len(vals) > 1:
            half = len(vals) // 2
            left = np.stack(vals[0 : 2 * half : 2])
            right = np.stack(vals[1 : 2 * half : 2])
            prod = _smult_tr(sess, left, w, right, w, 2 * p.s_out + 2, p.s_out, _pos(), _pos())
            nxt = list(prod)
            if len(vals) % 2:
                nxt.append(vals[-1])
            vals = nxt
        y = _extend_pos(sess, vals[0], w, p.n)
    return y


# -- reciprocal ----------------------------------------------------------


def sec_recip(sess: Session, v, l: int, s: int, g: int, t: int) -> np.ndarray:
    """Shares of 1/v for v/2^s in [1, 2]; matches ``recip_ref``."""
    if not 0 < g < s:
        raise ContractError(f"need 0 < g < s, got g={g}, s={s}")
    if l < s + 2:
        raise ContractError(f"recip input width {l} must be at least s + 2")
    v = np.asarray(v, dtype=U64) & _m(l)
    lut0, lut1 = ct.build_recip_luts(g)
    with sess.scope("recip"):
        f, idx = bk.digdec(sess, v & _m(s + 1), s + 1, [s - g, g + 1])
        c0, c1 = gd.lut(sess, [gd.Field(lut0.entries, g + 4), gd.Field(lut1.entries, 2 * g + 3)], [(idx, g + 1, "a")])
        c0, c1 = c0.reshape(v.shape), c1.reshape(v.shape)
        # c0 < 2^{g+3} and the product c0 f < 2^{s+3}: both MSBs are 0
        c2 = bk.umult(sess, c0, g + 4, f, s - g, s + 4, hx=_pos())
        c2 = _extend_pos(sess, c2, s + 4, s + g + 4)
        w_pre = ((c1 << U64(s - g + 1)) - c2) & _m(s + g + 4)
        w = bk.tr(sess, w_pre, s + g + 4, g + 3)
        if t == 0:
            return _extend_pos(sess, w, s + 1, l)
        prod = bk.umult(sess, v, l, w, s + 1, 2 * s + 2, hx=_pos(), hy=_pos())
        p = (_p0(sess) * U64(1 << s) - bk.tr(sess, prod, 2 * s + 2, s)) & _m(s + 2)
        q = _add_const(sess, p, 1 << s, s + 2)
        a = _smult_tr(sess, w, s + 1, q, s + 2, 2 * s + 2, s, _pos(), _pos())
        for _ in range(2, t + 1):
            p = _smult_tr(sess, p, s + 2, p, s + 2, 2 * s + 2, s)
            q = _add_const(sess, p, 1 << s, s + 2)
            a = _smult_tr(sess, a, s + 2, q, s + 2, 2 * s + 2, s, _pos(), _pos())
        return _extend_pos(sess, a, s + 2, l)


# -- sigmoid and tanh ----------------------------------------------------


def sec_h(sess: Session, x, p: MathParams, extend: bool = True) -> np.ndarray:
    """Shares of 1/(1 + e^{-x/2^s}) for unsigned x; matches ``h_ref``."""
    w = p.s_out + 2
    inner = MathParams(p.m, p.s, w, p.s_out, d=p.d)
    with sess.scope("h"):
        u = sec_exp(sess, x, inner)
        v = _add_const(sess, u, 1 << p.s_out, w)
        r = sec_recip(sess, v, w, p.s_out, p.g, p.t)
        if extend:
            r = _extend_pos(sess, r, w, p.n)
    return r


def _sigmoid(sess: Session, x, p: MathParams) -> np.ndarray:
    w = p.s_out + 2
    x = np.asarray(x, dtype=U64) & _m(p.m)
    mx = bk.msb(sess, x, p.m)
    a = (x - U64(2) * gd.mux(sess, mx, x, p.m)) & _m(p.m)
    u = sec_h(sess, a, p, extend=False)
    diff = (_p0(sess) * U64(1 << p.s_out) - U64(2) * u) & _m(w)
    y = (u + gd.mux(sess, mx, diff, w)) & _m(w)
    return _extend_pos(sess, y, w, p.n)


def sec_sigmoid(sess: Session, x, p: MathParams) -> np.ndarray:
    """Shares of sigmoid(int(x)/2^s); matches ``sigmoid_ref``."""
    with sess.scope("sigmoid"):
        return _sigmoid(sess, x, p)


def sec_tanh(sess: Session, x, p: MathParams) -> np.ndarray:
    """Shares of tanh(int(x)/2^s); matches ``tanh_ref``."""
    if p.s < 1:
        raise ContractError("tanh needs input scale >= 1")
    half = MathParams(p.m, p.s - 1, p.n, p.s_out, d=p.d, g=p.g, t=p.t)
    with sess.scope("tanh"):
        u = _sigmoid(sess, x, half)
        return (U64(2) * u - _p0(sess) * U64(1 << p.s_out)) & _m(p.n)


# -- reciprocal square root ----------------------------------------------


def sec_rsqrt(sess: Session, x, l: int, s: int, s_out: int, g: int, t: int) -> np.ndarray:
    """Shares of 1/sqrt(x/2^s) for x > 0; matches ``rsqrt_ref``."""
    if not (s_out >= g + 2 and l - 2 - s_out >= 0):
        raise ContractError("rsqrt needs g + 2 <= s_out <= l - 2")
    x = np.asarray(x, dtype=U64) & _m(l)
    shape = x.shape
    sw = s_out + 2
    wd = ct.rsqrt_widths(l, s, s_out)
    ks = np.arange(l)
    A, B, C = ct.rsqrt_consts(l, s, ks)
    with sess.scope("rsqrt"):
        z = bk.msnzb(sess, x, l)  # (..., l) boolean one-hot
        za = gd.b2a(sess, z, l)
        a_sh = (za * A).sum(axis=-1, dtype=U64) & _m(l)
        c_sh = (za * C).sum(axis=-1, dtype=U64) & _m(wd["cw"])
        b_sh = np.bitwise_xor.reduce(z * B, axis=-1)
        # MSB(A) is z_0 and MSB(x) is z_{l-1}
        xn = bk.umult(sess, x, l, a_sh, l, l, hx=WrapHint.shared(z[..., l - 1]), hy=WrapHint.shared(z[..., 0]))
        e = bk.tr(sess, xn & _m(l - 1), l - 1, l - 1 - g)
        (w,) = gd.lut(sess, [gd.Field(ct.build_rsqrt_lut(g).entries, g + 4)], [(b_sh, 1, "b"), (e, g, "a")])
        w = w.reshape(shape)
        # x2 = xn >> (l-2-s_out) has its top bit set; x2 >> 1 is obtained
        # directly from xn and extended with that bit known
        x2 = _tr(sess, xn, l, l - 2 - s_out)
        x2h = bk.tr(sess, xn, l, l - 1 - s_out)
        x2h = bk.zxt(sess, x2h, s_out + 1, sw, WrapHint.public(np.ones(shape, dtype=U64)))
        q = (x2h + gd.mux(sess, b_sh, (x2 - x2h) & _m(sw), sw)) & _m(sw)
        a = (w << U64(s_out - g - 2)) & _m(sw)
        p = a
        q_hint = WrapHint.shared(b_sh)
        p_hint = _pos()
        for _ in range(t):
            y = _smult_tr(sess, p, sw, p, sw, 2 * s_out + 2, s_out, p_hint, p_hint)
            qy = bk.umult(sess, q, sw, y, sw, 2 * s_out + 2, hx=q_hint, hy=_pos())
            q = bk.tr(sess, qy, 2 * s_out + 2, s_out)
            p = (_p0(sess) * U64(3 << (s_out - 1)) - bk.ars(sess, q, sw, 1, _pos())) & _m(sw)
            a = _smult_tr(sess, a, sw, p, sw, 2 * s_out + 2, s_out, _pos())
            q_hint, p_hint = _pos(), bk.NO_HINT
        zr = _smult_tr(sess, a, sw, c_sh, wd["cw"], wd["final"], wd["final_tr"], _pos(), _pos())
        zw = wd["final"] - wd["final_tr"]
        if zw >= l:
            return zr & _m(l)
        return bk.zxt(sess, zr, zw, l, _pos())
