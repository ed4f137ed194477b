"""Verification suites behind the CLI and the acceptance tests.

* ``verify_ulp``: exhaustive ULP sweeps of the cleartext functions.
* ``equiv_blocks`` / ``equiv_math``: secure protocols against cleartext
  oracles on paired in-process sessions.
* ``audit``: measured communication against the closed-form cost model and
  the published per-block expressions.
* ``bench``: batched runs over inproc or TCP transports.
"""

from __future__ import annotations

import hashlib
import itertools
import math
import time
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import blocks as bk
from . import cleartext as ct
from . import gadgets as gd
from . import ring, secmath, ulp
from .costs import NONE, PUBLIC, SHARED, CostModel, kb, paper_bound
from .report import Report
from .transport import DEFAULT_LAMBDA, Session, TcpChannel, inproc_pair, open_session, run_pair

U64 = np.uint64

FUNCS = ("exp", "sigmoid", "tanh", "rsqrt")
ULP_BOUNDS = {"exp": 3, "sigmoid": 3, "tanh": 4, "rsqrt": 4}
# parameter pair checked exhaustively by the secure equivalence suite
EXHAUSTIVE_PAIR = {"exp": (12, 14), "sigmoid": (8, 14), "tanh": (8, 14), "rsqrt": (12, 11)}
KB_BUDGET = {"exp": 2.7, "sigmoid": 6.0, "rsqrt": 7.5}
RATIO_LIMIT = 1.25
AUDIT_WIDTHS = ((16, 8), (32, 12), (64, 16))
CHUNK = 16384


def grid(fn: str) -> List[Tuple[int, int]]:
    lo, hi = (4, 13) if fn == "rsqrt" else (8, 14)
    return [(s, so) for s in range(lo, hi + 1) for so in range(lo, hi + 1)]


def params(fn: str, s: int, s_out: int, m: int = 16) -> ct.MathParams:
    if fn == "exp":
        return ct.MathParams.exp(s, s_out, m, m)
    if fn == "sigmoid":
        return ct.MathParams.sigmoid(s, s_out, m, m)
    if fn == "tanh":
        return ct.MathParams.tanh(s, s_out, m, m)
    if fn == "rsqrt":
        return ct.MathParams.rsqrt(s, s_out, m)
    raise ValueError(f"unknown function {fn!r}")


def reference(fn: str, xs, s: int, s_out: int, m: int = 16) -> np.ndarray:
    return ulp.reference_outputs(fn, s, s_out, xs, m, m)


def secure(fn: str, s: int, s_out: int, m: int = 16) -> Callable:
    """fn(session, shares) running the secure protocol at these parameters."""
    p = params(fn, s, s_out, m)
    if fn == "exp":
        return lambda sess, x: secmath.sec_exp(sess, x, p)
    if fn == "sigmoid":
        return lambda sess, x: secmath.sec_sigmoid(sess, x, p)
    if fn == "tanh":
        return lambda sess, x: secmath.sec_tanh(sess, x, p)
    return lambda sess, x: secmath.sec_rsqrt(sess, x, m, s, s_out, p.g, p.t)


def seeded_rng(tag: str, seed) -> np.random.Generator:
    digest = hashlib.sha256(f"{tag}:{seed}".encode()).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))


# -- ULP sweeps ----------------------------------------------------------


def verify_ulp(fns: Iterable[str] = FUNCS, pairs: Optional[Sequence[Tuple[int, int]]] = None) -> Report:
    rep = Report(meta={"suite": "verify", "bitwidth": 16})
    for fn in fns:
        for s, so in pairs or grid(fn):
            t0 = time.perf_counter()
            err, at = ulp.max_ulp(fn, s, so)
            rep.add(
                "ulp",
                fn,
                err <= ULP_BOUNDS[fn],
                "mpfr oracle, exhaustive",
                params={"s": s, "s_out": so},
                max_ulp=err,
                bound=ULP_BOUNDS[fn],
                worst_input=at,
                seconds=time.perf_counter() - t0,
            )
    return rep


# -- two-party helpers ---------------------------------------------------


class Pair:
    """Two in-process sessions plus helpers to run and reveal."""

    def __init__(self, seed=0, lam: int = DEFAULT_LAMBDA) -> None:
        self.sessions = inproc_pair(seed=seed, lam=lam)
        self.rng = seeded_rng("pair", seed)

    def run(self, fn: Callable, args0=(), args1=()):
        return run_pair(fn, self.sessions, args0, args1)

    def arith(self, fn, args0, args1, l: int) -> np.ndarray:
        o0, o1 = self.run(fn, args0, args1)
        return (np.asarray(o0, dtype=U64) + np.asarray(o1, dtype=U64)) & ring.mask(l)

    def boolean(self, fn, args0, args1) -> np.ndarray:
        o0, o1 = self.run(fn, args0, args1)
        return np.asarray(o0, dtype=U64) ^ np.asarray(o1, dtype=U64)

    def measure(self, fn, args0=(), args1=()) -> Tuple[int, int, tuple]:
        """(total payload bits, rounds, outputs) of one call."""
        s0, s1 = self.sessions
        b = s0.meter.bits_sent + s1.meter.bits_sent
        c = s0.clock
        out = self.run(fn, args0, args1)
        return s0.meter.bits_sent + s1.meter.bits_sent - b, s0.clock - c, out

    def close(self) -> None:
        for s in self.sessions:
            s.close()


def all_splits(l: int):
    """Every (secret, share_0, share_1) triple over 2^l."""
    n = 1 << l
    x = np.repeat(np.arange(n, dtype=U64), n)
    x0 = np.tile(np.arange(n, dtype=U64), n)
    return x, x0, (x - x0) & ring.mask(l)


def compositions(l: int):
    """All ordered ways of writing l as a sum of positive parts."""
    for cuts in range(1 << (l - 1)):
        parts, last = [], 0
        for i in range(1, l):
            if cuts >> (i - 1) & 1:
                parts.append(i - last)
                last = i
        parts.append(l - last)
        yield parts


def lemma_violations(l: int) -> int:
    """Violations of the wrap decomposition over all splits at width l."""
    bad = 0
    _, x0, x1 = all_splits(l)
    for s in range(1, l):
        m = ring.mask(s)
        u0, v0, u1, v1 = x0 >> U64(s), x0 & m, x1 >> U64(s), x1 & m
        c = ring.wrap(v0, v1, s)
        d = ring.wrap(u0, u1, l - s)
        e = (((u0 + u1) & ring.mask(l - s)) == ring.mask(l - s)).astype(U64)
        bad += int(np.count_nonzero(ring.wrap(x0, x1, l) != (d ^ (c & e))))
    return bad


# -- block equivalence ---------------------------------------------------


def _hint(kind: str, bit, rng) -> Tuple[bk.WrapHint, bk.WrapHint]:
    if kind == NONE:
        return bk.NO_HINT, bk.NO_HINT
    if kind == PUBLIC:
        h = bk.WrapHint.public(bit)
        return h, h
    r = rng.integers(0, 2, size=np.shape(bit), dtype=U64)
    return bk.WrapHint.shared(r), bk.WrapHint.shared(r ^ bit)


def equiv_blocks(max_bits: int = 8, seed=0, mult_bits: int = 6) -> Report:
    """Brute-force every block against the ring oracles at small widths."""
    rep = Report(meta={"suite": "equiv-blocks", "max_bits": max_bits, "seed": seed})
    pr = Pair(seed)
    rng = pr.rng

    def row(name, prm, got, want):
        bad = int(np.count_nonzero(np.asarray(got) != np.asarray(want)))
        rep.add("blocks", name, bad == 0, "ring oracle, all splits", params=prm, cases=int(np.size(want)), mismatches=bad)

    try:
        for l in range(1, max_bits + 1):
            x, x0, x1 = all_splits(l)
            mx = ring.msb(x, l)
            want = ring.wrap(x0, x1, l)
            for kind in (PUBLIC, SHARED):
                h0, h1 = _hint(kind, mx, rng)
                got = pr.boolean(lambda s, a, h: bk.msb_to_wrap(s, a, l, h), (x0, h0), (x1, h1))
                row("MSB2Wrap", {"l": l, "hint": kind}, got, want)
            for n in sorted({l + 1, l + 3}):
                for kind in (NONE, PUBLIC, SHARED):
                    h0, h1 = _hint(kind, mx, rng)
                    got = pr.arith(lambda s, a, h: bk.zxt(s, a, l, n, h), (x0, h0), (x1, h1), n)
                    row("ZXt", {"m": l, "n": n, "hint": kind}, got, x)
                    got = pr.arith(lambda s, a, h: bk.sxt(s, a, l, n, h), (x0, h0), (x1, h1), n)
                    row("SXt", {"m": l, "n": n, "hint": kind}, got, ring.sign_extend(x, l, n))
            for s in range(1, l):
                for kind in (NONE, PUBLIC, SHARED):
                    h0, h1 = _hint(kind, mx, rng)
                    got = pr.arith(lambda se, a, h: bk.lrs(se, a, l, s, h), (x0, h0), (x1, h1), l)
                    row("LRS", {"l": l, "s": s, "hint": kind}, got, ring.logical_shift_right(x, l, s))
                    got = pr.arith(lambda se, a, h: bk.ars(se, a, l, s, h), (x0, h0), (x1, h1), l)
                    row("ARS", {"l": l, "s": s, "hint": kind}, got, ring.arith_shift_right(x, l, s))
                got = pr.arith(lambda se, a: bk.tr(se, a, l, s), (x0,), (x1,), l - s)
                row("TR", {"l": l, "s": s}, got, ring.truncate_reduce(x, l, s))
                got = pr.arith(lambda se, a: bk.div_pow2(se, a, l, s), (x0,), (x1,), l)
                row("DivPow2", {"l": l, "s": s}, got, ring.c_div_pow2(x, l, s))
            if l >= 2:
                for digs in compositions(l):
                    outs = pr.run(lambda se, a: bk.digdec(se, a, l, digs), (x0,), (x1,))
                    off, bad = 0, 0
                    for i, d in enumerate(digs):
                        got = (outs[0][i] + outs[1][i]) & ring.mask(d)
                        bad += int(np.count_nonzero(got != ((x >> U64(off)) & ring.mask(d))))
                        off += d
                    rep.add("blocks", "DigDec", bad == 0, "ring oracle, all splits", params={"l": l, "digits": "+".join(map(str, digs))}, cases=int(x.size), mismatches=bad)
            if l & (l - 1) == 0 and l >= 2:
                for d in (dd for dd in (1, 2, 4, 8) if dd <= l and l % dd == 0):
                    got = pr.boolean(lambda se, a: bk.msnzb(se, a, l, d), (x0,), (x1,))
                    want_k = ring.msnzb(x, l).astype(np.int64)
                    onehot = np.eye(l, dtype=U64)[want_k]
                    bad = int(np.count_nonzero((got != onehot).any(axis=-1)))
                    rep.add("blocks", "MSNZB", bad == 0, "ring oracle, all splits", params={"l": l, "d": d}, cases=int(x.size), mismatches=bad)
        _equiv_mult(pr, rep, mult_bits)
        _equiv_bitmat(pr, rep, rng, mult_bits)
        _equiv_matmul(pr, rep, rng)
    finally:
        pr.close()
    return rep


def _mult_splits(m: int, n: int):
    """All (x, y, x0, x1, y0, y1) over 2^m x 2^n."""
    x, x0, x1 = all_splits(m)
    y, y0, y1 = all_splits(n)
    i = np.repeat(np.arange(x.size), y.size)
    j = np.tile(np.arange(y.size), x.size)
    return x[i], y[j], x0[i], x1[i], y0[j], y1[j]


def _equiv_mult(pr: Pair, rep: Report, total: int) -> None:
    shapes = [(m, n) for m in range(1, total) for n in range(1, total) if m + n <= total]
    for m, n in shapes:
        # cross terms: each party's private value, every pair
        xv = np.repeat(np.arange(1 << m, dtype=U64), 1 << n)
        yv = np.tile(np.arange(1 << n, dtype=U64), 1 << m)
        for l in range(max(m, n), m + n + 1):
            for short in (0, 1):
                got = pr.arith(lambda se, a: bk.cross_mult(se, a, m, n, l, short), (xv,), (yv,), l)
                rep.add("blocks", "CrossMult", bool((got == (xv * yv) & ring.mask(l)).all()), "integer oracle, all pairs", params={"m": m, "n": n, "l": l, "short": short}, cases=int(xv.size), mismatches=int(np.count_nonzero(got != (xv * yv) & ring.mask(l))))
        if m + n > total or m + n < 2:
            continue
        x, y, x0, x1, y0, y1 = _mult_splits(m, n)
        hx_bit, hy_bit = ring.msb(x, m), ring.msb(y, n)
        for l in range(max(m, n), m + n + 1):
            for kind in (NONE, PUBLIC, SHARED):
                hx0, hx1 = _hint(kind, hx_bit, pr.rng)
                hy0, hy1 = _hint(kind, hy_bit, pr.rng)
                a0, a1 = (x0, y0, hx0, hy0), (x1, y1, hx1, hy1)
                got = pr.arith(lambda se, a, b, p, q: bk.umult(se, a, m, b, n, l, p, q), a0, a1, l)
                want = ring.umul(x, m, y, n, l)
                rep.add("blocks", "UMult", bool((got == want).all()), "ring oracle, all splits", params={"m": m, "n": n, "l": l, "hint": kind}, cases=int(x.size), mismatches=int(np.count_nonzero(got != want)))
                got = pr.arith(lambda se, a, b, p, q: bk.smult(se, a, m, b, n, l, p, q), a0, a1, l)
                want = ring.smul(x, m, y, n, l)
                rep.add("blocks", "SMult", bool((got == want).all()), "ring oracle, all splits", params={"m": m, "n": n, "l": l, "hint": kind}, cases=int(x.size), mismatches=int(np.count_nonzero(got != want)))
            for s in range(1, l):
                got = pr.arith(lambda se, a, b: bk.smult_tr(se, a, m, b, n, l, s), (x0, y0), (x1, y1), l - s)
                want = ring.truncate_reduce(ring.smul(x, m, y, n, l), l, s)
                rep.add("blocks", "MultTR", bool((got == want).all()), "ring oracle, all splits", params={"m": m, "n": n, "l": l, "s": s}, cases=int(x.size), mismatches=int(np.count_nonzero(got != want)))


def _equiv_bitmat(pr: Pair, rep: Report, rng, l: int) -> None:
    # exhaustive 1x1x1 at a small width: every bit split against every value split
    lx = min(l, 3)
    x, x0, x1 = all_splits(lx)
    bad = cases = 0
    for w, w0 in itertools.product((0, 1), repeat=2):
        for i in range(x.size):
            a0, a1 = np.array([[w0]], dtype=U64), np.array([[w0 ^ w]], dtype=U64)
            got = pr.arith(lambda se, a, b: bk.bitmat_mul(se, a, b, lx), (a0, x0[i : i + 1].reshape(1, 1)), (a1, x1[i : i + 1].reshape(1, 1)), lx)
            bad += int(got[0, 0] != (w * int(x[i])) % (1 << lx))
            cases += 1
    rep.add("blocks", "BitMatMul", bad == 0, "ring oracle, all splits", params={"shape": "1x1x1", "l": lx}, cases=cases, mismatches=bad)
    for d1, d2, d3 in ((2, 3, 4), (3, 4, 2), (4, 4, 4)):
        W = rng.integers(0, 2, (d1, d2), dtype=U64)
        X = rng.integers(0, 1 << l, (d2, d3), dtype=U64)
        W0 = rng.integers(0, 2, (d1, d2), dtype=U64)
        X0, X1 = gd.split(rng, X, l)
        got = pr.arith(lambda se, a, b: bk.bitmat_mul(se, a, b, l), (W0, X0), (W0 ^ W, X1), l)
        want = (W @ X) & ring.mask(l)
        rep.add("blocks", "BitMatMul", bool((got == want).all()), "integer oracle, random", params={"shape": f"{d1}x{d2}x{d3}", "l": l}, cases=int(want.size), mismatches=int(np.count_nonzero(got != want)))


def _equiv_matmul(pr: Pair, rep: Report, rng, trials: int = 5) -> None:
    for (d1, d2, d3), m, n in (((3, 4, 2), 8, 8), ((4, 4, 4), 8, 8), ((2, 3, 5), 5, 9), ((2, 3, 5), 9, 5)):
        bad = 0
        e = math.ceil(math.log2(d2)) if d2 > 1 else 0
        l = m + n + e
        for _ in range(trials):
            X = rng.integers(0, 1 << m, (d1, d2), dtype=U64)
            Y = rng.integers(0, 1 << n, (d2, d3), dtype=U64)
            X0, X1 = gd.split(rng, X, m)
            Y0, Y1 = gd.split(rng, Y, n)
            got = pr.arith(lambda se, a, b: bk.matmul(se, a, m, b, n, (d1, d2, d3)), (X0, Y0), (X1, Y1), l)
            want = (X.astype(object) @ Y.astype(object)) % (1 << l)
            bad += int(np.count_nonzero(got != want.astype(U64)))
        rep.add("blocks", "MatMul", bad == 0, "integer oracle, random", params={"shape": f"{d1}x{d2}x{d3}", "m": m, "n": n}, cases=trials * d1 * d3, mismatches=bad)


# -- math equivalence ----------------------------------------------------


def math_inputs(fn: str, s: int, count: Optional[int], rng, m: int = 16) -> np.ndarray:
    """The whole test domain when ``count`` is None, else a random sample."""
    dom = ulp.domain(fn, s, m) if m == 16 else None
    if count is None:
        if dom is None:
            raise ValueError("exhaustive runs are limited to 16-bit inputs")
        return dom
    if dom is not None:
        return rng.choice(dom, size=count)
    lo = 1 if fn == "rsqrt" else 0
    return rng.integers(lo, 1 << m, size=count, dtype=U64)


def run_math(pr: Pair, fn: str, s: int, so: int, xs, m: int = 16) -> np.ndarray:
    f = secure(fn, s, so, m)
    outs = []
    for i in range(0, len(xs), CHUNK):
        x = xs[i : i + CHUNK]
        x0, x1 = gd.split(pr.rng, x, m)
        outs.append(pr.arith(f, (x0,), (x1,), m))
    return np.concatenate(outs)


def equiv_math(fns: Iterable[str] = FUNCS, pairs=None, count: Optional[int] = 1000, seed=0, m: int = 16) -> Report:
    """Secure vs cleartext; ``count=None`` means the whole 16-bit domain."""
    rep = Report(meta={"suite": "equiv-math", "seed": seed, "bitwidth": m})
    pr = Pair(seed)
    try:
        for fn in fns:
            for s, so in pairs or grid(fn):
                xs = math_inputs(fn, s, count, pr.rng, m)
                t0 = time.perf_counter()
                got = run_math(pr, fn, s, so, xs, m)
                want = reference(fn, xs, s, so, m)
                bad = int(np.count_nonzero(got != want))
                rep.add(
                    "math",
                    fn,
                    bad == 0,
                    "cleartext reference" + (", exhaustive" if count is None else ", random"),
                    params={"s": s, "s_out": so},
                    cases=int(xs.size),
                    mismatches=bad,
                    seconds=time.perf_counter() - t0,
                )
    finally:
        pr.close()
    return rep


# -- communication audit -------------------------------------------------


def _rand(rng, l, shape=(1,)):
    return rng.integers(0, 1 << 63, size=shape, dtype=U64) & ring.mask(l)


def _zeros(shape=(1,)):
    return np.zeros(shape, dtype=U64)


def _gadget_cases(lam: int):
    """(name, params, fn(sess, share), share width, exact formula)."""
    def ot_case(k, n):
        def f(se, x):
            if se.party == 0:
                return gd.ot(se, 0, k, n, msgs=np.zeros((1, k), dtype=U64))
            return gd.ot(se, 0, k, n, idx=np.zeros(1, dtype=U64))

        return (f"OT", {"k": k, "n": n}, f, 8, paper_bound("OT", lam, k=k, n=n))

    def cot_case(n):
        def f(se, x):
            if se.party == 0:
                return gd.cot(se, 0, n, corr=x)
            return gd.cot(se, 0, n, choice=x & U64(1))

        return ("COT", {"n": n}, f, n, paper_bound("COT", lam, n=n))

    cases = [ot_case(2, 8), ot_case(4, 1), ot_case(16, 3), cot_case(32)]
    for l in (8, 32):
        cases.append(("B2A", {"l": l}, lambda se, x, l=l: gd.b2a(se, x & U64(1), l), l, paper_bound("B2A", lam, l=l)))
        cases.append(("MUX", {"l": l}, lambda se, x, l=l: gd.mux(se, x & U64(1), x, l), l, paper_bound("MUX", lam, l=l)))
    tab = np.arange(256, dtype=U64)
    cases.append(("LUT", {"m": 8, "n": 16}, lambda se, x: gd.lut1(se, tab, 16, x, 8), 8, paper_bound("LUT", lam, m=8, n=16)))
    return cases


def _block_cases(l: int, s: int, cm: CostModel):
    """(name, params, fn, share width, derived bits, paper name, paper kwargs)."""
    m = l - s
    pub = lambda: bk.WrapHint.public(_zeros())
    shr = lambda: bk.WrapHint.shared(_zeros())
    a, b = s, l - s
    mu = min(a, b)
    out = [
        ("Wrap", {"l": l}, lambda se, x: gd.wrap(se, x, l), l, cm.wrap(l), "Mill", {"l": l}),
        ("WrapEq", {"l": l}, lambda se, x: gd.wrap_eq(se, x, l), l, cm.wrap_eq(l), "Mill", {"l": l}),
        ("ZXt", {"m": m, "n": l}, lambda se, x: bk.zxt(se, x, m, l), m, cm.zxt(m, l), "ZXt", {"m": m, "n": l}),
        ("SXt", {"m": m, "n": l}, lambda se, x: bk.sxt(se, x, m, l), m, cm.sxt(m, l), "SXt", {"m": m, "n": l}),
        ("*ZXt", {"m": m, "n": l}, lambda se, x: bk.zxt(se, x, m, l, pub()), m, cm.zxt(m, l, PUBLIC), "*ZXt", {"m": m, "n": l}),
        ("*SXt", {"m": m, "n": l}, lambda se, x: bk.sxt(se, x, m, l, pub()), m, cm.sxt(m, l, PUBLIC), "*SXt", {"m": m, "n": l}),
        ("SXt shared-MSB", {"m": m, "n": l}, lambda se, x: bk.sxt(se, x, m, l, shr()), m, cm.sxt(m, l, SHARED), "*SXt+", {"m": m, "n": l, "inputs": 1}),
        ("LRS", {"l": l, "s": s}, lambda se, x: bk.lrs(se, x, l, s), l, cm.lrs(l, s), "LRS", {"l": l, "s": s}),
        ("ARS", {"l": l, "s": s}, lambda se, x: bk.ars(se, x, l, s), l, cm.ars(l, s), "ARS", {"l": l, "s": s}),
        ("*LRS", {"l": l, "s": s}, lambda se, x: bk.lrs(se, x, l, s, pub()), l, cm.lrs(l, s, PUBLIC), "*LRS", {"l": l, "s": s}),
        ("*ARS", {"l": l, "s": s}, lambda se, x: bk.ars(se, x, l, s, pub()), l, cm.ars(l, s, PUBLIC), "*ARS", {"l": l, "s": s}),
        ("ARS shared-MSB", {"l": l, "s": s}, lambda se, x: bk.ars(se, x, l, s, shr()), l, cm.ars(l, s, SHARED), "*ARS+", {"l": l, "s": s, "inputs": 1}),
        ("TR", {"l": l, "s": s}, lambda se, x: bk.tr(se, x, l, s), l, cm.tr(l, s), "TR", {"l": l, "s": s}),
        ("DivPow2", {"l": l, "s": s}, lambda se, x: bk.div_pow2(se, x, l, s), l, cm.div_pow2(l, s), "DivPow2", {"l": l, "s": s}),
        ("UMult", {"m": a, "n": b, "l": l}, lambda se, x: bk.umult(se, x & ring.mask(a), a, x >> U64(a), b, l), l, cm.umult(a, b, l), "UMult", {"m": a, "n": b}),
        ("SMult", {"m": a, "n": b, "l": l}, lambda se, x: bk.smult(se, x & ring.mask(a), a, x >> U64(a), b, l), l, cm.smult(a, b, l), "SMult", {"m": a, "n": b}),
        ("*UMult", {"m": a, "n": b, "l": l}, lambda se, x: bk.umult(se, x & ring.mask(a), a, x >> U64(a), b, l, pub(), pub()), l, cm.umult(a, b, l, PUBLIC, PUBLIC), "*UMult", {"m": a, "n": b}),
        ("*SMult", {"m": a, "n": b, "l": l}, lambda se, x: bk.smult(se, x & ring.mask(a), a, x >> U64(a), b, l, pub(), pub()), l, cm.smult(a, b, l, PUBLIC, PUBLIC), "*SMult", {"m": a, "n": b}),
        ("SMult shared-MSB", {"m": a, "n": b, "l": l}, lambda se, x: bk.smult(se, x & ring.mask(a), a, x >> U64(a), b, l, shr(), shr()), l, cm.smult(a, b, l, SHARED, SHARED), "*SMult+", {"m": a, "n": b, "inputs": 2}),
        ("DigDec", {"l": l, "d": 8}, lambda se, x: bk.digdec(se, x, l, [8] * (l // 8)), l, cm.digdec([8] * (l // 8)), "DigDec", {"l": l, "d": 8}),
        ("MSNZB", {"l": l, "d": 8}, lambda se, x: bk.msnzb(se, x, l, 8), l, cm.msnzb(l, 8), "MSNZB", {"l": l, "d": 8}),
    ]
    return out


def _paper(name: str, lam: int, kw: dict) -> float:
    if name.endswith("+"):
        # MSBs known in shared form cost lambda + 2 per input over the public variant
        kw = dict(kw)
        extra = kw.pop("inputs") * (lam + 2)
        return paper_bound(name[:-1], lam, **kw) + extra
    return paper_bound(name, lam, **kw)


def _independence(pr: Pair, fn, width: int, trials: int) -> bool:
    """Same bits and rounds for ``trials`` independent random inputs."""
    seen = set()
    for _ in range(trials):
        x0, x1 = _rand(pr.rng, width), _rand(pr.rng, width)
        bits, rounds, _ = pr.measure(fn, (x0,), (x1,))
        seen.add((bits, rounds))
    return len(seen) == 1


def _math_independence(pr: Pair, fn_name: str, s: int, so: int, trials: int) -> bool:
    f = secure(fn_name, s, so)
    seen = set()
    xs = math_inputs(fn_name, s, trials, pr.rng)
    for x in xs:
        x0, x1 = gd.split(pr.rng, np.array([x], dtype=U64), 16)
        bits, rounds, _ = pr.measure(f, (x0,), (x1,))
        seen.add((bits, rounds))
    return len(seen) == 1


def audit(lam: int = DEFAULT_LAMBDA, seed=0, trials: int = 100, widths=AUDIT_WIDTHS, math_fns: Iterable[str] = FUNCS) -> Report:
    rep = Report(meta={"suite": "audit", "lambda": lam, "seed": seed, "independence_trials": trials})
    cm = CostModel(lam)
    pr = Pair(seed, lam)
    try:
        for name, prm, fn, w, exact in _gadget_cases(lam):
            bits, rounds, _ = pr.measure(fn, (_rand(pr.rng, w),), (_rand(pr.rng, w),))
            indep = _independence(pr, fn, w, trials)
            rep.add("gadget", name, bits == exact and indep, "published formula (exact)", params=prm, measured=bits, expected=exact, rounds=rounds, input_independent=indep)
        for l, s in widths:
            for name, prm, fn, w, derived, pname, pkw in _block_cases(l, s, cm):
                bits, rounds, _ = pr.measure(fn, (_rand(pr.rng, w),), (_rand(pr.rng, w),))
                bound = _paper(pname, lam, pkw)
                indep = _independence(pr, fn, w, trials)
                ratio = bits / bound
                rep.add(
                    "block",
                    name,
                    bits == derived and ratio <= RATIO_LIMIT and indep,
                    "derived formula (exact); published formula (ratio)",
                    params=prm,
                    measured=bits,
                    expected=derived,
                    bound=bound,
                    ratio=ratio,
                    rounds=rounds,
                    input_independent=indep,
                )
        for (d1, d2, d3) in ((3, 4, 2), (4, 4, 4)):
            X0, X1 = _rand(pr.rng, 8, (d1, d2)), _rand(pr.rng, 8, (d1, d2))
            Y0, Y1 = _rand(pr.rng, 8, (d2, d3)), _rand(pr.rng, 8, (d2, d3))
            f = lambda se, a, b, d=(d1, d2, d3): bk.matmul(se, a, 8, b, 8, d)
            bits, rounds, _ = pr.measure(f, (X0, Y0), (X1, Y1))
            derived = cm.matmul(8, 8, d1, d2, d3)
            rep.add("block", "MatMul", bits == derived, "derived formula (exact)", params={"shape": f"{d1}x{d2}x{d3}", "m": 8, "n": 8}, measured=bits, expected=derived, rounds=rounds)
        for fn in math_fns:
            _audit_math(pr, rep, cm, fn, trials)
    finally:
        pr.close()
    return rep


def _audit_math(pr: Pair, rep: Report, cm: CostModel, fn: str, trials: int) -> None:
    # the costliest parameter pair of the grid, found through the exact formula
    s, so = max(grid(fn), key=lambda p: cm.math(fn, *p))
    derived = cm.math(fn, s, so)
    xs = math_inputs(fn, s, 64, pr.rng)
    x0, x1 = gd.split(pr.rng, xs, 16)
    bits, rounds, _ = pr.measure(secure(fn, s, so), (x0,), (x1,))
    per = bits // len(xs) if bits % len(xs) == 0 else bits / len(xs)
    indep = _math_independence(pr, fn, s, so, trials)
    budget = KB_BUDGET.get(fn)
    ok = per == derived and indep and (budget is None or kb(per) <= budget)
    rep.add(
        "math",
        fn,
        ok,
        "derived formula (exact); KB budget",
        params={"s": s, "s_out": so, "worst_of_grid": True},
        measured=per,
        expected=derived,
        kb_per_instance=round(kb(per), 4),
        kb_budget=budget,
        rounds=rounds,
        input_independent=indep,
    )


# -- benchmark -----------------------------------------------------------


def bench_inputs(fn: str, s: int, instances: int, seed, m: int = 16):
    rng = seeded_rng("bench", seed)
    xs = math_inputs(fn, s, instances, rng, m)
    x0, x1 = gd.split(rng, xs, m)
    return xs, x0, x1


def _bench_body(sess: Session, fn: str, s: int, so: int, share, m: int):
    t0 = time.perf_counter()
    f = secure(fn, s, so, m)
    outs = [f(sess, share[i : i + CHUNK]) for i in range(0, len(share), CHUNK)]
    y = np.concatenate(outs)
    dt = time.perf_counter() - t0
    full = gd.reveal(sess, y, m)
    return full, dt


def bench(fn: str, s: int, so: int, instances: int, seed=0, lam: int = DEFAULT_LAMBDA, m: int = 16) -> Report:
    """Both parties in this process over the in-memory transport."""
    rep = Report(meta={"suite": "bench", "transport": "inproc", "lambda": lam, "seed": seed})
    xs, x0, x1 = bench_inputs(fn, s, instances, seed, m)
    pr = Pair(seed, lam)
    try:
        (y, dt), _ = pr.run(lambda se, a: _bench_body(se, fn, s, so, a, m), (x0,), (x1,))
        bits = sum(se.meter.bits_sent for se in pr.sessions)
        rounds = pr.sessions[0].meter.rounds
    finally:
        pr.close()
    _bench_row(rep, fn, s, so, instances, xs, y, bits, rounds, dt, m)
    return rep


def bench_party(role: int, host: str, port: int, fn: str, s: int, so: int, instances: int, seed=0, lam: int = DEFAULT_LAMBDA, m: int = 16) -> Report:
    """One party of a TCP benchmark; run once per role."""
    rep = Report(meta={"suite": "bench", "transport": "tcp", "role": f"p{role}", "lambda": lam, "seed": seed})
    xs, x0, x1 = bench_inputs(fn, s, instances, seed, m)
    chan = TcpChannel.listen(host, port) if role == 0 else TcpChannel.connect(host, port)
    header = f"bench:{fn}:{s}:{so}:{instances}:{m}:{seed}".encode()
    sess = open_session(role, chan, seed=f"{seed}:{role}".encode(), lam=lam, params=header)
    try:
        y, dt = _bench_body(sess, fn, s, so, x0 if role == 0 else x1, m)
        # bits this party sent plus bits it received: the whole conversation
        bits = sess.meter.bits_sent + sess.meter.bits_received
        rounds = sess.meter.rounds
    finally:
        sess.close()
    _bench_row(rep, fn, s, so, instances, xs, y, bits, rounds, dt, m)
    return rep


def _bench_row(rep, fn, s, so, instances, xs, y, bits, rounds, dt, m) -> None:
    want = reference(fn, xs, s, so, m)
    bad = int(np.count_nonzero(y != want))
    per = bits / instances
    budget = KB_BUDGET.get(fn)
    ok = bad == 0 and (budget is None or kb(per) <= budget)
    rep.add(
        "bench",
        fn,
        ok,
        "cleartext reference; KB budget",
        params={"s": s, "s_out": so, "instances": instances},
        measured=bits,
        kb_per_instance=round(kb(per), 4),
        kb_budget=budget,
        mismatches=bad,
        rounds=rounds,
        seconds=dt,
    )
