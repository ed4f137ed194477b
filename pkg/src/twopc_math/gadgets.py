"""Sub-protocols over a simulated, cost-faithful OT layer.

Shares are plain ``numpy.uint64`` arrays holding this party's local share;
ring widths travel as explicit arguments.  Boolean shares are arrays of 0/1.
Every gadget is batched: all array arguments share one leading shape and the
wire cost is the per-instance cost times the batch size.

The OT layer is a *simulation*: pads come from a PRG both parties hold, so it
offers no privacy.  What it does reproduce bit-for-bit is the traffic of an
OT-extension based implementation.  A 1-of-k OT with l-bit messages has the
receiver send 2*lambda bits (lambda for k = 2) and the sender k*l bits; a
correlated OT has the receiver send lambda bits and the sender l bits.
Swapping in a real OT backend only means replacing :class:`OtBatch`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import ring
from .ring import ContractError
from .transport import Session

U64 = np.uint64
ONE = U64(1)

LUT_MAX_ENTRIES = 1 << 20
LEAF_BITS = 4


class ResourceError(RuntimeError):
    """A request would need an unreasonable amount of memory or traffic."""


def _mask(l: int) -> np.uint64:
    return ring.mask(l)


def _arr(x) -> np.ndarray:
    return np.asarray(x, dtype=U64)


# -- OT layer ------------------------------------------------------------


@dataclass
class _Group:
    kind: str  # "ot" | "cot"
    sender: int
    count: int
    width: int
    k: int = 2  # ot: number of messages
    d: int = 1  # cot: correlation entries per choice bit
    data: Optional[np.ndarray] = None  # ot: (count, k) msgs | cot: (count, d) corr
    choice: Optional[np.ndarray] = None  # ot: (count,) index | cot: (count,) bits
    out: Optional[np.ndarray] = None


class OtBatch:
    """Runs many independent OT / COT groups in one two-round exchange.

    Both parties must add the same groups in the same order, each supplying
    its own side's inputs.  Receiver messages of all groups go out in the first
    flight, sender messages in the second.
    """

    def __init__(self, sess: Session) -> None:
        self.sess = sess
        self.groups: List[_Group] = []

    def ot(self, sender: int, k: int, width: int, msgs=None, idx=None, count: Optional[int] = None) -> _Group:
        if k < 2:
            raise ContractError("1-of-k OT needs k >= 2")
        me = self.sess.party
        if me == sender:
            msgs = _arr(msgs)
            count = msgs.shape[0]
            if msgs.shape != (count, k):
                raise ContractError(f"OT sender needs ({count}, {k}) messages, got {msgs.shape}")
            if np.any(msgs > _mask(width)):
                raise ContractError(f"OT message exceeds {width} bits")
        else:
            idx = _arr(idx).ravel()
            count = idx.shape[0]
            if np.any(idx >= U64(k)):
                raise ContractError(f"OT index out of range [0, {k})")
        g = _Group("ot", sender, count, width, k=k, data=msgs, choice=idx)
        self.groups.append(g)
        return g

    def cot(self, sender: int, width: int, corr=None, choice=None, d: int = 1) -> _Group:
        me = self.sess.party
        if me == sender:
            corr = _arr(corr).reshape(-1, d) & _mask(width)
            count = corr.shape[0]
        else:
            choice = _arr(choice).ravel()
            count = choice.shape[0]
            if np.any(choice > ONE):
                raise ContractError("COT choice must be a bit")
        g = _Group("cot", sender, count, width, d=d, data=corr, choice=choice)
        self.groups.append(g)
        return g

    def _recv_bits(self, g: _Group) -> int:
        if g.kind == "cot":
            return self.sess.lam
        return self.sess.lam if g.k == 2 else 2 * self.sess.lam

    def run(self) -> None:
        sess, me = self.sess, self.sess.party
        # both sides draw every group's pads so the shared PRG stays in step
        pads = []
        for g in self.groups:
            if g.kind == "ot":
                pads.append(sess.shared.words((g.count, g.k), g.width))
            else:
                a = sess.shared.words((g.count, g.d), g.width)
                b = sess.shared.words((g.count, g.d), g.width)
                pads.append((a, b))
        for g in self.groups:
            if g.sender != me:
                sess.send_filler(g.count, self._recv_bits(g))
        for g in self.groups:
            if g.sender == me:
                sess.recv_filler(g.count, self._recv_bits(g))
        m = None
        for g, pad in zip(self.groups, pads):
            if g.sender != me:
                continue
            if g.kind == "ot":
                sess.send(g.data ^ pad, g.width)
                g.out = None
            else:
                a, b = pad
                m = _mask(g.width)
                sess.send((g.data + b) & m, g.width)
                g.out = a.reshape(g.count, g.d) if g.d > 1 else a.reshape(g.count)
        for g, pad in zip(self.groups, pads):
            if g.sender == me:
                continue
            if g.kind == "ot":
                masked = sess.recv((g.count, g.k), g.width)
                rows = np.arange(g.count)
                j = g.choice.astype(np.int64)
                g.out = masked[rows, j] ^ pad[rows, j]
            else:
                a, b = pad
                m = _mask(g.width)
                y = sess.recv((g.count, g.d), g.width)
                val = (U64(0) - a + g.choice[:, None] * ((y - b) & m)) & m
                g.out = val if g.d > 1 else val.reshape(g.count)


def ot(sess: Session, sender: int, k: int, width: int, msgs=None, idx=None) -> Optional[np.ndarray]:
    """1-of-k OT; the receiver gets msgs[i, idx[i]], the sender gets None."""
    b = OtBatch(sess)
    g = b.ot(sender, k, width, msgs, idx)
    b.run()
    return g.out


def cot(sess: Session, sender: int, width: int, corr=None, choice=None, d: int = 1) -> np.ndarray:
    """Correlated OT: sender gets r, receiver gets -r + j*x (mod 2^width)."""
    b = OtBatch(sess)
    g = b.cot(sender, width, corr, choice, d)
    b.run()
    return g.out


# -- debug helpers -------------------------------------------------------


def reveal(sess: Session, x, l: int) -> np.ndarray:
    """Open an arithmetic share (test/debug aid; not metered)."""
    x = _arr(x) & _mask(l)
    other = sess.exchange(x, l, metered=False)
    return (x + other) & _mask(l)


def reveal_bits(sess: Session, x) -> np.ndarray:
    x = _arr(x)
    return x ^ sess.exchange(x, 1, metered=False)


def split(rng: np.random.Generator, x, l: int) -> Tuple[np.ndarray, np.ndarray]:
    """Random additive sharing of x (used by drivers and tests)."""
    x = _arr(x) & _mask(l)
    r = rng.integers(0, 1 << 63, size=x.shape, dtype=np.uint64) * U64(2) + rng.integers(0, 2, size=x.shape, dtype=np.uint64)
    r &= _mask(l)
    return r, (x - r) & _mask(l)


# -- AND via bit triples -------------------------------------------------


def _triples(batch: OtBatch, sess: Session, count: int, arity: int):
    """Register generation of ``count`` triples (a, b_1..b_arity, c_1..c_arity).

    One 1-of-2^{1+arity} OT with arity-bit payloads per triple: P1 indexes by
    its (a1, b1_*) shares, P0 supplies r xor (a AND b_i) for every index.
    Returns a finisher that yields (a, [b_i], [c_i]) once the batch has run.
    """
    prv = sess.private
    a = prv.bits((count,))
    bs = [prv.bits((count,)) for _ in range(arity)]
    k = 1 << (1 + arity)
    if sess.party == 0:
        rs = [prv.bits((count,)) for _ in range(arity)]
        j = np.arange(k, dtype=U64)
        ia = (j & ONE)[None, :]
        msgs = np.zeros((count, k), dtype=U64)
        for i in range(arity):
            ib = ((j >> U64(1 + i)) & ONE)[None, :]
            bit = rs[i][:, None] ^ ((a[:, None] ^ ia) & (bs[i][:, None] ^ ib))
            msgs |= bit << U64(i)
        g = batch.ot(0, k, arity, msgs=msgs)

        def finish():
            return a, bs, rs

    else:
        idx = a.copy()
        for i in range(arity):
            idx |= bs[i] << U64(1 + i)
        g = batch.ot(0, k, arity, idx=idx)

        def finish():
            return a, bs, [(g.out >> U64(i)) & ONE for i in range(arity)]

    return finish


class TriplePool:
    """Bit triples generated ahead of time inside an :class:`OtBatch`.

    ``n1`` single triples and ``n2`` two-output triples are registered on the
    batch; after ``batch.run()`` they are handed out in order by ``take``.
    """

    def __init__(self, batch: OtBatch, sess: Session, n1: int, n2: int) -> None:
        self._f1 = _triples(batch, sess, n1, 1) if n1 else None
        self._f2 = _triples(batch, sess, n2, 2) if n2 else None
        self._t1 = self._t2 = None
        self._p1 = self._p2 = 0

    def take(self, arity: int, n: int):
        if arity == 1:
            if self._t1 is None:
                a, (b,), (c,) = self._f1()
                self._t1 = (a, b, c)
            a, b, c = (v[self._p1 : self._p1 + n] for v in self._t1)
            self._p1 += n
            if len(a) != n:
                raise ContractError("triple pool exhausted")
            return a, b, c
        if self._t2 is None:
            a, (b1, b2), (c1, c2) = self._f2()
            self._t2 = (a, b1, b2, c1, c2)
        out = tuple(v[self._p2 : self._p2 + n] for v in self._t2)
        self._p2 += n
        if len(out[0]) != n:
            raise ContractError("triple pool exhausted")
        return out


def and_many(sess: Session, singles: Sequence[Tuple] = (), pairs: Sequence[Tuple] = (), pool: Optional[TriplePool] = None):
    """Batched ANDs sharing one opening round.

    ``singles`` is a list of (x, y) and ``pairs`` a list of (x, y1, y2); a pair
    computes x AND y1 and x AND y2 from one 2-output triple, opening x only
    once.  Triples come from ``pool`` or are generated on the spot.  Returns
    ([z for singles], [(z1, z2) for pairs]).
    """
    sx = [(_arr(x).ravel(), _arr(y).ravel()) for x, y in singles]
    px = [(_arr(x).ravel(), _arr(y1).ravel(), _arr(y2).ravel()) for x, y1, y2 in pairs]
    n1 = sum(len(x) for x, _ in sx)
    n2 = sum(len(x) for x, _, _ in px)
    if n1 + n2 == 0:
        return [], []
    with sess.scope("AND"):
        if pool is None:
            batch = OtBatch(sess)
            pool = TriplePool(batch, sess, n1, n2)
            batch.run()
        opened = []
        if n1:
            a1, b1, c1 = pool.take(1, n1)
            x1 = np.concatenate([x for x, _ in sx])
            y1 = np.concatenate([y for _, y in sx])
            opened += [x1 ^ a1, y1 ^ b1]
        if n2:
            a2, b21, b22, c21, c22 = pool.take(2, n2)
            x2 = np.concatenate([x for x, _, _ in px])
            y21 = np.concatenate([y for _, y, _ in px])
            y22 = np.concatenate([y for _, _, y in px])
            opened += [x2 ^ a2, y21 ^ b21, y22 ^ b22]
        mine = np.concatenate(opened)
        full = mine ^ sess.exchange(mine, 1)
        p0 = U64(1 if sess.party == 0 else 0)
        out1, out2 = [], []
        pos = 0
        if n1:
            d, e = full[:n1], full[n1 : 2 * n1]
            z = c1 ^ (d & b1) ^ (e & a1) ^ (p0 & d & e)
            pos = 2 * n1
            off = 0
            for x, _ in sx:
                out1.append(z[off : off + len(x)])
                off += len(x)
        if n2:
            d = full[pos : pos + n2]
            e1 = full[pos + n2 : pos + 2 * n2]
            e2 = full[pos + 2 * n2 : pos + 3 * n2]
            z1 = c21 ^ (d & b21) ^ (e1 & a2) ^ (p0 & d & e1)
            z2 = c22 ^ (d & b22) ^ (e2 & a2) ^ (p0 & d & e2)
            off = 0
            for x, _, _ in px:
                out2.append((z1[off : off + len(x)], z2[off : off + len(x)]))
                off += len(x)
    return out1, out2


def and_(sess: Session, x, y) -> np.ndarray:
    shape = _arr(x).shape
    (z,), _ = and_many(sess, singles=[(x, y)])
    return z.reshape(shape)


def and_pair(sess: Session, x, y1, y2) -> Tuple[np.ndarray, np.ndarray]:
    shape = _arr(x).shape
    _, ((z1, z2),) = and_many(sess, pairs=[(x, y1, y2)])
    return z1.reshape(shape), z2.reshape(shape)


# -- millionaires' / equality --------------------------------------------


class _Node:
    __slots__ = ("lo", "hi", "leaf", "lt", "eq", "need_lt", "need_eq")

    def __init__(self, leaf=None, lo=None, hi=None):
        self.leaf, self.lo, self.hi = leaf, lo, hi
        self.need_lt = self.need_eq = False
        self.lt = self.eq = None


def _build_tree(nleaves: int):
    levels = [[_Node(leaf=i) for i in range(nleaves)]]
    while len(levels[-1]) > 1:
        cur = levels[-1]
        nxt = [_Node(lo=cur[i], hi=cur[i + 1]) for i in range(0, len(cur) - 1, 2)]
        if len(cur) % 2:
            nxt.append(cur[-1])
        levels.append(nxt)
    return levels


def _propagate(node: _Node) -> None:
    if node.leaf is not None:
        return
    node.hi.need_lt |= node.need_lt
    node.hi.need_eq |= node.need_lt or node.need_eq
    node.lo.need_lt |= node.need_lt
    node.lo.need_eq |= node.need_eq
    _propagate(node.hi)
    _propagate(node.lo)


def mill_eq(sess: Session, v, l: int, need_lt: bool = True, need_eq: bool = False):
    """Shares of ([x < y], [x == y]) for P0's x and P1's y, both l-bit.

    Each party passes its own private value as ``v``.  Entries not requested
    come back as None.
    """
    v = _arr(v).ravel() & _mask(l)
    count = v.shape[0]
    nleaves = -(-l // LEAF_BITS)
    levels = _build_tree(nleaves)
    root = levels[-1][0]
    root.need_lt, root.need_eq = need_lt, need_eq
    _propagate(root)
    leaves = levels[0]
    inner = [n for lev in levels[1:] for n in lev if n.leaf is None]
    inner = list({id(n): n for n in inner}.values())
    n2 = sum(1 for n in inner if n.need_lt and n.need_eq) * count
    n1 = len(inner) * count - n2
    with sess.scope("MillEq"):
        batch = OtBatch(sess)
        pool = TriplePool(batch, sess, n1, n2)
        groups = []
        for node in leaves:
            lo = node.leaf * LEAF_BITS
            w = min(LEAF_BITS, l - lo)
            blk = (v >> U64(lo)) & _mask(w)
            fields = [f for f, need in (("lt", node.need_lt), ("eq", node.need_eq)) if need]
            nb = len(fields)
            k = 1 << w
            if sess.party == 0:
                ys = np.arange(k, dtype=U64)[None, :]
                masks = {f: sess.private.bits((count,)) for f in fields}
                msgs = np.zeros((count, k), dtype=U64)
                for i, f in enumerate(fields):
                    bit = (blk[:, None] < ys) if f == "lt" else (blk[:, None] == ys)
                    msgs |= (bit.astype(U64) ^ masks[f][:, None]) << U64(i)
                groups.append((node, fields, masks, batch.ot(0, k, nb, msgs=msgs)))
            else:
                groups.append((node, fields, None, batch.ot(0, k, nb, idx=blk)))
        batch.run()
        for node, fields, masks, g in groups:
            for i, f in enumerate(fields):
                val = masks[f] if sess.party == 0 else (g.out >> U64(i)) & ONE
                setattr(node, f, val)
        for level in levels[1:]:
            singles, pairs, plan = [], [], []
            for node in level:
                if node.leaf is not None or node.lt is not None or node.eq is not None:
                    continue  # promoted unchanged
                hi, lo = node.hi, node.lo
                if node.need_lt and node.need_eq:
                    plan.append((node, "pair", len(pairs)))
                    pairs.append((hi.eq, lo.lt, lo.eq))
                elif node.need_lt:
                    plan.append((node, "lt", len(singles)))
                    singles.append((hi.eq, lo.lt))
                elif node.need_eq:
                    plan.append((node, "eq", len(singles)))
                    singles.append((hi.eq, lo.eq))
            z1, z2 = and_many(sess, singles, pairs, pool)
            for node, kind, i in plan:
                if kind == "pair":
                    t, e = z2[i]
                    node.lt = node.hi.lt ^ t
                    node.eq = e
                elif kind == "lt":
                    node.lt = node.hi.lt ^ z1[i]
                else:
                    node.eq = z1[i]
    return root.lt, root.eq


def wrap(sess: Session, x, l: int) -> np.ndarray:
    """Boolean share of [x_0 + x_1 >= 2^l] from each party's own share x_b."""
    with sess.scope("Wrap"):
        x = _arr(x)
        v = (_mask(l) - (x & _mask(l))) if sess.party == 0 else x & _mask(l)
        lt, _ = mill_eq(sess, v, l, True, False)
    return lt.reshape(x.shape)


def wrap_eq(sess: Session, x, l: int) -> Tuple[np.ndarray, np.ndarray]:
    """Shares of the wrap bit and of [x_0 + x_1 = 2^l - 1 mod 2^l]."""
    with sess.scope("WrapEq"):
        x = _arr(x)
        v = (_mask(l) - (x & _mask(l))) if sess.party == 0 else x & _mask(l)
        lt, eq = mill_eq(sess, v, l, True, True)
    return lt.reshape(x.shape), eq.reshape(x.shape)


def eq_ones(sess: Session, x, l: int) -> np.ndarray:
    """Share of [x_0 + x_1 = 2^l - 1 mod 2^l] alone."""
    with sess.scope("Eq"):
        x = _arr(x)
        v = (_mask(l) - (x & _mask(l))) if sess.party == 0 else x & _mask(l)
        _, eq = mill_eq(sess, v, l, False, True)
    return eq.reshape(x.shape)


# -- conversions ---------------------------------------------------------


def b2a(sess: Session, x, l: int) -> np.ndarray:
    """Arithmetic share over 2^l of the shared bit x (one COT of width l)."""
    x = _arr(x)
    with sess.scope("B2A"):
        m = _mask(l)
        if sess.party == 0:
            t = cot(sess, 0, l, corr=x.ravel())
        else:
            t = cot(sess, 0, l, choice=x.ravel())
        y = (x.ravel() - U64(2) * t) & m
    return y.reshape(x.shape)


def mux(sess: Session, x, y, l: int) -> np.ndarray:
    """Arithmetic share of x * y for a shared bit x and shared y over 2^l."""
    x, y = _arr(x), _arr(y)
    shape = y.shape
    xb = np.broadcast_to(x, shape).ravel()
    yb = y.ravel() & _mask(l)
    with sess.scope("MUX"):
        m = _mask(l)
        corr = (yb - U64(2) * xb * yb) & m
        batch = OtBatch(sess)
        if sess.party == 0:
            mine = batch.cot(0, l, corr=corr)
            theirs = batch.cot(1, l, choice=xb)
        else:
            theirs = batch.cot(0, l, choice=xb)
            mine = batch.cot(1, l, corr=corr)
        batch.run()
        z = (xb * yb + mine.out + theirs.out) & m
    return z.reshape(shape)


def cot_mux_rows(sess: Session, x, y, l: int) -> np.ndarray:
    """MUX of a shared bit per row against a shared vector row.

    x has shape (r,), y shape (r, d); one COT per row and direction carries the
    whole row, so the cost is 2 r (lambda + d l).
    """
    x = _arr(x).ravel()
    y = _arr(y) & _mask(l)
    r, d = y.shape
    with sess.scope("MUX"):
        m = _mask(l)
        corr = (y - U64(2) * x[:, None] * y) & m
        batch = OtBatch(sess)
        if sess.party == 0:
            mine = batch.cot(0, l, corr=corr, d=d)
            theirs = batch.cot(1, l, choice=x, d=d)
        else:
            theirs = batch.cot(0, l, choice=x, d=d)
            mine = batch.cot(1, l, corr=corr, d=d)
        batch.run()
        z = (x[:, None] * y + mine.out.reshape(r, d) + theirs.out.reshape(r, d)) & m
    return z


# -- lookup tables -------------------------------------------------------


@dataclass(frozen=True)
class Field:
    """One output field of a LUT: table values, bit width, and share kind.

    kind "a" yields additive shares over 2^width, "b" XOR shares.
    ``table`` may be 1-D (shared by all instances) or 2-D (one row per
    instance).
    """

    table: np.ndarray
    width: int
    kind: str = "a"


def lut(sess: Session, fields: Sequence[Field], index: Sequence[Tuple[np.ndarray, int, str]]) -> List[np.ndarray]:
    """Look up T[x] for a shared index; one 1-of-2^m OT per instance.

    ``index`` lists (share, width, kind) parts, least significant first; kind
    "a" parts are additive shares, "b" parts XOR shares.  The receiver's OT
    choice is P1's share bits; P0 lays the table out so that row j holds the
    entry for P1-share j, masked by fresh randomness that becomes P0's output.
    """
    widths = [w for _, w, _ in index]
    m = sum(widths)
    if (1 << m) > LUT_MAX_ENTRIES:
        raise ResourceError(f"LUT with 2^{m} entries is too large")
    shares = [_arr(s).ravel() for s, _, _ in index]
    count = shares[0].shape[0]
    n = sum(f.width for f in fields)
    if n > 64:
        raise ContractError("LUT entry wider than 64 bits")
    with sess.scope("LUT"):
        if sess.party == 0:
            j = np.arange(1 << m, dtype=U64)[None, :]
            true_idx = np.zeros((count, 1 << m), dtype=U64)
            off = 0
            for sh, (_, w, kind) in zip(shares, index):
                jp = (j >> U64(off)) & _mask(w)
                part = ((sh[:, None] + jp) if kind == "a" else (sh[:, None] ^ jp)) & _mask(w)
                true_idx |= part << U64(off)
                off += w
            outs, msgs, pos = [], np.zeros((count, 1 << m), dtype=U64), 0
            for f in fields:
                tab = _arr(f.table)
                vals = tab[true_idx] if tab.ndim == 1 else np.take_along_axis(tab, true_idx.astype(np.int64), axis=1)
                r = sess.private.words((count,), f.width)
                if f.kind == "a":
                    ent = (vals - r[:, None]) & _mask(f.width)
                else:
                    ent = (vals ^ r[:, None]) & _mask(f.width)
                msgs |= ent << U64(pos)
                pos += f.width
                outs.append(r)
            ot(sess, 0, 1 << m, n, msgs=msgs)
            return outs
        idx = np.zeros(count, dtype=U64)
        off = 0
        for sh, w in zip(shares, widths):
            idx |= (sh & _mask(w)) << U64(off)
            off += w
        got = ot(sess, 0, 1 << m, n, idx=idx)
        outs, pos = [], 0
        for f in fields:
            outs.append((got >> U64(pos)) & _mask(f.width))
            pos += f.width
        return outs


def lut1(sess: Session, table, n: int, x, m: int) -> np.ndarray:
    """Single-field arithmetic LUT on an additively shared m-bit index."""
    x = _arr(x)
    (y,) = lut(sess, [Field(_arr(table), n, "a")], [(x, m, "a")])
    return y.reshape(x.shape)


def onehot(sess: Session, z, l: int) -> np.ndarray:
    """XOR shares of the one-hot vector of z in [0, l); shape (..., l)."""
    iota = l.bit_length() - 1
    z = _arr(z)
    eye = np.eye(l, dtype=U64)
    fields = [Field(eye[:, i], 1, "b") for i in range(l)]
    with sess.scope("OneHot"):
        outs = lut(sess, fields, [(z, iota, "a")])
    return np.stack(outs, axis=-1).reshape(z.shape + (l,))


def zeros(sess: Session, y, d: int) -> np.ndarray:
    """XOR share of [y == 0] for a shared d-bit digit."""
    y = _arr(y)
    tab = np.zeros(1 << d, dtype=U64)
    tab[0] = 1
    with sess.scope("Zeros"):
        (z,) = lut(sess, [Field(tab, 1, "b")], [(y, d, "a")])
    return z.reshape(y.shape)


def msnzb_proj(sess: Session, i: int, y, d: int, l: int) -> np.ndarray:
    """Share over 2^iota of MSNZB(y) + i d (i d itself when y = 0)."""
    iota = l.bit_length() - 1
    y = _arr(y)
    tab = (ring.msnzb(np.arange(1 << d, dtype=U64), d) + U64(i * d)) & _mask(iota)
    with sess.scope("MSNZBProj"):
        (u,) = lut(sess, [Field(tab, iota, "a")], [(y, d, "a")])
    return u.reshape(y.shape)
