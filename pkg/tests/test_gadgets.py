import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import bit_shares, shares
from twopc_math import gadgets as gd
from twopc_math import ring
from twopc_math.costs import CostModel
from twopc_math.ring import ContractError
from twopc_math.verify import Pair

U64 = np.uint64
CM = CostModel(128)


def _ot(pair, k, width, msgs, idx):
    bits, rounds, (_, got) = pair.measure(
        lambda s, m, i: gd.ot(s, 0, k, width, msgs=m, idx=i), (msgs, None), (None, idx)
    )
    return bits, rounds, got


@pytest.mark.parametrize("k,width,expect", [(16, 2, 288), (2, 1, 130), (4, 1, 260), (8, 2, 272)])
def test_ot_cost(pair, k, width, expect):
    msgs = pair.rng.integers(0, 1 << width, (1, k)).astype(U64)
    bits, rounds, got = _ot(pair, k, width, msgs, np.array([k - 1], dtype=U64))
    assert bits == expect == CM.ot(k, width)
    assert rounds == 2
    assert got[0] == msgs[0, k - 1]


def test_ot_index_zero_returns_first(pair):
    msgs = pair.rng.integers(0, 256, (100, 5)).astype(U64)
    _, _, got = _ot(pair, 5, 8, msgs, np.zeros(100, dtype=U64))
    assert (got == msgs[:, 0]).all()


def test_ot_random_indices(pair):
    msgs = pair.rng.integers(0, 1 << 16, (500, 16)).astype(U64)
    idx = pair.rng.integers(0, 16, 500).astype(U64)
    _, _, got = _ot(pair, 16, 16, msgs, idx)
    assert (got == msgs[np.arange(500), idx.astype(int)]).all()


def test_ot_index_out_of_range():
    pr = Pair(seed="oob")
    with pytest.raises(ContractError):
        pr.run(lambda s, m, i: gd.ot(s, 0, 4, 2, msgs=m, idx=i), (np.zeros((1, 4), dtype=U64), None), (None, np.array([4], dtype=U64)))


def _cot(pair, width, corr, choice):
    bits, _, (r, y) = pair.measure(
        lambda s, c, j: gd.cot(s, 0, width, corr=c, choice=j), (corr, None), (None, choice)
    )
    return bits, (r.ravel() + y.ravel()) & ring.mask(width)


def test_cot_examples(pair):
    _, z = _cot(pair, 4, np.array([5, 5], dtype=U64), np.array([0, 1], dtype=U64))
    assert list(z) == [0, 5]
    bits, _ = _cot(pair, 32, np.array([7], dtype=U64), np.array([1], dtype=U64))
    assert bits == 160 == CM.cot(32)


def test_cot_row_payload_cost(pair):
    corr = pair.rng.integers(0, 256, (3, 4)).astype(U64)
    bits, _, (r, y) = pair.measure(
        lambda s, c, j: gd.cot(s, 0, 8, corr=c, choice=j, d=4), (corr, None), (None, np.array([1, 0, 1], dtype=U64))
    )
    assert bits == 3 * (128 + 4 * 8) == CM.cot(8, 4) * 3
    z = (r.reshape(3, 4) + y.reshape(3, 4)) & U64(255)
    assert (z == corr * np.array([[1], [0], [1]], dtype=U64)).all()


def _mill(pair, xs, ys, l, lt=True, eq=True):
    return pair.run(lambda s, v: gd.mill_eq(s, v, l, lt, eq), (xs,), (ys,))


def test_mill_examples(pair):
    (a0, e0), (a1, e1) = _mill(pair, np.array([0, 3], dtype=U64), np.array([0, 5], dtype=U64), 4)
    assert list(a0 ^ a1) == [0, 1]
    assert list(e0 ^ e1) == [1, 0]


def test_mill_exhaustive_l8(pair):
    xs, ys = (a.ravel().astype(U64) for a in np.meshgrid(np.arange(256), np.arange(256)))
    (a0, e0), (a1, e1) = _mill(pair, xs, ys, 8)
    assert ((a0 ^ a1) == (xs < ys)).all()
    assert ((e0 ^ e1) == (xs == ys)).all()


@pytest.mark.parametrize("l", [1, 3, 5, 9, 13, 32, 64])
def test_mill_random_widths(pair, l):
    xs = pair.rng.integers(0, 2**63, 1000, dtype=np.uint64) & ring.mask(l)
    ys = pair.rng.integers(0, 2**63, 1000, dtype=np.uint64) & ring.mask(l)
    ys[:100] = xs[:100]
    (a0, e0), (a1, e1) = _mill(pair, xs, ys, l)
    assert ((a0 ^ a1) == (xs < ys)).all()
    assert ((e0 ^ e1) == (xs == ys)).all()


@pytest.mark.parametrize("l", [4, 8, 16, 31, 64])
@pytest.mark.parametrize("lt,eq", [(True, False), (False, True), (True, True)])
def test_mill_cost_matches_model(pair, l, lt, eq):
    xs = pair.rng.integers(0, 2**63, 10, dtype=np.uint64) & ring.mask(l)
    bits, _, _ = pair.measure(lambda s, v: gd.mill_eq(s, v, l, lt, eq), (xs,), (xs,))
    assert bits == 10 * CM.mill(l, lt, eq)


def test_wrap_examples(pair):
    out = pair.run(lambda s, x: gd.wrap_eq(s, x, 2), (np.array([3, 1], dtype=U64),), (np.array([2, 2], dtype=U64),))
    w = out[0][0] ^ out[1][0]
    e = out[0][1] ^ out[1][1]
    assert list(w) == [1, 0]
    assert list(e) == [0, 1]


def test_wrap_exhaustive_l6(pair):
    x0, x1 = (a.ravel().astype(U64) for a in np.meshgrid(np.arange(64), np.arange(64)))
    (w0, e0), (w1, e1) = pair.run(lambda s, x: gd.wrap_eq(s, x, 6), (x0,), (x1,))
    assert ((w0 ^ w1) == ring.wrap(x0, x1, 6)).all()
    assert ((e0 ^ e1) == ((x0 + x1) % 64 == 63)).all()
    e = pair.boolean(lambda s, x: gd.eq_ones(s, x, 6), (x0,), (x1,))
    assert (e == ((x0 + x1) % 64 == 63)).all()
    w = pair.boolean(lambda s, x: gd.wrap(s, x, 6), (x0,), (x1,))
    assert (w == ring.wrap(x0, x1, 6)).all()


def test_and_truth_table(pair, rng):
    x = np.array([0, 0, 1, 1], dtype=U64)
    y = np.array([0, 1, 0, 1], dtype=U64)
    x0, x1 = bit_shares(rng, x)
    y0, y1 = bit_shares(rng, y)
    z = pair.boolean(gd.and_, (x0, y0), (x1, y1))
    assert list(z) == [0, 0, 0, 1]
    z1, z2 = pair.run(gd.and_pair, (x0, y0, y1 * 0), (x1, y1, y ^ y1 * 0))
    assert list(z1[0] ^ z2[0]) == [0, 0, 0, 1]
    assert list(z1[1] ^ z2[1]) == [0, 0, 0, 1]


def test_and_cost(pair, rng):
    x0, x1 = bit_shares(rng, rng.integers(0, 2, 7))
    bits, _, _ = pair.measure(gd.and_, (x0, x0), (x1, x1))
    assert bits == 7 * CM.and1() == 7 * (2 * 128 + 8)
    bits, _, _ = pair.measure(gd.and_pair, (x0, x0, x0), (x1, x1, x1))
    assert bits == 7 * CM.and2() == 7 * (2 * 128 + 22)


def test_batch_of_64_ands_opens_in_one_round(pair, rng):
    x = rng.integers(0, 2, 64).astype(U64)
    y = rng.integers(0, 2, 64).astype(U64)
    x0, x1 = bit_shares(rng, x)
    y0, y1 = bit_shares(rng, y)

    def f(s, a, b):
        batch = gd.OtBatch(s)
        pool = gd.TriplePool(batch, s, 64, 0)
        batch.run()
        start = s.clock
        (z,), _ = gd.and_many(s, singles=[(a, b)], pool=pool)
        return z, s.clock - start

    (z0, r0), (z1, r1) = pair.run(f, (x0, y0), (x1, y1))
    assert r0 == r1 == 1
    assert ((z0 ^ z1) == (x & y)).all()


def test_triple_validity_10k(pair):
    def f(s):
        batch = gd.OtBatch(s)
        pool = gd.TriplePool(batch, s, 10_000, 10_000)
        batch.run()
        return pool.take(1, 10_000), pool.take(2, 10_000)

    (t1a, t2a), (t1b, t2b) = pair.run(f)
    a, b, c = (u ^ v for u, v in zip(t1a, t1b))
    assert (c == (a & b)).all()
    a, b1, b2, c1, c2 = (u ^ v for u, v in zip(t2a, t2b))
    assert (c1 == (a & b1)).all() and (c2 == (a & b2)).all()
    # triples are not constant
    assert 0.4 < a.mean() < 0.6


@pytest.mark.parametrize("l", [1, 12, 32, 64])
def test_b2a(pair, rng, l):
    x = rng.integers(0, 2, 300).astype(U64)
    x0, x1 = bit_shares(rng, x)
    bits, _, (y0, y1) = pair.measure(lambda s, v: gd.b2a(s, v, l), (x0,), (x1,))
    assert ((y0 + y1) & ring.mask(l) == x).all()
    assert bits == 300 * (128 + l) == 300 * CM.b2a(l)


def test_b2a_examples(pair):
    y = pair.arith(lambda s, v: gd.b2a(s, v, 12), (np.array([0, 1], dtype=U64),), (np.array([0, 0], dtype=U64),), 12)
    assert list(y) == [0, 1]


def test_mux_examples(pair):
    y = pair.arith(
        lambda s, b, v: gd.mux(s, b, v, 8),
        (np.array([0, 1], dtype=U64), np.array([70, 70], dtype=U64)),
        (np.array([0, 0], dtype=U64), np.array([7, 7], dtype=U64)),
        8,
    )
    assert list(y) == [0, 77]


@pytest.mark.parametrize("l", [1, 8, 32, 64])
def test_mux_random(pair, rng, l):
    y = rng.integers(0, 2**63, 400, dtype=np.uint64) & ring.mask(l)
    b = rng.integers(0, 2, 400).astype(U64)
    y0, y1 = shares(rng, y, l)
    b0, b1 = bit_shares(rng, b)
    bits, _, (z0, z1) = pair.measure(lambda s, bb, v: gd.mux(s, bb, v, l), (b0, y0), (b1, y1))
    assert ((z0 + z1) & ring.mask(l) == b * y).all()
    assert bits == 400 * 2 * (128 + l) == 400 * CM.mux(l)


def test_lut_identity_and_cost(pair, rng):
    tab = np.arange(256, dtype=U64)
    x0, x1 = shares(rng, np.array([5]), 8)
    y = pair.arith(lambda s, v: gd.lut1(s, tab, 8, v, 8), (x0,), (x1,), 8)
    assert list(y) == [5]
    bits, _, _ = pair.measure(lambda s, v: gd.lut1(s, tab, 16, v, 8), (x0,), (x1,))
    assert bits == 2 * 128 + 256 * 16 == 4352 == CM.lut(8, 16)


def test_lut_random_tables_1000(pair, rng):
    for m, n in [(3, 5), (6, 16), (8, 12)]:
        tab = rng.integers(0, 1 << n, 1 << m).astype(U64)
        x = rng.integers(0, 1 << m, 1000).astype(U64)
        x0, x1 = shares(rng, x, m)
        y = pair.arith(lambda s, v: gd.lut1(s, tab, n, v, m), (x0,), (x1,), n)
        assert (y == tab[x]).all()


def test_lut_mixed_index_and_fields(pair, rng):
    # index = (boolean bit, 3-bit arithmetic part); two output fields
    b = rng.integers(0, 2, 200).astype(U64)
    a = rng.integers(0, 8, 200).astype(U64)
    ta = rng.integers(0, 1 << 10, 16).astype(U64)
    tb = rng.integers(0, 2, 16).astype(U64)
    b0, b1 = bit_shares(rng, b)
    a0, a1 = shares(rng, a, 3)
    f = lambda s, bb, aa: gd.lut(s, [gd.Field(ta, 10, "a"), gd.Field(tb, 1, "b")], [(bb, 1, "b"), (aa, 3, "a")])
    (y0, z0), (y1, z1) = pair.run(f, (b0, a0), (b1, a1))
    idx = (b | (a << U64(1))).astype(int)
    assert ((y0 + y1) & U64(1023) == ta[idx]).all()
    assert ((z0 ^ z1) == tb[idx]).all()


def test_lut_too_large():
    pr = Pair(seed="big")
    with pytest.raises(gd.ResourceError):
        pr.run(lambda s: gd.lut1(s, np.zeros(1, dtype=U64), 1, np.zeros(1, dtype=U64), 21))


def test_onehot_zeros_proj(pair, rng):
    z0, z1 = shares(rng, np.array([3]), 3)
    oh = pair.boolean(lambda s, v: gd.onehot(s, v, 8), (z0,), (z1,))
    assert list(oh[0]) == [0, 0, 0, 1, 0, 0, 0, 0]
    y0, y1 = shares(rng, np.array([0, 5]), 4)
    assert list(pair.boolean(lambda s, v: gd.zeros(s, v, 4), (y0,), (y1,))) == [1, 0]
    y0, y1 = shares(rng, np.array([4, 0]), 4)
    u = pair.arith(lambda s, v: gd.msnzb_proj(s, 1, v, 4, 16), (y0,), (y1,), 4)
    assert list(u) == [6, 4]


def test_onehot_exhaustive(pair, rng):
    z = np.arange(16, dtype=U64)
    z0, z1 = shares(rng, z, 4)
    oh = pair.boolean(lambda s, v: gd.onehot(s, v, 16), (z0,), (z1,))
    assert (oh == np.eye(16, dtype=U64)).all()


def test_shares_rerandomize_across_seeds(rng):
    y = rng.integers(0, 1 << 16, 50).astype(U64)
    b = np.ones(50, dtype=U64)
    y0, y1 = shares(rng, y, 16)
    outs = []
    for seed in ("s1", "s2"):
        pr = Pair(seed=seed)
        outs.append(pr.run(lambda s, bb, v: gd.mux(s, bb, v, 16), (b, y0), (b * 0, y1)))
        pr.close()
    (a0, a1), (c0, c1) = outs
    assert not (a0 == c0).all()
    assert ((a0 + a1) & U64(0xFFFF) == (c0 + c1) & U64(0xFFFF)).all()


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 64), st.integers(0, 2**64 - 1), st.integers(0, 2**64 - 1))
def test_wrap_property(l, a, b):
    pr = _PR
    a, b = a & (2**l - 1), b & (2**l - 1)
    w = pr.boolean(lambda s, x: gd.wrap(s, x, l), (np.array([a], dtype=U64),), (np.array([b], dtype=U64),))
    assert int(w[0]) == int(a + b >= 2**l)


_PR = Pair(seed="hyp-gadgets")
