import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import bit_shares, shares
from twopc_math import blocks as bk
from twopc_math import ring
from twopc_math import verify as vf
from twopc_math.blocks import NO_HINT, WrapHint
from twopc_math.costs import CostModel, paper_bound
from twopc_math.ring import ContractError
from twopc_math.verify import Pair

U64 = np.uint64
CM = CostModel(128)
BLOCK_NAMES = ["MSB2Wrap", "ZXt", "SXt", "LRS", "ARS", "TR", "DivPow2", "DigDec", "MSNZB",
               "CrossMult", "UMult", "SMult", "MultTR", "BitMatMul", "MatMul"]


@pytest.fixture(scope="module")
def equiv_report():
    return vf.equiv_blocks(6, seed="blocks-test", mult_bits=5)


@pytest.mark.parametrize("name", BLOCK_NAMES)
def test_exhaustive_small_widths(equiv_report, name):
    rows = [r for r in equiv_report.rows if r["name"] == name]
    assert rows, f"no rows for {name}"
    bad = [r for r in rows if not r["ok"]]
    assert not bad, bad[:3]


def _a(*v):
    return np.array(v, dtype=U64)


# spec examples with fixed share splits


def test_zxt_sxt_examples(pair):
    assert pair.arith(lambda s, x: bk.zxt(s, x, 2, 4), (_a(3),), (_a(3),), 4)[0] == 2
    x0, x1 = shares(pair.rng, _a(3, 1, 0), 2)
    assert list(pair.arith(lambda s, x: bk.sxt(s, x, 2, 4), (x0,), (x1,), 4)) == [15, 1, 0]
    assert list(pair.arith(lambda s, x: bk.zxt(s, x, 2, 4), (x0,), (x1,), 4)) == [3, 1, 0]


def test_truncation_examples(pair):
    assert pair.arith(lambda s, x: bk.lrs(s, x, 4, 2), (_a(5),), (_a(7),), 4)[0] == 3
    x0, x1 = shares(pair.rng, _a(12, 2, 0), 4)
    assert list(pair.arith(lambda s, x: bk.ars(s, x, 4, 1), (x0,), (x1,), 4)) == [14, 1, 0]
    x0, x1 = shares(pair.rng, _a(13), 4)
    assert pair.arith(lambda s, x: bk.tr(s, x, 4, 2), (x0,), (x1,), 2)[0] == 3
    x0, x1 = shares(pair.rng, _a(9, 7), 4)
    assert list(pair.arith(lambda s, x: bk.div_pow2(s, x, 4, 1), (x0,), (x1,), 4)) == [13, 3]


def test_msb_to_wrap_public_zero(pair):
    # both share MSBs set and the value's MSB public 0: the shares must wrap
    w = pair.boolean(lambda s, x, h: bk.msb_to_wrap(s, x, 4, h), (_a(8), WrapHint.public(_a(0))), (_a(9), WrapHint.public(_a(0))))
    assert w[0] == 1


def test_mult_examples(pair):
    got = pair.arith(lambda s, v: bk.cross_mult(s, v, 2, 3, 5, 0), (_a(3, 0),), (_a(5, 5),), 5)
    assert list(got) == [15, 0]
    x0, x1 = shares(pair.rng, _a(7), 4)
    y0, y1 = shares(pair.rng, _a(9), 4)
    assert pair.arith(lambda s, x, y: bk.umult(s, x, 4, y, 4, 8), (x0, y0), (x1, y1), 8)[0] == 63
    x0, x1 = shares(pair.rng, _a(5, 0), 3)
    y0, y1 = shares(pair.rng, _a(3, 3), 3)
    assert list(pair.arith(lambda s, x, y: bk.smult(s, x, 3, y, 3, 6), (x0, y0), (x1, y1), 6)) == [55, 0]


def test_smult_tr_unit_product(pair):
    so = 10
    x0, x1 = shares(pair.rng, _a(1 << so), so + 2)
    got = pair.arith(lambda s, x: bk.smult_tr(s, x, so + 2, x, so + 2, 2 * so + 2, so), (x0,), (x1,), so + 2)
    assert got[0] == 1 << so


def test_digdec_msnzb_examples(pair):
    x0, x1 = shares(pair.rng, _a(0xAB), 8)
    o0, o1 = pair.run(lambda s, x: bk.digdec(s, x, 8, [4, 4]), (x0,), (x1,))
    assert (o0[0] + o1[0]) & U64(15) == 0xB and (o0[1] + o1[1]) & U64(15) == 0xA
    x0, x1 = shares(pair.rng, _a(12, 1, 0), 4)
    z = pair.boolean(lambda s, x: bk.msnzb(s, x, 4, 2), (x0,), (x1,))
    assert list(z.argmax(axis=-1)) == [3, 0, 0]
    assert (z.sum(axis=-1) == 1).all()


def test_msnzb_exhaustive_l8_d4(pair):
    x = np.arange(256, dtype=U64)
    x0, x1 = shares(pair.rng, x, 8)
    z = pair.boolean(lambda s, v: bk.msnzb(s, v, 8, 4), (x0,), (x1,))
    assert (z == np.eye(8, dtype=U64)[ring.msnzb(x, 8).astype(int)]).all()


def test_bitmat_examples(pair, rng):
    x = rng.integers(0, 1 << 10, (3, 2)).astype(U64)
    x0, x1 = shares(rng, x, 10)
    ones = np.ones((2, 3), dtype=U64)
    got = pair.arith(lambda s, w, v: bk.bitmat_mul(s, w, v, 10), (ones, x0), (ones * 0, x1), 10)
    assert (got == (x.sum(axis=0) & U64(1023))[None, :]).all()
    got = pair.arith(lambda s, w, v: bk.bitmat_mul(s, w, v, 10), (ones * 0, x0), (ones * 0, x1), 10)
    assert not got.any()
    w = rng.integers(0, 2, (2, 3)).astype(U64)
    w0, w1 = bit_shares(rng, w)
    got = pair.arith(lambda s, ww, v: bk.bitmat_mul(s, ww, v, 10), (w0, x0), (w1, x1), 10)
    assert (got == (w @ x) & U64(1023)).all()


def test_matmul_3x4x2(pair, rng):
    x = rng.integers(0, 256, (3, 4)).astype(U64)
    y = rng.integers(0, 256, (4, 2)).astype(U64)
    x0, x1 = shares(rng, x, 8)
    y0, y1 = shares(rng, y, 8)
    bits, _, (z0, z1) = pair.measure(lambda s, a, b: bk.matmul(s, a, 8, b, 8, (3, 4, 2)), (x0, y0), (x1, y1))
    assert ((z0 + z1) & ring.mask(18) == (x @ y) % (1 << 18)).all()
    assert bits == CM.matmul(8, 8, 3, 4, 2)


def test_matmul_1x1x1_is_umult(pair, rng):
    x0, x1 = shares(rng, _a(200), 8)
    y0, y1 = shares(rng, _a(1000), 12)
    got = pair.arith(lambda s, a, b: bk.matmul(s, a, 8, b, 12, (1, 1, 1)), (x0, y0), (x1, y1), 20)
    assert got.ravel()[0] == 200_000


# wide-width properties

_PR = Pair(seed="blocks-hyp")
W = st.integers(2, 64)


def _split(l, x, r):
    m = ring.mask(l)
    x, r = _a(x) & m, _a(r) & m
    return x[0], r, (x - r) & m


@settings(max_examples=40, deadline=None)
@given(W, st.data())
def test_extension_property(l, data):
    n = data.draw(st.integers(l + 1, 64)) if l < 64 else None
    if n is None:
        return
    x, x0, x1 = _split(l, data.draw(st.integers(0, 2**64 - 1)), data.draw(st.integers(0, 2**64 - 1)))
    assert _PR.arith(lambda s, a: bk.zxt(s, a, l, n), (x0,), (x1,), n)[0] == x
    assert _PR.arith(lambda s, a: bk.sxt(s, a, l, n), (x0,), (x1,), n)[0] == ring.sign_extend(x, l, n)


@settings(max_examples=40, deadline=None)
@given(W, st.data())
def test_truncation_property(l, data):
    s = data.draw(st.integers(1, l - 1))
    x, x0, x1 = _split(l, data.draw(st.integers(0, 2**64 - 1)), data.draw(st.integers(0, 2**64 - 1)))
    mx = ring.msb(_a(x), l)
    assert _PR.arith(lambda se, a: bk.lrs(se, a, l, s), (x0,), (x1,), l)[0] == ring.logical_shift_right(x, l, s)
    h = WrapHint.public(mx)
    assert _PR.arith(lambda se, a: bk.ars(se, a, l, s, h), (x0,), (x1,), l)[0] == ring.arith_shift_right(x, l, s)
    assert _PR.arith(lambda se, a: bk.tr(se, a, l, s), (x0,), (x1,), l - s)[0] == ring.truncate_reduce(x, l, s)
    assert _PR.arith(lambda se, a: bk.div_pow2(se, a, l, s), (x0,), (x1,), l)[0] == ring.c_div_pow2(x, l, s)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 32), st.integers(1, 32), st.data())
def test_mult_property(m, n, data):
    l = data.draw(st.integers(1, m + n))
    r = lambda: data.draw(st.integers(0, 2**64 - 1))
    x, x0, x1 = _split(m, r(), r())
    y, y0, y1 = _split(n, r(), r())
    got = _PR.arith(lambda s, a, b: bk.umult(s, a, m, b, n, l), (x0, y0), (x1, y1), l)[0]
    assert got == ring.umul(x, m, y, n, l)
    got = _PR.arith(lambda s, a, b: bk.smult(s, a, m, b, n, l), (x0, y0), (x1, y1), l)[0]
    assert got == ring.smul(x, m, y, n, l)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 64), st.data())
def test_hint_soundness(l, data):
    # a shared or public MSB gives the same output as no hint at all
    n = min(64, l + data.draw(st.integers(1, 8)))
    x, x0, x1 = _split(l, data.draw(st.integers(0, 2**64 - 1)), data.draw(st.integers(0, 2**64 - 1)))
    mx = ring.msb(_a(x), l)
    r = _a(data.draw(st.integers(0, 1)))
    for h0, h1 in [(NO_HINT, NO_HINT), (WrapHint.public(mx), WrapHint.public(mx)), (WrapHint.shared(r), WrapHint.shared(r ^ mx))]:
        if n > l:
            assert _PR.arith(lambda s, a, h: bk.sxt(s, a, l, n, h), (x0, h0), (x1, h1), n)[0] == ring.sign_extend(x, l, n)
        assert _PR.arith(lambda s, a, h: bk.ars(s, a, l, l // 2 or 1, h), (x0, h0), (x1, h1), l)[0] == ring.arith_shift_right(x, l, l // 2 or 1)
        assert _PR.boolean(lambda s, a: bk.msb(s, a, l), (x0,), (x1,))[0] == mx[0]


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 64), st.data())
def test_digdec_property(l, data):
    cuts = sorted(data.draw(st.sets(st.integers(1, l - 1), max_size=4)))
    digits = [b - a for a, b in zip([0] + cuts, cuts + [l])]
    x, x0, x1 = _split(l, data.draw(st.integers(0, 2**64 - 1)), data.draw(st.integers(0, 2**64 - 1)))
    outs = _PR.run(lambda s, a: bk.digdec(s, a, l, digits), (x0,), (x1,))
    off = 0
    for i, d in enumerate(digits):
        assert (outs[0][i][0] + outs[1][i][0]) & ring.mask(d) == (int(x) >> off) & ((1 << d) - 1)
        off += d


def test_smult_matches_offset_umult(pair, rng):
    # int(x) int(y) = (x' - 2^{m-1})(y' - 2^{n-1}) with x' = x + 2^{m-1}
    m, n, l = 7, 9, 16
    x = rng.integers(0, 1 << m, 300).astype(U64)
    y = rng.integers(0, 1 << n, 300).astype(U64)
    xp, yp = (x + U64(1 << (m - 1))) & ring.mask(m), (y + U64(1 << (n - 1))) & ring.mask(n)
    want = (ring.umul(xp, m, yp, n, l) - (yp << U64(m - 1)) - (xp << U64(n - 1)) + U64(1 << (m + n - 2))) & ring.mask(l)
    x0, x1 = shares(rng, x, m)
    y0, y1 = shares(rng, y, n)
    got = pair.arith(lambda s, a, b: bk.smult(s, a, m, b, n, l), (x0, y0), (x1, y1), l)
    assert (got == want).all()
    assert (got == ring.smul(x, m, y, n, l)).all()


# costs

CASES = [
    ("ZXt", lambda s, x: bk.zxt(s, x, 20, 32), 20, lambda: CM.zxt(20, 32)),
    ("LRS", lambda s, x: bk.lrs(s, x, 32, 12), 32, lambda: CM.lrs(32, 12)),
    ("ARS", lambda s, x: bk.ars(s, x, 16, 8), 16, lambda: CM.lrs(16, 8)),
    ("TR", lambda s, x: bk.tr(s, x, 32, 12), 32, lambda: CM.tr(32, 12)),
    ("DivPow2", lambda s, x: bk.div_pow2(s, x, 64, 16), 64, lambda: CM.div_pow2(64, 16)),
    ("MSB", lambda s, x: bk.msb(s, x, 32), 32, lambda: CM.msb(32)),
    ("DigDec", lambda s, x: bk.digdec(s, x, 32, [8] * 4), 32, lambda: CM.digdec([8] * 4)),
    ("MSNZB", lambda s, x: bk.msnzb(s, x, 32, 8), 32, lambda: CM.msnzb(32, 8)),
    ("UMult", lambda s, x: bk.umult(s, x, 12, x, 20, 32), 32, lambda: CM.umult(12, 20, 32)),
    ("SMult", lambda s, x: bk.smult(s, x, 16, x, 16, 32), 32, lambda: CM.umult(16, 16, 32)),
]


@pytest.mark.parametrize("name,fn,width,expect", CASES, ids=[c[0] for c in CASES])
def test_cost_matches_model_and_is_input_independent(pair, rng, name, fn, width, expect):
    seen = set()
    for _ in range(3):
        x = rng.integers(0, 2**63, 5, dtype=np.uint64) & ring.mask(width)
        x0, x1 = shares(rng, x, width)
        bits, _, _ = pair.measure(fn, (x0,), (x1,))
        seen.add(bits)
    assert seen == {5 * expect()}


def test_hint_costs(pair, rng):
    x0, x1 = shares(rng, _a(1, 2, 3), 16)
    mx = _a(0, 0, 0)
    bits, _, _ = pair.measure(lambda s, x, h: bk.msb_to_wrap(s, x, 16, h), (x0, WrapHint.public(mx)), (x1, WrapHint.public(mx)))
    assert bits == 3 * 130
    bits, _, _ = pair.measure(lambda s, x, h: bk.msb_to_wrap(s, x, 16, h), (x0, WrapHint.shared(mx)), (x1, WrapHint.shared(mx)))
    assert bits == 3 * 260


@pytest.mark.parametrize("l,s", [(32, 12), (16, 8), (64, 16)])
def test_paper_bound_ratio(pair, rng, l, s):
    x0, x1 = shares(rng, _a(5), l)
    for name, fn, kw in [
        ("LRS", lambda se, x: bk.lrs(se, x, l, s), dict(l=l, s=s)),
        ("TR", lambda se, x: bk.tr(se, x, l, s), dict(l=l, s=s)),
        ("ZXt", lambda se, x: bk.zxt(se, x, l - s, l), dict(m=l - s, n=l)),
    ]:
        bits, _, _ = pair.measure(fn, (x0,), (x1,))
        assert bits <= 1.25 * paper_bound(name, 128, **kw), name


def test_contract_errors(pair):
    x = _a(1)
    for fn in [
        lambda s: bk.zxt(s, x, 8, 8),
        lambda s: bk.lrs(s, x, 8, 0),
        lambda s: bk.tr(s, x, 8, 8),
        lambda s: bk.div_pow2(s, x, 8, 9),
        lambda s: bk.umult(s, x, 4, x, 4, 9),
        lambda s: bk.cross_mult(s, x, 4, 4, 9, 0),
        lambda s: bk.digdec(s, x, 8, [4, 3]),
        lambda s: bk.msnzb(s, x, 12),
        lambda s: bk.msb_to_wrap(s, x, 8, NO_HINT),
        lambda s: bk.bitmat_mul(s, np.zeros((2, 3), dtype=U64), np.zeros((2, 2), dtype=U64), 8),
    ]:
        with pytest.raises(ContractError):
            fn(pair.sessions[0])
    with pytest.raises(ContractError):
        WrapHint("maybe")
