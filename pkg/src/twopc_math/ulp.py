"""High-precision oracle and ULP error measurement.

Exact results are evaluated with MPFR at well over 100 bits and stored as a
double-double pair (hi, lo) so that whole 2^16 sweeps can be scored with
vectorised numpy.  Any error whose fractional part sits within a hair of an
integer is re-scored in MPFR so the floor can never be flipped by rounding.
"""

from __future__ import annotations

import functools
import math
from fractions import Fraction
from typing import Callable, Dict, Tuple

import gmpy2
import numpy as np

from . import cleartext as ct
from . import ring

PREC = 128
MAX_PREC = 4096
_EDGE = 1e-9


class OraclePrecisionError(ArithmeticError):
    """The oracle could not decide a ULP count at its working precision."""


def _ctx():
    return gmpy2.context(gmpy2.get_context(), precision=PREC)


def _mp_exp_neg(z):
    return gmpy2.exp(-z)


def _mp_sigmoid(z):
    return 1 / (1 + gmpy2.exp(-z))


def _mp_tanh(z):
    return gmpy2.tanh(z)


def _mp_rsqrt(z):
    return gmpy2.rec_sqrt(z)


FUNCS: Dict[str, Callable] = {
    "exp": _mp_exp_neg,
    "sigmoid": _mp_sigmoid,
    "tanh": _mp_tanh,
    "rsqrt": _mp_rsqrt,
}


def input_value(x: int, fn: str, m: int, s: int):
    """Real argument encoded by x (exp and rsqrt read x unsigned)."""
    v = x if fn in ("exp", "rsqrt") else ring.to_signed(x, m)
    return gmpy2.mpfr(v) / (1 << s)


@functools.lru_cache(maxsize=64)
def exact_table(fn: str, m: int, s: int) -> Tuple[np.ndarray, np.ndarray]:
    """(hi, lo) float64 arrays with f(x / 2^s) = hi + lo for every x in Z_{2^m}.

    rsqrt at x = 0 is left as NaN.
    """
    f = FUNCS[fn]
    n = 1 << m
    hi = np.empty(n)
    lo = np.empty(n)
    with _ctx():
        for x in range(n):
            if fn == "rsqrt" and x == 0:
                hi[x] = lo[x] = np.nan
                continue
            r = f(input_value(x, fn, m, s))
            h = float(r)
            hi[x] = h
            lo[x] = float(r - h)
    return hi, lo


def exact_value(fn: str, x: int, m: int, s: int, prec: int = PREC, with_flag: bool = False):
    """f(x / 2^s) at ``prec`` bits; with_flag also reports whether it is exact."""
    with gmpy2.context(gmpy2.get_context(), precision=prec) as c:
        c.inexact = False
        r = FUNCS[fn](input_value(x, fn, m, s))
        exact = not c.inexact
    return (r, exact) if with_flag else r


def _floor_delta(yi: int, scale: int, r, prec: int, r_exact: bool = False):
    """floor(|yi - r 2^scale|), or None if r is too coarse to decide it.

    r carries relative error below 2^{4-prec}, so the floor is safe once the
    distance to the nearest integer exceeds that bound, or when r itself is
    exact and so is the subtraction.
    """
    with gmpy2.context(gmpy2.get_context(), precision=prec + 64) as c:
        c.inexact = False
        target = gmpy2.mpfr(r) * (1 << scale)
        delta = abs(gmpy2.mpfr(yi) - target)
        exact = r_exact and not c.inexact
        k = int(gmpy2.floor(delta))
        near = min(delta - k, k + 1 - delta)
        bound = abs(target) * gmpy2.mpfr(2) ** (4 - prec)
    if exact or near > bound:
        return k
    return None


def ulp_error(y: int, fmt: ring.FixFmt, r) -> int:
    """floor(|int(y) - r * 2^s'|) for one output, r a real (mpfr/Fraction/int).

    r may also be a callable prec -> (value, is_exact), letting the caller
    refine it.
    """
    yi = ring.to_signed(y, fmt.width) if fmt.signed else ring.reduce(y, fmt.width)
    if not callable(r):
        if isinstance(r, (int, float, Fraction)):
            q = abs(Fraction(yi) - Fraction(r) * (1 << fmt.scale))
            return math.floor(q)
        k = _floor_delta(yi, fmt.scale, r, r.precision if hasattr(r, "precision") else 53)
        if k is None:
            raise OraclePrecisionError(f"cannot resolve ULP count for y={y}")
        return k
    prec = PREC
    while prec <= MAX_PREC:
        val, val_exact = r(prec)
        k = _floor_delta(yi, fmt.scale, val, prec, val_exact)
        if k is not None:
            return k
        prec *= 2
    raise OraclePrecisionError(f"cannot resolve ULP count for y={y} at {MAX_PREC} bits")


def ulp_errors(fn: str, y: np.ndarray, m: int, s: int, fmt: ring.FixFmt, xs=None) -> np.ndarray:
    """ULP error of outputs y[i] computed on inputs xs[i] (default: all of Z_{2^m})."""
    hi, lo = exact_table(fn, m, s)
    if xs is None:
        xs = np.arange(1 << m)
    xs = np.asarray(xs, dtype=np.int64)
    y = np.asarray(y, dtype=np.uint64)
    yi = ring.to_signed(y, fmt.width) if fmt.signed else (y & ring.mask(fmt.width)).astype(np.int64)
    scale = float(1 << fmt.scale)
    delta = np.abs((yi.astype(np.float64) - hi[xs] * scale) - lo[xs] * scale)
    k = np.floor(delta).astype(np.int64)
    frac = delta - k
    edgy = np.nonzero((frac < _EDGE) | (frac > 1 - _EDGE))[0]
    for i in edgy:
        x = int(xs[i])
        k[i] = ulp_error(int(y[i]), fmt, functools.partial(_exact_at, fn, x, m, s))
    return k


def _exact_at(fn, x, m, s, prec):
    return exact_value(fn, x, m, s, prec, with_flag=True)


def reference_outputs(fn: str, s: int, s_out: int, xs=None, m: int = 16, n: int = 16) -> np.ndarray:
    """Cleartext pipeline outputs at the default approximation knobs."""
    if xs is None:
        xs = np.arange(1 << m, dtype=np.uint64)
    xs = np.asarray(xs, dtype=np.uint64)
    if fn == "exp":
        return ct.rexp_ref(xs, ct.MathParams.exp(s, s_out, m, n))
    if fn == "sigmoid":
        return ct.sigmoid_ref(xs, ct.MathParams.sigmoid(s, s_out, m, n))
    if fn == "tanh":
        return ct.tanh_ref(xs, ct.MathParams.tanh(s, s_out, m, n))
    if fn == "rsqrt":
        p = ct.MathParams.rsqrt(s, s_out, m)
        return ct.rsqrt_ref(xs, m, s, s_out, p.g, p.t)
    raise ValueError(f"unknown function {fn!r}")


def domain(fn: str, s: int, m: int = 16) -> np.ndarray:
    """Inputs on which the ULP bound is asserted."""
    xs = np.arange(1 << m, dtype=np.uint64)
    if fn == "rsqrt":
        return xs[xs.astype(np.float64) / float(1 << s) >= 0.1]
    return xs


def max_ulp(fn: str, s: int, s_out: int, m: int = 16, n: int = 16) -> Tuple[int, int]:
    """(max ULP error, argmax input) over the function's test domain."""
    xs = domain(fn, s, m)
    y = reference_outputs(fn, s, s_out, xs, m, n)
    err = ulp_errors(fn, y, m, s, ring.FixFmt(n, s_out), xs)
    i = int(np.argmax(err))
    return int(err[i]), int(xs[i])
