"""``twopc-math`` command-line driver: verify, equiv, audit and bench."""

from __future__ import annotations

import argparse
import logging
import sys
from typing import List, Optional

from . import verify as vf
from .report import Report
from .transport import DEFAULT_LAMBDA

log = logging.getLogger("twopc_math")


def _pairs(fn: str, sx: Optional[List[int]], sy: Optional[List[int]]):
    grid = vf.grid(fn)
    xs = sorted({s for s, _ in grid}) if not sx else sx
    ys = sorted({so for _, so in grid}) if not sy else sy
    return [(s, so) for s in xs for so in ys]


def _fns(arg: str) -> List[str]:
    return list(vf.FUNCS) if arg == "all" else [arg]


def _one_pair(args, fn: str):
    s = args.sx[0] if args.sx else vf.EXHAUSTIVE_PAIR[fn][0]
    so = args.sy[0] if args.sy else vf.EXHAUSTIVE_PAIR[fn][1]
    return s, so


def cmd_verify(args) -> Report:
    if args.bitwidth != 16:
        raise SystemExit("verify sweeps the full 16-bit domain; --bitwidth must be 16")
    rep = Report(meta={"command": "verify"})
    for fn in _fns(args.fn):
        rep.extend(vf.verify_ulp([fn], _pairs(fn, args.sx, args.sy)))
    return rep


def cmd_equiv(args) -> Report:
    rep = Report(meta={"command": "equiv", "seed": args.seed})
    if args.scope in ("blocks", "all"):
        rep.extend(vf.equiv_blocks(args.max_bits, seed=args.seed, mult_bits=min(6, args.max_bits)))
    if args.scope in ("math", "all"):
        for fn in _fns(args.fn):
            if args.exhaustive:
                pairs = [_one_pair(args, fn)] if not (args.sx and args.sy) else _pairs(fn, args.sx, args.sy)
                rep.extend(vf.equiv_math([fn], pairs, count=None, seed=args.seed))
            else:
                rep.extend(vf.equiv_math([fn], _pairs(fn, args.sx, args.sy), count=args.instances, seed=args.seed, m=args.bitwidth))
    return rep


def cmd_audit(args) -> Report:
    rep = vf.audit(lam=args.lam, seed=args.seed, trials=args.trials, math_fns=_fns(args.fn))
    rep.meta["command"] = "audit"
    return rep


def cmd_bench(args) -> Report:
    fn = args.fn if args.fn != "all" else "sigmoid"
    s, so = _one_pair(args, fn)
    if args.transport == "inproc":
        rep = vf.bench(fn, s, so, args.instances, seed=args.seed, lam=args.lam, m=args.bitwidth)
    else:
        if args.role is None:
            raise SystemExit("--transport tcp needs --role p0 or p1 (run one process per role)")
        role = 0 if args.role == "p0" else 1
        rep = vf.bench_party(role, args.host, args.port, fn, s, so, args.instances, seed=args.seed, lam=args.lam, m=args.bitwidth)
    rep.meta["command"] = "bench"
    return rep


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="twopc-math", description="Two-party mixed-bitwidth math: verification and benchmarks.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, fn_default="all"):
        p.add_argument("--fn", choices=list(vf.FUNCS) + ["all"], default=fn_default)
        p.add_argument("--sx", type=int, nargs="+", help="input scale(s)")
        p.add_argument("--sy", type=int, nargs="+", help="output scale(s)")
        p.add_argument("--bitwidth", type=int, default=16)
        p.add_argument("--seed", default="0")
        p.add_argument("--lambda", dest="lam", type=int, default=DEFAULT_LAMBDA)
        p.add_argument("--report", choices=["json", "text"], default="text")
        p.add_argument("--out", help="write the report here instead of stdout")
        p.add_argument("--verbose", "-v", action="store_true")

    p = sub.add_parser("verify", help="exhaustive ULP sweeps of the cleartext functions")
    common(p)
    p.set_defaults(run=cmd_verify)

    p = sub.add_parser("equiv", help="secure protocols against cleartext oracles")
    common(p)
    p.add_argument("--scope", choices=["blocks", "math", "all"], default="all")
    p.add_argument("--max-bits", type=int, default=8)
    p.add_argument("--instances", type=int, default=1000, help="random inputs per parameter pair")
    p.add_argument("--exhaustive", action="store_true", help="whole 16-bit domain (one pair per function unless --sx/--sy given)")
    p.set_defaults(run=cmd_equiv)

    p = sub.add_parser("audit", help="communication against the cost formulas")
    common(p)
    p.add_argument("--trials", type=int, default=100, help="random inputs for the input-independence check")
    p.set_defaults(run=cmd_audit)

    p = sub.add_parser("bench", help="batched secure evaluation")
    common(p, fn_default="sigmoid")
    p.add_argument("--instances", type=int, default=10000)
    p.add_argument("--transport", choices=["inproc", "tcp"], default="inproc")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=7070)
    p.add_argument("--role", choices=["p0", "p1"])
    p.set_defaults(run=cmd_bench)
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        rep = args.run(args)
    except SystemExit:
        raise
    except Exception as exc:  # noqa: BLE001 - report and fail
        log.error("%s failed: %s", args.command, exc)
        return 2
    rep.meta.setdefault("lambda", args.lam)
    text = rep.render(args.report)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if not rep.ok:
        for row in rep.failures:
            log.warning("FAIL %s %s %s", row["suite"], row["name"], row.get("params"))
    return 0 if rep.ok else 1


if __name__ == "__main__":
    sys.exit(main())
