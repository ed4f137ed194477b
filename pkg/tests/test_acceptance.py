"""Acceptance criteria, each at its stated tolerance.

Every criterion records its outcome; the terminal summary prints one
PASS/FAIL line per criterion.  Nothing here is relaxed: a criterion that is
not met fails.
"""

import json
import subprocess
import sys
import time

import pytest

from conftest import free_port, record
from twopc_math import verify as vf

ULP_TITLE = "exhaustive ULP bounds"


@pytest.mark.slow
@pytest.mark.parametrize("fn", vf.FUNCS)
def test_criterion_1_ulp(fn):
    rep = vf.verify_ulp([fn])
    worst = max(r["max_ulp"] for r in rep.rows)
    bad = [(r["params"]["s"], r["params"]["s_out"]) for r in rep.failures]
    detail = f"{fn} max {worst} ULP (bound {vf.ULP_BOUNDS[fn]}) over {len(rep.rows)} pairs"
    if bad:
        detail += f", over bound at {bad}"
    record(1, ULP_TITLE, rep.ok, detail)
    assert not bad, detail


@pytest.mark.slow
def test_criterion_2_secure_identity():
    rows = []
    for fn in vf.FUNCS:
        pair = vf.EXHAUSTIVE_PAIR[fn]
        rows += vf.equiv_math([fn], [pair], count=None, seed="acc").rows
        others = [p for p in vf.grid(fn) if p != pair]
        rows += vf.equiv_math([fn], others, count=1000, seed="acc").rows
    bad = [r for r in rows if not r["ok"]]
    exhaustive = sum(r["cases"] for r in rows if "exhaustive" in r["source"])
    random = sum(r["cases"] for r in rows if "random" in r["source"])
    detail = f"{exhaustive} exhaustive + {random} random inputs over {len(rows)} (fn, pair) runs, {sum(r['mismatches'] for r in rows)} mismatches"
    record(2, "secure equals cleartext", not bad, detail)
    assert not bad, bad[:3]


@pytest.mark.slow
def test_criterion_3_blocks_exhaustive():
    rep = vf.equiv_blocks(8, seed="acc", mult_bits=6)
    names = sorted({r["name"] for r in rep.rows})
    cases = sum(r.get("cases", 0) for r in rep.rows)
    detail = f"{len(rep.rows)} suites, {cases} cases, {len(rep.failures)} failing ({', '.join(names)})"
    record(3, "block oracle equivalence", rep.ok, detail)
    assert rep.ok, rep.failures[:3]


def test_criterion_4_wrap_decomposition():
    counts = {l: vf.lemma_violations(l) for l in range(1, 9)}
    total = sum(counts.values())
    record(4, "wrap decomposition", total == 0, f"{total} violations over all splits and cut points, l = 1..8")
    assert total == 0, counts


@pytest.mark.slow
def test_criterion_5_audit():
    rep = vf.audit(trials=100, seed="acc")
    by_suite = {}
    for r in rep.rows:
        by_suite.setdefault(r["suite"], []).append(r)
    worst = max(r["ratio"] for r in rep.rows if "ratio" in r)
    kbs = ", ".join(f"{r['name']} {r['kb_per_instance']} KB" + (f" (<= {r['kb_budget']})" if r.get("kb_budget") else "") for r in by_suite["math"])
    detail = (
        f"{len(rep.rows) - len(rep.failures)}/{len(rep.rows)} rows ok; "
        f"worst block/table ratio {worst:.3f} (limit {vf.RATIO_LIMIT}); {kbs}; input-independent over 100 inputs"
    )
    record(5, "communication audit", rep.ok, detail)
    assert rep.ok, rep.failures


def test_criterion_6_tcp_smoke(tmp_path):
    port = str(free_port())
    common = ["bench", "--fn", "sigmoid", "--instances", "10000", "--transport", "tcp", "--port", port, "--report", "json"]
    t0 = time.perf_counter()
    p0 = subprocess.Popen([sys.executable, "-m", "twopc_math.cli", *common, "--role", "p0"], stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True)
    p1 = subprocess.Popen([sys.executable, "-m", "twopc_math.cli", *common, "--role", "p1"], stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True)
    out0, err0 = p0.communicate(timeout=120)
    out1, err1 = p1.communicate(timeout=120)
    wall = time.perf_counter() - t0
    ok = p0.returncode == 0 and p1.returncode == 0
    row = json.loads(out0)["rows"][0] if ok else {}
    ok = ok and row.get("mismatches") == 0 and wall < 60
    detail = f"10^4 sigmoids over TCP loopback in {wall:.1f} s (limit 60 s)"
    if row:
        detail += f", {row.get('kb_per_instance')} KB/instance, {row.get('mismatches')} mismatches"
    record(6, "TCP smoke benchmark", ok, detail)
    assert ok, (err0, err1)
