import socket

import numpy as np
import pytest

from twopc_math import gadgets as gd
from twopc_math.verify import Pair

U64 = np.uint64


@pytest.fixture(scope="module")
def pair():
    pr = Pair(seed="tests")
    yield pr
    pr.close()


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def shares(rng, x, l):
    """Random additive sharing of x over 2^l."""
    return gd.split(rng, np.asarray(x, dtype=U64), l)


def bit_shares(rng, b):
    b = np.asarray(b, dtype=U64)
    r = rng.integers(0, 2, size=b.shape).astype(U64)
    return r, r ^ b


def free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


# acceptance criteria: parts recorded by test_acceptance, one summary line each
ACCEPTANCE = {}


def record(crit: int, title: str, ok: bool, detail: str) -> None:
    entry = ACCEPTANCE.setdefault(crit, {"title": title, "parts": []})
    entry["parts"].append((bool(ok), detail))
    print(f"criterion {crit} part: {'PASS' if ok else 'FAIL'} {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(ACCEPTANCE):
        e = ACCEPTANCE[crit]
        ok = all(p for p, _ in e["parts"])
        detail = "; ".join(d for _, d in e["parts"])
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {crit} ({e['title']}): {detail}")
