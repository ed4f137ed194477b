"""Two-party duplex channels, framing, cost metering and sessions.

Wire frame: ``<u32 payload_len><u16 label_id><u32 round_stamp>`` followed by
the payload.  Protocol payloads are arrays of fixed-width words, bit-packed
on TCP.  Framing bytes never reach the meter.

Round counting uses the stamps: a party starts a new flight whenever it sends
after having received something (or for its very first send), and adopts the
largest stamp it has seen.  Two parties sending at the same time therefore
share a round, while request/response pairs cost two.
"""

from __future__ import annotations

import contextlib
import hashlib
import os
import queue
import socket
import struct
import threading
import time
import zlib
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

MAGIC = b"2PCM"
VERSION = 1
DEFAULT_LAMBDA = 128

_FRAME = struct.Struct("<IHI")
_HELLO = struct.Struct("<4sHHB32s32s")
_RAW_LABEL = 0xFFFF


class TransportError(RuntimeError):
    """The peer went away or the byte stream is malformed."""


class NegotiationError(TransportError):
    """The two parties disagree on session parameters."""


class ProtocolDesync(TransportError):
    """A frame arrived under a different protocol label than expected."""


def label_id(label: str) -> int:
    return zlib.crc32(label.encode()) & 0xFFFF


# -- bit packing ---------------------------------------------------------

_PACK_CHUNK = 1 << 18


def pack_words(arr: np.ndarray, width: int) -> bytes:
    """Concatenate the low ``width`` bits of every word, little-endian, LSB first."""
    arr = np.ascontiguousarray(arr, dtype="<u8").ravel()
    if width % 8 == 0:
        return arr.view(np.uint8).reshape(-1, 8)[:, : width // 8].tobytes()
    bits = []
    for i in range(0, len(arr), _PACK_CHUNK):
        chunk = arr[i : i + _PACK_CHUNK].view(np.uint8).reshape(-1, 8)
        bits.append(np.unpackbits(chunk, axis=1, bitorder="little")[:, :width].ravel())
    if not bits:
        return b""
    return np.packbits(np.concatenate(bits), bitorder="little").tobytes()


def unpack_words(buf: bytes, count: int, width: int) -> np.ndarray:
    if len(buf) != packed_len(count, width):
        raise TransportError(f"payload of {len(buf)} bytes, expected {packed_len(count, width)}")
    raw = np.frombuffer(buf, dtype=np.uint8)
    if width % 8 == 0:
        out = np.zeros((count, 8), dtype=np.uint8)
        out[:, : width // 8] = raw.reshape(count, width // 8)
        return out.view("<u8").ravel().astype(np.uint64)
    bits = np.unpackbits(raw, bitorder="little")[: count * width].reshape(count, width)
    full = np.zeros((count, 64), dtype=np.uint8)
    full[:, :width] = bits
    return np.packbits(full, axis=1, bitorder="little").view("<u8").ravel().astype(np.uint64)


def packed_len(count: int, width: int) -> int:
    return (count * width + 7) // 8


# -- channels ------------------------------------------------------------


class Channel:
    """One endpoint of an ordered, exactly-once duplex message pipe."""

    timeout: float = 120.0

    def send_words(self, lid: int, stamp: int, arr: np.ndarray, width: int) -> None:
        raise NotImplementedError

    def recv_words(self, count: int, width: int) -> Tuple[int, int, np.ndarray]:
        raise NotImplementedError

    def send_raw(self, data: bytes) -> None:
        raise NotImplementedError

    def recv_raw(self) -> bytes:
        raise NotImplementedError

    def close(self) -> None:
        pass


_CLOSED = object()


class InprocChannel(Channel):
    """Queue-backed endpoint; payloads travel as array copies."""

    def __init__(self, inbox: "queue.Queue", outbox: "queue.Queue") -> None:
        self._in = inbox
        self._out = outbox
        self._closed = False

    @classmethod
    def pair(cls) -> Tuple["InprocChannel", "InprocChannel"]:
        a, b = queue.Queue(), queue.Queue()
        return cls(a, b), cls(b, a)

    def _put(self, item) -> None:
        if self._closed:
            raise TransportError("channel closed")
        self._out.put(item)

    def _get(self):
        try:
            item = self._in.get(timeout=self.timeout)
        except queue.Empty:
            raise TransportError("timed out waiting for peer") from None
        if item is _CLOSED:
            self._in.put(_CLOSED)
            raise TransportError("peer closed the channel")
        return item

    def send_words(self, lid, stamp, arr, width):
        self._put(("w", lid, stamp, np.array(arr, dtype=np.uint64, copy=True).ravel(), width))

    def recv_words(self, count, width):
        item = self._get()
        if item[0] != "w":
            raise TransportError("expected a protocol frame")
        _, lid, stamp, arr, w = item
        if w != width or arr.size != count:
            raise TransportError(f"got {arr.size} x {w}-bit words, expected {count} x {width}")
        return lid, stamp, arr

    def send_raw(self, data):
        self._put(("r", bytes(data)))

    def recv_raw(self):
        item = self._get()
        if item[0] != "r":
            raise TransportError("expected a handshake frame")
        return item[1]

    def close(self):
        if not self._closed:
            self._closed = True
            self._out.put(_CLOSED)


class TcpChannel(Channel):
    """Length-prefixed frames over a socket, drained by a reader thread."""

    def __init__(self, sock: socket.socket) -> None:
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._sock = sock
        self._frames: "queue.Queue" = queue.Queue()
        self._lock = threading.Lock()
        self._closed = False
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

    @classmethod
    def connect(cls, host: str, port: int, retry_for: float = 10.0) -> "TcpChannel":
        deadline = time.monotonic() + retry_for
        while True:
            try:
                return cls(socket.create_connection((host, port), timeout=5))
            except OSError as exc:
                if time.monotonic() > deadline:
                    raise TransportError(f"cannot reach {host}:{port}: {exc}") from exc
                time.sleep(0.05)

    @classmethod
    def listen(cls, host: str, port: int, accept_for: float = 60.0) -> "TcpChannel":
        with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as srv:
            srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
            try:
                srv.bind((host, port))
            except OSError as exc:
                raise TransportError(f"cannot bind {host}:{port}: {exc}") from exc
            srv.listen(1)
            srv.settimeout(accept_for)
            try:
                conn, _ = srv.accept()
            except socket.timeout:
                raise TransportError("no peer connected") from None
        conn.settimeout(None)
        return cls(conn)

    def _read_exact(self, n: int) -> Optional[bytes]:
        buf = bytearray()
        while len(buf) < n:
            chunk = self._sock.recv(min(n - len(buf), 1 << 20))
            if not chunk:
                return None
            buf += chunk
        return bytes(buf)

    def _read_loop(self) -> None:
        try:
            while True:
                head = self._read_exact(_FRAME.size)
                if head is None:
                    break
                n, lid, stamp = _FRAME.unpack(head)
                body = self._read_exact(n)
                if body is None:
                    break
                self._frames.put((lid, stamp, body))
        except OSError:
            pass
        self._frames.put(_CLOSED)

    def _write(self, lid: int, stamp: int, body: bytes) -> None:
        if self._closed:
            raise TransportError("channel closed")
        try:
            with self._lock:
                self._sock.sendall(_FRAME.pack(len(body), lid, stamp) + body)
        except OSError as exc:
            raise TransportError(f"send failed: {exc}") from exc

    def _next(self):
        try:
            item = self._frames.get(timeout=self.timeout)
        except queue.Empty:
            raise TransportError("timed out waiting for peer") from None
        if item is _CLOSED:
            self._frames.put(_CLOSED)
            raise TransportError("peer closed the connection")
        return item

    def send_words(self, lid, stamp, arr, width):
        self._write(lid, stamp, pack_words(arr, width))

    def recv_words(self, count, width):
        lid, stamp, body = self._next()
        return lid, stamp, unpack_words(body, count, width)

    def send_raw(self, data):
        self._write(_RAW_LABEL, 0, bytes(data))

    def recv_raw(self):
        lid, _, body = self._next()
        if lid != _RAW_LABEL:
            raise TransportError("expected a handshake frame")
        return body

    def close(self):
        if self._closed:
            return
        self._closed = True
        with contextlib.suppress(OSError):
            self._sock.shutdown(socket.SHUT_RDWR)
        self._sock.close()


# -- metering ------------------------------------------------------------


@dataclass
class LabelStats:
    bits_sent: int = 0
    bits_received: int = 0
    rounds: int = 0
    calls: int = 0


@dataclass
class CostMeter:
    """Payload bits and rounds seen by one party, with a per-label breakdown.

    A label's bits include everything sent while it was anywhere on the scope
    stack, so nested protocols roll up into their callers.
    """

    bits_sent: int = 0
    bits_received: int = 0
    rounds: int = 0
    labels: Dict[str, LabelStats] = field(default_factory=lambda: defaultdict(LabelStats))

    def label(self, name: str) -> LabelStats:
        return self.labels[name]

    def snapshot(self) -> dict:
        return {
            "bits_sent": self.bits_sent,
            "bits_received": self.bits_received,
            "rounds": self.rounds,
            "labels": {k: vars(v).copy() for k, v in self.labels.items()},
        }


# -- PRG -----------------------------------------------------------------


class Prg:
    """Deterministic stream of uniformly random words."""

    def __init__(self, seed: bytes) -> None:
        self._gen = np.random.Generator(np.random.PCG64(int.from_bytes(seed[:32], "little")))

    def words(self, shape, width: int) -> np.ndarray:
        n = int(np.prod(shape, dtype=np.int64)) if shape != () else 1
        raw = self._gen.bit_generator.random_raw(n).astype(np.uint64)
        if width < 64:
            raw &= np.uint64((1 << width) - 1)
        return raw.reshape(shape)

    def bits(self, shape) -> np.ndarray:
        return self.words(shape, 1)


# -- session -------------------------------------------------------------


def derive_seed(base, party: int) -> bytes:
    return hashlib.sha256(f"{base}:{party}".encode()).digest()


class Session:
    """One party's end of a two-party protocol run."""

    def __init__(self, party: int, channel: Channel, shared_seed: bytes, own_seed: bytes, lam: int) -> None:
        if party not in (0, 1):
            raise ValueError("party must be 0 or 1")
        self.party = party
        self.channel = channel
        self.lam = lam
        self.meter = CostMeter()
        self.shared = Prg(shared_seed)
        self.private = Prg(hashlib.sha256(b"own" + own_seed).digest())
        self._stack: List[str] = []
        self._clock = 0
        self._new_flight = True

    # labels and rounds

    @contextlib.contextmanager
    def scope(self, label: str):
        self._stack.append(label)
        start = self._clock
        st = self.meter.labels[label]
        st.calls += 1
        try:
            yield st
        finally:
            self._stack.pop()
            st.rounds += self._clock - start

    @property
    def current_label(self) -> str:
        return self._stack[-1] if self._stack else ""

    @property
    def clock(self) -> int:
        return self._clock

    def _account(self, bits: int, sent: bool) -> None:
        m = self.meter
        if sent:
            m.bits_sent += bits
        else:
            m.bits_received += bits
        for lab in set(self._stack):
            st = m.labels[lab]
            if sent:
                st.bits_sent += bits
            else:
                st.bits_received += bits

    # payload traffic

    def send(self, arr, width: int, metered: bool = True) -> None:
        arr = np.asarray(arr, dtype=np.uint64)
        if self._new_flight:
            self._clock += 1
            self._new_flight = False
            self.meter.rounds = self._clock
        self.channel.send_words(label_id(self.current_label), self._clock, arr.ravel(), width)
        if metered:
            self._account(arr.size * width, True)

    def recv(self, shape, width: int, metered: bool = True) -> np.ndarray:
        shape = tuple(np.atleast_1d(shape)) if not isinstance(shape, tuple) else shape
        count = int(np.prod(shape, dtype=np.int64))
        lid, stamp, arr = self.channel.recv_words(count, width)
        expect = label_id(self.current_label)
        if lid != expect:
            raise ProtocolDesync(f"frame label {lid:#06x}, expected {expect:#06x} ({self.current_label!r})")
        if stamp > self._clock:
            self._clock = stamp
            self.meter.rounds = self._clock
        self._new_flight = True
        if metered:
            self._account(count * width, False)
        return arr.reshape(shape)

    def exchange(self, arr, width: int, metered: bool = True) -> np.ndarray:
        """Both parties send an equally shaped array at once and get the other's."""
        arr = np.asarray(arr, dtype=np.uint64)
        self.send(arr, width, metered)
        return self.recv(arr.shape, width, metered)

    def send_filler(self, count: int, bits_each: int) -> None:
        """Send ``count * bits_each`` bits of mask material (the OT extension's share)."""
        q, r = divmod(bits_each, 64)
        if q:
            self.send(self.private.words((count * q,), 64), 64)
        if r:
            self.send(self.private.words((count,), r), r)

    def recv_filler(self, count: int, bits_each: int) -> None:
        q, r = divmod(bits_each, 64)
        if q:
            self.recv((count * q,), 64)
        if r:
            self.recv((count,), r)

    def close(self) -> None:
        self.channel.close()


def _hello(party: int, lam: int, params: bytes, commit: bytes) -> bytes:
    return _HELLO.pack(MAGIC, VERSION, lam, party, hashlib.sha256(params).digest(), commit)


def open_session(
    party: int,
    channel: Channel,
    seed: Optional[bytes] = None,
    lam: int = DEFAULT_LAMBDA,
    params: bytes = b"",
) -> Session:
    """Handshake over ``channel`` and return a ready session.

    Both sides exchange magic, version, lambda, a digest of the parameter
    header and a commitment to their seed, then open the seeds.  The shared
    PRG seed is H(seed_0 || seed_1).
    """
    if not 1 <= lam < 1 << 16:
        raise NegotiationError(f"unsupported lambda {lam}")
    seed = os.urandom(32) if seed is None else hashlib.sha256(seed).digest()
    commit = hashlib.sha256(seed).digest()
    channel.send_raw(_hello(party, lam, params, commit))
    peer = channel.recv_raw()
    if len(peer) != _HELLO.size:
        raise NegotiationError("malformed hello")
    magic, version, plam, pparty, pparams, pcommit = _HELLO.unpack(peer)
    problems = []
    if magic != MAGIC:
        problems.append("magic")
    if version != VERSION:
        problems.append(f"version {version} != {VERSION}")
    if plam != lam:
        problems.append(f"lambda {plam} != {lam}")
    if pparty == party:
        problems.append(f"both parties claim role {party}")
    if pparams != hashlib.sha256(params).digest():
        problems.append("parameter header")
    if problems:
        channel.close()
        raise NegotiationError("handshake mismatch: " + ", ".join(problems))
    channel.send_raw(seed)
    peer_seed = channel.recv_raw()
    if hashlib.sha256(peer_seed).digest() != pcommit:
        channel.close()
        raise NegotiationError("peer seed does not match its commitment")
    s0, s1 = (seed, peer_seed) if party == 0 else (peer_seed, seed)
    return Session(party, channel, hashlib.sha256(s0 + s1).digest(), seed, lam)


def inproc_pair(seed=None, lam: int = DEFAULT_LAMBDA, params: bytes = b"") -> Tuple[Session, Session]:
    """Two connected sessions in this process (the handshake runs on threads)."""
    c0, c1 = InprocChannel.pair()
    seeds = [None, None] if seed is None else [derive_seed(seed, 0), derive_seed(seed, 1)]
    out = run_threads(
        lambda: open_session(0, c0, seeds[0], lam, params),
        lambda: open_session(1, c1, seeds[1], lam, params),
    )
    return out[0], out[1]


def run_threads(f0: Callable, f1: Callable) -> Tuple:
    """Run two callables concurrently and return both results; re-raise the first error."""
    results: List = [None, None]
    errors: List = [None, None]

    def body(i, f):
        try:
            results[i] = f()
        except BaseException as exc:  # noqa: BLE001 - re-raised below
            errors[i] = exc

    threads = [threading.Thread(target=body, args=(i, f), daemon=True) for i, f in enumerate((f0, f1))]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    first = [e for e in errors if e is not None and not isinstance(e, TransportError)]
    first = first or [e for e in errors if e is not None]
    if first:
        raise first[0]
    return results[0], results[1]


def run_pair(fn: Callable, sessions: Tuple[Session, Session], args0=(), args1=()) -> Tuple:
    """fn(session, *args_b) on both parties concurrently.

    If one side raises, its channel is closed so the other side unblocks.
    """

    def wrap(sess, args):
        def go():
            try:
                return fn(sess, *args)
            except BaseException:
                sess.channel.close()
                raise

        return go

    return run_threads(wrap(sessions[0], args0), wrap(sessions[1], args1))
