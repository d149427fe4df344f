"""Version-1 trace file format: line-delimited JSON, header first.

The first line is a header object {"version": 1, "symlinks": {...},
"initial_pid": N}; every following line is one event object with strictly
increasing "seq". The format is documented bit-exactly in
docs/trace-format.md; validation here is strict so that a malformed trace
fails loudly with its line number instead of skewing a replay.
"""

from __future__ import annotations

import ipaddress
import json
from dataclasses import dataclass
from typing import Iterable, TextIO

from .monitor import EVENT_KINDS, Event, FsModel
from .policy import EVENT_PROTOS, AccessPriv
from .stack import stack_of

TRACE_VERSION = 1


class TraceFormatError(Exception):
    """Malformed trace content; ``line`` is 1-based."""

    def __init__(self, message: str, line: int = 0):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


@dataclass
class TraceFile:
    version: int
    symlinks: dict[str, str]
    initial_pid: int
    events: list[Event]

    def fs_model(self) -> FsModel:
        return FsModel(dict(self.symlinks))


_EVENT_FIELDS = {
    "seq", "pid", "kind", "path", "priv", "proto", "dest", "child_pid", "stack", "recv_hash",
}
_PROTO_BY_NAME = {p.value: p for p in EVENT_PROTOS}


def _fail(message: str, line: int) -> None:
    raise TraceFormatError(message, line)


def _parse_header(obj: object, line: int) -> tuple[dict[str, str], int]:
    if not isinstance(obj, dict):
        _fail("header must be a JSON object", line)
    if obj.get("version") != TRACE_VERSION:
        _fail(f"unsupported trace version {obj.get('version')!r}", line)
    symlinks = obj.get("symlinks", {})
    if not isinstance(symlinks, dict) or not all(
        isinstance(k, str) and isinstance(v, str) and k.startswith("/") and v != ""
        for k, v in symlinks.items()
    ):
        _fail("symlinks must map absolute paths to paths", line)
    initial_pid = obj.get("initial_pid")
    if not isinstance(initial_pid, int) or initial_pid <= 0:
        _fail("initial_pid must be a positive integer", line)
    extra = set(obj) - {"version", "symlinks", "initial_pid"}
    if extra:
        _fail(f"unknown header fields: {sorted(extra)}", line)
    return symlinks, initial_pid


def _parse_event(obj: object, line: int) -> Event:
    if not isinstance(obj, dict):
        _fail("event must be a JSON object", line)
    extra = set(obj) - _EVENT_FIELDS
    if extra:
        _fail(f"unknown event fields: {sorted(extra)}", line)
    seq = obj.get("seq")
    pid = obj.get("pid")
    kind = obj.get("kind")
    if not isinstance(seq, int):
        _fail("seq must be an integer", line)
    if not isinstance(pid, int) or pid <= 0:
        _fail("pid must be a positive integer", line)
    if kind not in EVENT_KINDS:
        _fail(f"unknown event kind {kind!r}", line)

    path = obj.get("path")
    priv = None
    proto = None
    dest = None
    child_pid = obj.get("child_pid")
    stack = None
    recv_hash = None

    if kind in ("open", "exec"):
        if not isinstance(path, str) or not path.startswith("/"):
            _fail(f"{kind} needs an absolute path", line)
    if kind == "open":
        raw_priv = obj.get("priv")
        if raw_priv not in ("r", "w"):
            _fail("open needs priv \"r\" or \"w\"", line)
        priv = AccessPriv.from_letter(raw_priv)
    if kind in ("connect", "bind"):
        raw_proto = obj.get("proto")
        if raw_proto not in _PROTO_BY_NAME:
            _fail(f"{kind} needs proto tcp, udp or raw", line)
        proto = _PROTO_BY_NAME[raw_proto]
        raw_dest = obj.get("dest")
        if not isinstance(raw_dest, str):
            _fail(f"{kind} needs an IPv4 destination", line)
        try:
            dest = ipaddress.IPv4Address(raw_dest)
        except (ipaddress.AddressValueError, ValueError):
            _fail(f"destination must be a concrete IPv4 address: {raw_dest!r}", line)
    if kind == "fork":
        if not isinstance(child_pid, int) or child_pid <= 0:
            _fail("fork needs a positive child_pid", line)

    raw_stack = obj.get("stack")
    if raw_stack is not None:
        if not isinstance(raw_stack, list) or not all(isinstance(f, str) for f in raw_stack):
            _fail("stack must be a list of qualified names", line)
        if not raw_stack:
            _fail("stack, when present, must be non-empty", line)
        try:
            stack = stack_of(*raw_stack)
        except ValueError as exc:
            _fail(str(exc), line)
    raw_hash = obj.get("recv_hash")
    if raw_hash is not None:
        if not isinstance(raw_hash, str) or len(raw_hash) != 64:
            _fail("recv_hash must be 64 hex characters", line)
        try:
            recv_hash = bytes.fromhex(raw_hash)
        except ValueError:
            _fail("recv_hash must be lowercase hex", line)
        if raw_hash != raw_hash.lower():
            _fail("recv_hash must be lowercase hex", line)

    return Event(
        seq=seq,
        pid=pid,
        kind=kind,
        path=path if isinstance(path, str) else None,
        priv=priv,
        proto=proto,
        dest=dest,
        child_pid=child_pid if isinstance(child_pid, int) else None,
        stack=stack,
        recv_hash=recv_hash,
    )


def parse_trace(text: str) -> TraceFile:
    """Parse and validate a whole trace; raises TraceFormatError."""
    symlinks: dict[str, str] | None = None
    initial_pid = 0
    events: list[Event] = []
    last_seq: int | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise TraceFormatError(f"invalid JSON: {exc.msg}", lineno) from None
        if symlinks is None:
            symlinks, initial_pid = _parse_header(obj, lineno)
            continue
        event = _parse_event(obj, lineno)
        if last_seq is not None and event.seq <= last_seq:
            _fail(f"seq {event.seq} not strictly increasing", lineno)
        last_seq = event.seq
        events.append(event)
    if symlinks is None:
        raise TraceFormatError("empty trace: missing header")
    return TraceFile(TRACE_VERSION, symlinks, initial_pid, events)


def load_trace(path: str) -> TraceFile:
    with open(path, encoding="utf-8") as fh:
        return parse_trace(fh.read())


def event_to_json(ev: Event) -> dict:
    obj: dict = {"seq": ev.seq, "pid": ev.pid, "kind": ev.kind}
    if ev.path is not None:
        obj["path"] = ev.path
    if ev.priv is not None:
        obj["priv"] = ev.priv.letter
    if ev.proto is not None:
        obj["proto"] = ev.proto.value
    if ev.dest is not None:
        obj["dest"] = str(ev.dest)
    if ev.child_pid is not None:
        obj["child_pid"] = ev.child_pid
    if ev.stack is not None:
        obj["stack"] = list(ev.stack)
    if ev.recv_hash is not None:
        obj["recv_hash"] = ev.recv_hash.hex()
    return obj


def write_trace(
    out: TextIO,
    events: Iterable[Event],
    symlinks: dict[str, str] | None = None,
    initial_pid: int = 1,
) -> None:
    header = {"version": TRACE_VERSION, "symlinks": symlinks or {}, "initial_pid": initial_pid}
    out.write(json.dumps(header, sort_keys=True) + "\n")
    for ev in events:
        out.write(json.dumps(event_to_json(ev), sort_keys=True) + "\n")


def dump_trace(path: str, events: Iterable[Event], **kwargs) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        write_trace(fh, events, **kwargs)
