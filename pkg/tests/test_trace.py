"""Version-1 trace format: round trips and strict validation."""

import io
import ipaddress
import json

import pytest
from hypothesis import given, strategies as st

from funcmac.monitor import Event
from funcmac.policy import AccessPriv, Proto
from funcmac.stack import canonical_hash, stack_of
from funcmac.trace import (
    TraceFormatError,
    event_to_json,
    parse_trace,
    write_trace,
)

HEADER = '{"version": 1, "symlinks": {}, "initial_pid": 1}'


def parse_lines(*lines: str):
    return parse_trace("\n".join(lines) + "\n")


class TestParse:
    def test_minimal_trace(self):
        trace = parse_lines(HEADER, '{"seq": 1, "pid": 1, "kind": "runtime_register"}')
        assert trace.initial_pid == 1
        assert len(trace.events) == 1

    def test_open_event_fields(self):
        trace = parse_lines(
            HEADER,
            json.dumps(
                {
                    "seq": 1,
                    "pid": 1,
                    "kind": "open",
                    "path": "/a",
                    "priv": "w",
                    "stack": ["m.f", "m.main"],
                    "recv_hash": canonical_hash(stack_of("m.f", "m.main")).hex(),
                }
            ),
        )
        ev = trace.events[0]
        assert ev.priv is AccessPriv.READ_WRITE
        assert ev.stack == stack_of("m.f", "m.main")
        assert ev.recv_hash == canonical_hash(ev.stack)

    def test_symlinks_header(self):
        trace = parse_lines(
            '{"version": 1, "symlinks": {"/tmp/l": "/app/k"}, "initial_pid": 3}',
            '{"seq": 1, "pid": 3, "kind": "runtime_register"}',
        )
        assert trace.fs_model().symlinks == {"/tmp/l": "/app/k"}

    @pytest.mark.parametrize(
        "line, message_part",
        [
            ('{"version": 2, "symlinks": {}, "initial_pid": 1}', "version"),
            ('{"version": 1, "initial_pid": 1, "extra": 1}', "unknown header"),
            ('{"version": 1, "symlinks": {"rel": "/x"}, "initial_pid": 1}', "symlinks"),
            ('{"version": 1, "symlinks": {}, "initial_pid": 0}', "initial_pid"),
        ],
    )
    def test_bad_headers(self, line, message_part):
        with pytest.raises(TraceFormatError) as info:
            parse_lines(line, '{"seq": 1, "pid": 1, "kind": "runtime_register"}')
        assert message_part in str(info.value)

    @pytest.mark.parametrize(
        "event",
        [
            {"seq": 1, "pid": 1, "kind": "teleport"},
            {"seq": 1, "pid": 1, "kind": "open", "path": "rel", "priv": "r"},
            {"seq": 1, "pid": 1, "kind": "open", "path": "/a", "priv": "x"},
            {"seq": 1, "pid": 1, "kind": "open", "path": "/a"},
            {"seq": 1, "pid": 1, "kind": "connect", "proto": "tcp", "dest": "::1"},
            {"seq": 1, "pid": 1, "kind": "connect", "proto": "tcp", "dest": "example.com"},
            {"seq": 1, "pid": 1, "kind": "connect", "proto": "icmp", "dest": "1.2.3.4"},
            {"seq": 1, "pid": 1, "kind": "connect", "proto": "unix", "dest": "1.2.3.4"},
            {"seq": 1, "pid": 1, "kind": "fork"},
            {"seq": 1, "pid": 0, "kind": "exec", "path": "/bin/sh"},
            {"seq": 1, "pid": 1, "kind": "exec", "path": "/bin/sh", "bogus": 1},
            {"seq": 1, "pid": 1, "kind": "open", "path": "/a", "priv": "r", "stack": []},
            {"seq": 1, "pid": 1, "kind": "open", "path": "/a", "priv": "r", "stack": ["nodot"]},
            {"seq": 1, "pid": 1, "kind": "open", "path": "/a", "priv": "r", "recv_hash": "zz"},
            {"seq": 1, "pid": 1, "kind": "open", "path": "/a", "priv": "r",
             "recv_hash": "A" * 64},
        ],
    )
    def test_bad_events_rejected_with_line(self, event):
        with pytest.raises(TraceFormatError) as info:
            parse_lines(HEADER, json.dumps(event))
        assert info.value.line == 2

    def test_seq_must_strictly_increase(self):
        with pytest.raises(TraceFormatError) as info:
            parse_lines(
                HEADER,
                '{"seq": 1, "pid": 1, "kind": "runtime_register"}',
                '{"seq": 1, "pid": 1, "kind": "exec", "path": "/x"}',
            )
        assert info.value.line == 3

    def test_header_required(self):
        with pytest.raises(TraceFormatError):
            parse_trace("")

    def test_invalid_json_line_number(self):
        with pytest.raises(TraceFormatError) as info:
            parse_lines(HEADER, "{not json}")
        assert info.value.line == 2


events_st = st.one_of(
    st.builds(
        lambda seq, pid: Event(seq=seq, pid=pid, kind="runtime_register"),
        st.integers(1, 10**6),
        st.integers(1, 10**4),
    ),
    st.builds(
        lambda seq, pid, path, priv, stack, with_hash: Event(
            seq=seq,
            pid=pid,
            kind="open",
            path="/" + path,
            priv=priv,
            stack=stack_of(*stack) if stack else None,
            recv_hash=canonical_hash(stack_of(*stack)) if stack and with_hash else None,
        ),
        st.integers(1, 10**6),
        st.integers(1, 10**4),
        st.text("abcdef/", min_size=1, max_size=8).map(lambda s: s.strip("/") or "x"),
        st.sampled_from([AccessPriv.READ, AccessPriv.READ_WRITE]),
        st.lists(st.sampled_from(["m.a", "m.b"]), max_size=3),
        st.booleans(),
    ),
    st.builds(
        lambda seq, pid, kind, addr, proto: Event(
            seq=seq, pid=pid, kind=kind, proto=proto, dest=ipaddress.IPv4Address(addr)
        ),
        st.integers(1, 10**6),
        st.integers(1, 10**4),
        st.sampled_from(["connect", "bind"]),
        st.integers(0, 2**32 - 1),
        st.sampled_from([Proto.TCP, Proto.UDP, Proto.RAW]),
    ),
    st.builds(
        lambda seq, pid, child: Event(seq=seq, pid=pid, kind="fork", child_pid=child),
        st.integers(1, 10**6),
        st.integers(1, 10**4),
        st.integers(1, 10**4),
    ),
)


class TestRoundTrip:
    @given(st.lists(events_st, max_size=15))
    def test_write_parse_round_trip(self, events):
        for i, ev in enumerate(events):
            ev.seq = i + 1
        buf = io.StringIO()
        write_trace(buf, events, symlinks={"/tmp/a": "/b"}, initial_pid=7)
        trace = parse_trace(buf.getvalue())
        assert trace.initial_pid == 7
        assert trace.symlinks == {"/tmp/a": "/b"}
        assert [event_to_json(e) for e in trace.events] == [event_to_json(e) for e in events]

    def test_hashes_rendered_lowercase_hex(self):
        stack = stack_of("m.f")
        obj = event_to_json(
            Event(seq=1, pid=1, kind="open", path="/a", priv=AccessPriv.READ,
                  stack=stack, recv_hash=canonical_hash(stack))
        )
        assert obj["recv_hash"] == canonical_hash(stack).hex()
        assert obj["recv_hash"] == obj["recv_hash"].lower()
