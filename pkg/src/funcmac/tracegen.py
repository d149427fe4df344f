"""Seeded random trace generation for differential fast-path testing.

The generator pairs a fixed policy with a random event stream built so the
fast-path instrumentation bounds are checkable:

- allowed requests draw from small per-resource pools of granting stacks
  (below the hash-log capacity, so nothing is ever evicted) and always
  carry the preemptive stack hash, guaranteeing repeats hit the fast path;
- function-level denials use a unique innermost frame per event, so each
  contributes exactly one distinct (resource, priv, stack) triple;
- process-level denials and default-rule hits never reach inspection.

Everything is driven by one random.Random(seed), so a given seed always
produces byte-identical traces.
"""

from __future__ import annotations

import ipaddress
import random

from .monitor import Event
from .policy import AccessPriv, Policy, Proto, parse_policy
from .stack import canonical_hash, stack_of

GENERATOR_POLICY = """\
# paired policy for generated traces
lib_a.read_cfg /data/cfg.ini r
lib_a.fetch /data/feed.bin r
lib_b.upload /data/img.jpg r
lib_b.upload network 10.0.0.0/8
lib_b.sync /data/out.log w
lib_b.sync network 10.0.0.0/8
default /etc/defaults.d/ r
"""

_DECORATIONS = ((), ("app.main",), ("util.helper",), ("util.helper", "app.main"))

_FILE_KEYS = (
    ("/data/cfg.ini", "r", ("lib_a.read_cfg",)),
    ("/data/feed.bin", "r", ("lib_a.fetch",)),
    ("/data/img.jpg", "r", ("lib_b.upload",)),
    ("/data/out.log", "w", ("lib_b.sync",)),
)

_NET_DESTS = ("10.1.1.1", "10.2.2.2", "10.3.3.3", "10.4.4.4")
_NET_INNER = ("lib_b.upload", "lib_b.sync")

_DEFAULT_FILES = ("/etc/defaults.d/app.conf", "/etc/defaults.d/net.conf")
_UNRULED_FILES = ("/secret/k1", "/secret/k2", "/secret/k3", "/secret/k4")


def generator_policy() -> Policy:
    return parse_policy(GENERATOR_POLICY, "<generator>")


def _stack_pools() -> dict[str, list[tuple[str, ...]]]:
    pools: dict[str, list[tuple[str, ...]]] = {}
    for path, _priv, inners in _FILE_KEYS:
        pools[path] = [(inner, *deco) for inner in inners for deco in _DECORATIONS]
    pools["net"] = [(inner, *deco) for inner in _NET_INNER for deco in _DECORATIONS]
    return pools


def random_events(seed: int, count: int, pid: int = 1) -> list[Event]:
    """Event stream with guaranteed (resource, stack) repeats; header excluded."""
    rng = random.Random(seed)
    pools = _stack_pools()
    events: list[Event] = [Event(seq=1, pid=pid, kind="runtime_register")]
    seq = 1
    denied_serial = 0
    while len(events) < count:
        seq += 1
        roll = rng.random()
        if roll < 0.62:  # repeatable allowed request
            if rng.random() < 0.75:
                path, priv, _ = rng.choice(_FILE_KEYS)
                stack = stack_of(*rng.choice(pools[path]))
                events.append(
                    Event(
                        seq=seq,
                        pid=pid,
                        kind="open",
                        path=path,
                        priv=AccessPriv.from_letter(priv),
                        stack=stack,
                        recv_hash=canonical_hash(stack),
                    )
                )
            else:
                stack = stack_of(*rng.choice(pools["net"]))
                events.append(
                    Event(
                        seq=seq,
                        pid=pid,
                        kind=rng.choice(("connect", "bind")),
                        proto=Proto.TCP,
                        dest=ipaddress.IPv4Address(rng.choice(_NET_DESTS)),
                        stack=stack,
                        recv_hash=canonical_hash(stack),
                    )
                )
        elif roll < 0.74:  # default-rule hit, stack never consulted
            stack = stack_of("app.main")
            events.append(
                Event(
                    seq=seq,
                    pid=pid,
                    kind="open",
                    path=rng.choice(_DEFAULT_FILES),
                    priv=AccessPriv.READ,
                    stack=stack,
                )
            )
        elif roll < 0.92:  # nothing covers the resource: process-level refusal
            events.append(
                Event(
                    seq=seq,
                    pid=pid,
                    kind="open",
                    path=rng.choice(_UNRULED_FILES),
                    priv=AccessPriv.READ,
                    stack=stack_of("adversary.probe", "app.main"),
                )
            )
        else:  # ruled resource, unauthorized one-shot stack: full inspection
            denied_serial += 1
            path, priv, _ = rng.choice(_FILE_KEYS)
            events.append(
                Event(
                    seq=seq,
                    pid=pid,
                    kind="open",
                    path=path,
                    priv=AccessPriv.from_letter(priv),
                    stack=stack_of(f"adv{denied_serial}.take", "app.main"),
                )
            )
    return events


def distinct_stacked_triples(events: list[Event]) -> int:
    """Count distinct (resource, priv, stack) triples among stack-carrying events."""
    triples = set()
    for ev in events:
        if ev.stack is None:
            continue
        if ev.kind == "open":
            triples.add((ev.path, ev.priv, ev.stack))
        elif ev.kind in ("connect", "bind"):
            triples.add(((str(ev.dest), ev.proto), AccessPriv.READ_WRITE, ev.stack))
    return len(triples)


def repeated_request_events(iterations: int, pid: int = 1) -> list[Event]:
    """The steady-state workload shape: the same few requests, many times over."""
    events: list[Event] = [Event(seq=1, pid=pid, kind="runtime_register")]
    seq = 1
    keys = [
        ("/data/cfg.ini", AccessPriv.READ, stack_of("lib_a.read_cfg", "app.main")),
        ("/data/img.jpg", AccessPriv.READ, stack_of("lib_b.upload", "app.main")),
        ("/data/out.log", AccessPriv.READ_WRITE, stack_of("lib_b.sync", "app.main")),
    ]
    for _ in range(iterations):
        for path, priv, stack in keys:
            seq += 1
            events.append(
                Event(
                    seq=seq,
                    pid=pid,
                    kind="open",
                    path=path,
                    priv=priv,
                    stack=stack,
                    recv_hash=canonical_hash(stack),
                )
            )
    return events
