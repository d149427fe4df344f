"""Per-process enforcement state and the access-check pipeline.

The check order for a request is: application-wide default rules first,
then the stack-hash fast path (a bounded per-resource log of previously
authorized stack hashes), then a full stack inspection. A resource that no
rule covers at all is refused at process granularity without consulting
the stack. ACLs are immutable once loaded from a policy; only the hash
log mutates at run time, and only on a grant.
"""

from __future__ import annotations

import copy
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Callable

from .policy import (
    AccessPriv,
    AccessRequest,
    ConcreteResource,
    FunctionId,
    Policy,
    ResourcePattern,
)
from .stack import CallStack, StackHash, canonical_hash, entries_grant, inspect_stack

#: Authorized stack hashes retained per (resource, privilege) key.
HASH_LOG_CAPACITY = 16

ALLOW = "allow"
DENY = "deny"

PROCESS_DENIED = "process_denied"
FUNCTION_DENIED = "function_denied"
DESTINATION_NOT_WHITELISTED = "destination_not_whitelisted"
NO_PROVENANCE = "no_provenance"


class StackUnavailable(Exception):
    """Raised by a stack source that cannot produce the runtime stack."""


@dataclass
class Decision:
    """Verdict for one request; seq/pid are filled in by the monitor."""

    verdict: str
    reason: str | None = None
    fast_path: bool = False
    inspected: bool = False
    seq: int = -1
    pid: int = -1
    resource: str | None = None
    priv: str | None = None
    provenance: tuple[str, ...] | None = None
    would_deny: str | None = None
    request: AccessRequest | None = field(default=None, repr=False, compare=False)

    @property
    def allowed(self) -> bool:
        return self.verdict == ALLOW


class FunctionAcl:
    """Immutable map from function identity to its rule entries."""

    def __init__(self, entries: dict[FunctionId, list[tuple[ResourcePattern, AccessPriv]]]):
        self._entries = {fn: tuple(rules) for fn, rules in entries.items()}

    @classmethod
    def from_policy(cls, policy: Policy) -> "FunctionAcl":
        entries: dict[FunctionId, list[tuple[ResourcePattern, AccessPriv]]] = {}
        for rule in policy.rules:
            if rule.subject is not None:
                entries.setdefault(rule.subject, []).append((rule.resource, rule.privs))
        return cls(entries)

    def lookup(self, fn: FunctionId) -> tuple[tuple[ResourcePattern, AccessPriv], ...] | None:
        """Rule entries for a function, or None when the function is unruled."""
        return self._entries.get(fn)

    def functions(self) -> tuple[FunctionId, ...]:
        return tuple(self._entries)

    def all_entries(self) -> tuple[tuple[ResourcePattern, AccessPriv], ...]:
        return tuple(e for rules in self._entries.values() for e in rules)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, FunctionAcl) and self._entries == other._entries

    def __hash__(self):  # pragma: no cover - identity hashing unused
        return id(self)


class DefaultAcl:
    """Application-wide entries from default-subject rules."""

    def __init__(self, entries: list[tuple[ResourcePattern, AccessPriv]]):
        self._entries = tuple(entries)

    @classmethod
    def from_policy(cls, policy: Policy) -> "DefaultAcl":
        return cls([(r.resource, r.privs) for r in policy.rules if r.is_default])

    @property
    def entries(self) -> tuple[tuple[ResourcePattern, AccessPriv], ...]:
        return self._entries

    def __eq__(self, other: object) -> bool:
        return isinstance(other, DefaultAcl) and self._entries == other._entries

    def __hash__(self):  # pragma: no cover
        return id(self)


LogKey = tuple[ConcreteResource, AccessPriv]


class StackHashLog:
    """Bounded FIFO of authorized stack hashes per (resource, privilege) key.

    Holds at most HASH_LOG_CAPACITY distinct hashes per key; inserting into
    a full ring evicts the oldest entry. Only grants ever insert.
    """

    def __init__(self) -> None:
        self._per_key: dict[LogKey, OrderedDict[StackHash, None]] = {}

    def contains(self, key: LogKey, digest: StackHash) -> bool:
        ring = self._per_key.get(key)
        return ring is not None and digest in ring

    def record(self, key: LogKey, digest: StackHash) -> None:
        ring = self._per_key.setdefault(key, OrderedDict())
        if digest in ring:
            return
        if len(ring) >= HASH_LOG_CAPACITY:
            ring.popitem(last=False)
        ring[digest] = None

    def hashes(self, key: LogKey) -> tuple[StackHash, ...]:
        """Insertion-ordered ring contents for a key (oldest first)."""
        return tuple(self._per_key.get(key, ()))

    def ring_sizes(self) -> dict[LogKey, int]:
        return {k: len(v) for k, v in self._per_key.items()}

    def copy(self) -> "StackHashLog":
        clone = StackHashLog()
        clone._per_key = {k: OrderedDict(v) for k, v in self._per_key.items()}
        return clone

    def __eq__(self, other: object) -> bool:
        return isinstance(other, StackHashLog) and self._per_key == other._per_key


@dataclass
class ProcessAcl:
    """Enforcement state for one process."""

    pid: int
    function_acl: FunctionAcl
    default_acl: DefaultAcl
    hash_log: StackHashLog = field(default_factory=StackHashLog)

    @classmethod
    def from_policy(cls, pid: int, policy: Policy) -> "ProcessAcl":
        return cls(pid, FunctionAcl.from_policy(policy), DefaultAcl.from_policy(policy))

    def clone_for(self, child_pid: int) -> "ProcessAcl":
        """Fork-time propagation: child state structurally equals the parent's.

        ACLs are immutable and shared; the hash log is deep-copied so the
        two processes diverge independently afterward.
        """
        return ProcessAcl(child_pid, self.function_acl, self.default_acl, self.hash_log.copy())


@dataclass
class CheckStats:
    """Instrumentation counters for the fast-path / inspection trade-off."""

    inspections: int = 0
    fast_path_hits: int = 0


def is_default_access(req: AccessRequest, dacl: DefaultAcl) -> bool:
    """True when an application-wide rule covers the request."""
    return entries_grant(dacl.entries, req)


def process_grants(pacl: ProcessAcl, req: AccessRequest) -> bool:
    """Process-granularity check: does any rule at all cover the request?"""
    if is_default_access(req, pacl.default_acl):
        return True
    return entries_grant(pacl.function_acl.all_entries(), req)


def check_access(
    pacl: ProcessAcl,
    req: AccessRequest,
    recv_hash: StackHash | None,
    stack_source: Callable[[], CallStack],
    log_enabled: bool = True,
    stats: CheckStats | None = None,
) -> Decision:
    """Decide one request against a process's enforcement state.

    Pipeline: (1) a default-rule match allows without touching the stack;
    (2) a received hash found in the log for (resource, privilege) allows
    without touching the stack; (3) otherwise the stack is fetched and
    fully inspected, and a grant records its canonical hash. Requests no
    rule could ever cover are refused at process granularity before any
    stack fetch. Total over adversarial inputs: the only exception
    handled is the stack source's own failure, which becomes a refusal.
    """
    if is_default_access(req, pacl.default_acl):
        return Decision(ALLOW, request=req)
    if not process_grants(pacl, req):
        return Decision(DENY, PROCESS_DENIED, request=req)
    key: LogKey = (req.resource, req.priv)
    if log_enabled and recv_hash is not None and pacl.hash_log.contains(key, recv_hash):
        if stats is not None:
            stats.fast_path_hits += 1
        return Decision(ALLOW, fast_path=True, request=req)
    try:
        stack = stack_source()
    except StackUnavailable:
        return Decision(DENY, NO_PROVENANCE, request=req)
    if stats is not None:
        stats.inspections += 1
    granted = inspect_stack(stack, req, pacl.function_acl)
    if granted:
        if log_enabled:
            pacl.hash_log.record(key, canonical_hash(stack))
        return Decision(ALLOW, inspected=True, provenance=tuple(stack), request=req)
    return Decision(DENY, FUNCTION_DENIED, inspected=True, provenance=tuple(stack), request=req)
