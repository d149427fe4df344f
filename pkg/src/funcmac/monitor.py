"""Reference monitor: replays syscall-level events against a policy.

Consumes a stream of open/connect/bind/fork/exec events with attached
call stacks, canonicalizes file paths through a symlink model, and decides
each event through the per-process ACL engine. Forked children inherit
the parent's ACLs and a copy of its address-space model with stack-domain
write access revoked; children that are themselves monitored runtimes must
register to get function-granular checks, otherwise their events are
decided at process granularity only.

In complain mode every verdict is computed identically but denials are
recorded as would-deny and returned as allows; suggest_rules turns the
recorded would-denies into the policy additions a workload needs.
"""

from __future__ import annotations

import ipaddress
import os
import posixpath
from dataclasses import dataclass, field

from .acl import (
    ALLOW,
    DENY,
    DESTINATION_NOT_WHITELISTED,
    FUNCTION_DENIED,
    PROCESS_DENIED,
    CheckStats,
    Decision,
    FunctionAcl,
    ProcessAcl,
    StackUnavailable,
    check_access,
    process_grants,
)
from .memdom import AddressSpaceModel, BlockHandle
from .policy import (
    EVENT_PROTOS,
    AccessPriv,
    AccessRequest,
    FsPath,
    FunctionId,
    NetDest,
    NetProto,
    NetResource,
    Policy,
    Proto,
    Rule,
)
from .stack import CallStack, StackHash, entries_grant

ENFORCE = "enforce"
COMPLAIN = "complain"

MAX_SYMLINK_HOPS = 40

#: Modeled size of one runtime call-frame record in the stack domain.
FRAME_RECORD_BYTES = 256

OPEN = "open"
CONNECT = "connect"
BIND = "bind"
FORK = "fork"
EXEC = "exec"
RUNTIME_REGISTER = "runtime_register"

EVENT_KINDS = (OPEN, CONNECT, BIND, FORK, EXEC, RUNTIME_REGISTER)


class SymlinkLoopError(Exception):
    pass


class UnknownPidError(Exception):
    pass


class MalformedEventError(Exception):
    pass


@dataclass
class Event:
    """One intercepted operation from a trace."""

    seq: int
    pid: int
    kind: str
    path: str | None = None
    priv: AccessPriv | None = None
    proto: Proto | None = None
    dest: ipaddress.IPv4Address | None = None
    child_pid: int | None = None
    stack: CallStack | None = None
    recv_hash: StackHash | None = None


@dataclass
class FsModel:
    """Symlink map from a trace header, or the live filesystem."""

    symlinks: dict[str, str] = field(default_factory=dict)
    live: bool = False


def resolve_path(fs: FsModel, path: str) -> str:
    """Canonicalize a path: normalization plus symlink resolution.

    Resolution is component-wise against the model's symlink map (or the
    real filesystem in live mode); components with no mapping pass through
    unchanged. Chains longer than MAX_SYMLINK_HOPS raise SymlinkLoopError.
    """
    if not path.startswith("/"):
        raise ValueError(f"path must be absolute: {path!r}")
    if fs.live:
        return posixpath.normpath(os.path.realpath(path))
    hops = 0
    resolved: list[str] = []
    pending = path.split("/")
    while pending:
        comp = pending.pop(0)
        if comp in ("", "."):
            continue
        if comp == "..":
            if resolved:
                resolved.pop()
            continue
        candidate = "/" + "/".join(resolved + [comp])
        target = fs.symlinks.get(candidate)
        if target is None:
            resolved.append(comp)
            continue
        hops += 1
        if hops > MAX_SYMLINK_HOPS:
            raise SymlinkLoopError(f"symlink chain deeper than {MAX_SYMLINK_HOPS} at {candidate}")
        if target.startswith("/"):
            resolved = []
        pending = target.split("/") + pending
    return "/" + "/".join(resolved)


@dataclass
class ProcessState:
    acl: ProcessAcl
    space: AddressSpaceModel
    registered: bool = False
    frame_blocks: list[BlockHandle] = field(default_factory=list)
    frame_stack: tuple[str, ...] = ()  # outermost-first, mirrors frame_blocks


def _has_network_privs(acl: FunctionAcl, stack: CallStack | None) -> bool:
    """Do the involved functions hold any network privileges at all?"""
    if stack is not None:
        entry_sets = [acl.lookup(f) or () for f in stack]
    else:
        entry_sets = [acl.all_entries()]
    return any(
        isinstance(pattern, (NetDest, NetProto))
        for entries in entry_sets
        for pattern, _ in entries
    )


class Monitor:
    """Single-threaded event loop over one process table."""

    def __init__(
        self,
        policy: Policy,
        fs: FsModel | None = None,
        mode: str = ENFORCE,
        fast_path: bool = True,
        initial_pid: int | None = None,
    ):
        if mode not in (ENFORCE, COMPLAIN):
            raise ValueError(f"unknown mode {mode!r}")
        self.policy = policy
        self.fs = fs or FsModel()
        self.mode = mode
        self.fast_path = fast_path
        self.table: dict[int, ProcessState] = {}
        self.stats = CheckStats()
        self.decisions: list[Decision] = []
        if initial_pid is not None:
            self._track(initial_pid)

    def _track(self, pid: int) -> ProcessState:
        state = ProcessState(ProcessAcl.from_policy(pid, self.policy), AddressSpaceModel())
        self.table[pid] = state
        return state

    # -- decision helpers ----------------------------------------------------

    def _process_granular(self, state: ProcessState, req: AccessRequest) -> Decision:
        if process_grants(state.acl, req):
            return Decision(ALLOW, request=req)
        return Decision(DENY, PROCESS_DENIED, request=req)

    def _full_check(self, state: ProcessState, req: AccessRequest, ev: Event) -> Decision:
        def stack_source() -> CallStack:
            if ev.stack is None:
                raise StackUnavailable(f"event {ev.seq} carries no stack")
            return ev.stack

        decision = check_access(
            state.acl,
            req,
            ev.recv_hash,
            stack_source,
            log_enabled=self.fast_path,
            stats=self.stats,
        )
        if decision.provenance is None and ev.stack is not None:
            decision.provenance = tuple(ev.stack)
        return decision

    def _verify_network_dest(self, state: ProcessState, ev: Event) -> Decision:
        req = AccessRequest(NetResource(ev.dest, ev.proto), AccessPriv.READ_WRITE)
        if state.registered:
            decision = self._full_check(state, req, ev)
        else:
            decision = self._process_granular(state, req)
        if (
            decision.verdict == DENY
            and decision.reason in (PROCESS_DENIED, FUNCTION_DENIED)
            and _has_network_privs(state.acl.function_acl, ev.stack if state.registered else None)
        ):
            decision.reason = DESTINATION_NOT_WHITELISTED
        return decision

    # -- stack-domain churn ----------------------------------------------------

    def _sync_frames(self, state: ProcessState, stack: CallStack) -> None:
        """Mirror the runtime's frame create/delete churn in the stack domain.

        The previous and current stacks share their outer frames; popped
        frames free their blocks and pushed frames allocate fresh ones,
        each inside the allocator's own grant/revoke window.
        """
        current = tuple(reversed(stack))  # outermost-first
        previous = state.frame_stack
        common = 0
        for a, b in zip(previous, current):
            if a != b:
                break
            common += 1
        for _ in range(len(previous) - common):
            state.space.free(state.frame_blocks.pop())
        for _ in range(len(current) - common):
            state.frame_blocks.append(state.space.alloc(FRAME_RECORD_BYTES))
        state.frame_stack = current

    # -- event loop ------------------------------------------------------------

    def handle_event(self, ev: Event) -> Decision:
        """Decide one event; every consumed event yields exactly one Decision."""
        if ev.kind not in EVENT_KINDS:
            raise MalformedEventError(f"event {ev.seq}: unknown kind {ev.kind!r}")
        if ev.kind == RUNTIME_REGISTER:
            state = self.table.get(ev.pid) or self._track(ev.pid)
            state.registered = True
            return self._finish(ev, Decision(ALLOW))
        state = self.table.get(ev.pid)
        if state is None:
            raise UnknownPidError(f"event {ev.seq}: pid {ev.pid} is not tracked")

        if ev.kind == FORK:
            if ev.child_pid is None:
                raise MalformedEventError(f"event {ev.seq}: fork without child_pid")
            if ev.child_pid in self.table:
                raise MalformedEventError(f"event {ev.seq}: pid {ev.child_pid} already tracked")
            child = ProcessState(
                state.acl.clone_for(ev.child_pid),
                state.space.fork(),
                registered=False,
                frame_blocks=list(state.frame_blocks),
                frame_stack=state.frame_stack,
            )
            self.table[ev.child_pid] = child
            return self._finish(ev, Decision(ALLOW))

        if state.registered and ev.stack is not None:
            self._sync_frames(state, ev.stack)

        if ev.kind in (CONNECT, BIND):
            if ev.proto not in EVENT_PROTOS or ev.dest is None:
                raise MalformedEventError(
                    f"event {ev.seq}: {ev.kind} needs a tcp/udp/raw protocol and an IPv4 destination"
                )
            decision = self._verify_network_dest(state, ev)
            return self._finish(ev, decision)

        if ev.path is None:
            raise MalformedEventError(f"event {ev.seq}: {ev.kind} without path")
        canonical = resolve_path(self.fs, ev.path)
        if ev.kind == OPEN:
            if ev.priv is None:
                raise MalformedEventError(f"event {ev.seq}: open without privilege")
            req = AccessRequest(canonical, ev.priv)
            if state.registered:
                decision = self._full_check(state, req, ev)
            else:
                decision = self._process_granular(state, req)
        else:  # EXEC: the implicit read of the binary is what gets checked
            req = AccessRequest(canonical, AccessPriv.READ)
            if state.registered and ev.stack is not None:
                decision = self._full_check(state, req, ev)
            else:
                decision = self._process_granular(state, req)
        return self._finish(ev, decision)

    def _finish(self, ev: Event, decision: Decision) -> Decision:
        decision.seq = ev.seq
        decision.pid = ev.pid
        if decision.request is not None:
            decision.resource = str(decision.request.resource)
            decision.priv = decision.request.priv.letter
        if self.mode == COMPLAIN and decision.verdict == DENY:
            decision.would_deny = decision.reason
            decision.verdict = ALLOW
            decision.reason = None
        self.decisions.append(decision)
        return decision

    # -- aggregate instrumentation ----------------------------------------------

    def domain_faults(self) -> int:
        return sum(s.space.fault_count for s in self.table.values())

    def grant_revoke_counts(self) -> tuple[int, int]:
        grants = sum(s.space.grant_count for s in self.table.values())
        revokes = sum(s.space.revoke_count for s in self.table.values())
        return grants, revokes


def _pattern_for(resource) -> FsPath | NetDest:
    if isinstance(resource, NetResource):
        return NetDest(ipaddress.IPv4Network(f"{resource.addr}/32"), resource.proto)
    return FsPath(resource)


def suggest_rules(policy: Policy, decisions: list[Decision]) -> list[Rule]:
    """Minimal rule additions that convert every recorded denial to an allow.

    Function rules are computed to a closure: ruling a previously unruled
    function for one resource makes it participate in every other request
    it appears in, so those requests' privileges are granted too. Denials
    with no attributable stack become application-wide default rules.
    A suggestion can name a (subject, resource) pair an existing rule
    already covers at a lower privilege; replace that rule instead of
    appending in that case.
    """
    base = FunctionAcl.from_policy(policy)
    records: dict[tuple, None] = {}
    defaults: dict[tuple, None] = {}
    for d in decisions:
        denied = d.verdict == DENY or d.would_deny is not None
        if d.request is None:
            continue
        if d.provenance:
            if denied or d.inspected:
                records[(d.request.resource, d.request.priv, tuple(d.provenance))] = None
        elif denied:
            defaults[(d.request.resource, d.request.priv)] = None

    suggested: dict[tuple[FunctionId, object, AccessPriv], None] = {}

    def grants(fn: FunctionId, req: AccessRequest) -> bool:
        entries = list(base.lookup(fn) or ())
        entries += [
            (_pattern_for(res), priv) for (f, res, priv) in suggested if f == fn
        ]
        return entries_grant(entries, req)

    def ruled(fn: FunctionId) -> bool:
        return base.lookup(fn) is not None or any(f == fn for (f, _, _) in suggested)

    changed = True
    while changed:
        changed = False
        for resource, priv, provenance in records:
            req = AccessRequest(resource, priv)
            innermost = FunctionId(provenance[0])
            if not grants(innermost, req):
                suggested[(innermost, resource, priv)] = None
                changed = True
            for name in provenance[1:]:
                fn = FunctionId(name)
                if ruled(fn) and not grants(fn, req):
                    suggested[(fn, resource, priv)] = None
                    changed = True

    rules = [Rule(fn, _pattern_for(res), priv) for (fn, res, priv) in suggested]
    rules += [Rule(None, _pattern_for(res), priv) for (res, priv) in defaults]
    return rules
