"""Call stacks, the canonical stack hash, and the privilege-intersection walk.

A call stack is an ordered tuple of module-qualified function names,
index 0 being the innermost frame (the function issuing the resource
request). Access is granted only when the innermost frame holds a matching
rule and every other ruled frame on the stack also grants the request, so
an unprivileged caller cannot launder a request through a privileged
callee.
"""

from __future__ import annotations

import hashlib
from typing import TYPE_CHECKING, Iterable

from .policy import AccessPriv, AccessRequest, FunctionId, ResourcePattern, match_resource

if TYPE_CHECKING:
    from .acl import FunctionAcl

#: Innermost-first sequence of function identities.
CallStack = tuple[FunctionId, ...]

#: 32-byte SHA-256 digest of a canonically serialized call stack.
StackHash = bytes


def stack_of(*names: str) -> CallStack:
    """Build a CallStack from qualified names, innermost first."""
    return tuple(FunctionId(n) for n in names)


def canonical_hash(stack: Iterable[str]) -> StackHash:
    """SHA-256 of the stack's canonical serialization.

    The serialization is the UTF-8 bytes of each qualified name, innermost
    first, each followed by one line-feed byte. Function names cannot
    contain whitespace, so the encoding is unambiguous and order-sensitive.
    """
    h = hashlib.sha256()
    for name in stack:
        h.update(name.encode("utf-8"))
        h.update(b"\n")
    return h.digest()


def entries_grant(
    entries: Iterable[tuple[ResourcePattern, AccessPriv]], req: AccessRequest
) -> bool:
    """Does any rule entry cover the requested resource at the needed privilege?"""
    return any(
        priv >= req.priv and match_resource(req.resource, pattern)
        for pattern, priv in entries
    )


def inspect_stack(stack: CallStack, req: AccessRequest, acl: "FunctionAcl") -> bool:
    """Walk the stack outward, intersecting per-function privileges.

    The innermost frame must hold a rule that grants the request; frames
    with no rule at all are skipped; any ruled frame that lacks the
    requested privilege terminates the walk with a refusal. Total: never
    raises.
    """
    entries = acl.lookup(stack[0])
    if entries is None:
        return False
    grant = entries_grant(entries, req)
    for frame in stack[1:]:
        if not grant:
            break
        entries = acl.lookup(frame)
        if entries is None:
            continue
        grant = entries_grant(entries, req)
    return grant
