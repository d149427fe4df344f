"""Function-granular mandatory access control library and trace simulator."""

from .acl import (
    ALLOW,
    DENY,
    DESTINATION_NOT_WHITELISTED,
    FUNCTION_DENIED,
    NO_PROVENANCE,
    PROCESS_DENIED,
    Decision,
    DefaultAcl,
    FunctionAcl,
    ProcessAcl,
    StackHashLog,
    check_access,
    is_default_access,
)
from .policy import (
    AccessPriv,
    AccessRequest,
    FsPath,
    FunctionId,
    NetDest,
    NetProto,
    NetResource,
    Policy,
    PolicyError,
    Proto,
    Rule,
    generate_template,
    match_resource,
    parse_policy,
    serialize_policy,
)
from .stack import CallStack, StackHash, canonical_hash, inspect_stack, stack_of

__all__ = [name for name in dir() if not name.startswith("_")]
