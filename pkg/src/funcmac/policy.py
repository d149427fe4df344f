"""Policy language for function-granular access control.

A policy is a plain-text file with one rule per line. Each rule names a
subject (a module-qualified function, or the literal ``default`` for an
application-wide rule), a resource (a filesystem path or a network
destination), and an access privilege. The grammar is documented
bit-exactly in docs/policy-format.md.

This module owns the rule and pattern types, the parser/serializer pair,
resource matching semantics, and the policy-template generator.
"""

from __future__ import annotations

import enum
import ipaddress
import posixpath
from dataclasses import dataclass, field


class PolicyError(Exception):
    """Base class for policy-file problems. ``line`` is 1-based, 0 if unknown."""

    def __init__(self, message: str, line: int = 0):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


class PolicySyntaxError(PolicyError):
    pass


class DuplicateRuleError(PolicyError):
    pass


class InvalidPathError(PolicyError):
    pass


class InvalidPrefixError(PolicyError):
    pass


class DomainNameError(PolicyError):
    """Host names are rejected: destination rules are IP-prefix based only."""


class AccessPriv(enum.IntEnum):
    """Privilege lattice: READ_WRITE grants everything READ does."""

    READ = 1
    READ_WRITE = 2

    @property
    def letter(self) -> str:
        return "r" if self is AccessPriv.READ else "w"

    @classmethod
    def from_letter(cls, letter: str) -> "AccessPriv":
        try:
            return {"r": cls.READ, "w": cls.READ_WRITE}[letter]
        except KeyError:
            raise ValueError(f"unknown access privilege {letter!r}") from None


class Proto(str, enum.Enum):
    """Socket families distinguishable by rules.

    Connect/bind events are limited to tcp, udp and raw; ``unix`` exists so
    default policies can whitelist local-domain sockets as a protocol class.
    """

    TCP = "tcp"
    UDP = "udp"
    RAW = "raw"
    UNIX = "unix"


#: Protocols that may appear in connect/bind events.
EVENT_PROTOS = (Proto.TCP, Proto.UDP, Proto.RAW)


class FunctionId(str):
    """Module-qualified function name such as ``tweepy.upload``.

    Must contain a non-empty module path and function name separated by
    ``.``, with no whitespace.
    """

    def __new__(cls, name: str) -> "FunctionId":
        if not name or any(c.isspace() for c in name):
            raise ValueError(f"invalid function name: {name!r}")
        module, _, func = name.rpartition(".")
        if not module or not func:
            raise ValueError(f"function name must be module-qualified: {name!r}")
        return super().__new__(cls, name)

    @property
    def module(self) -> str:
        return self.rpartition(".")[0]

    @property
    def func(self) -> str:
        return self.rpartition(".")[2]


@dataclass(frozen=True)
class FsPath:
    """Absolute, normalized filesystem path pattern.

    ``recursive_dir`` marks a rule written with a trailing ``/``: it covers
    every path at or below the directory.
    """

    path: str
    recursive_dir: bool = False

    def __str__(self) -> str:
        if self.recursive_dir and self.path != "/":
            return self.path + "/"
        return self.path


@dataclass(frozen=True)
class NetDest:
    """IPv4 destination prefix, optionally restricted to one protocol."""

    network: ipaddress.IPv4Network
    proto: Proto | None = None

    def __str__(self) -> str:
        dest = f"network {self.network.network_address}/{self.network.prefixlen}"
        return f"{dest} {self.proto.value}" if self.proto else dest


@dataclass(frozen=True)
class NetProto:
    """Whole protocol class (any destination)."""

    proto: Proto

    def __str__(self) -> str:
        return f"network {self.proto.value}"


ResourcePattern = FsPath | NetDest | NetProto


@dataclass(frozen=True)
class NetResource:
    """A concrete network destination as seen at a socket call."""

    addr: ipaddress.IPv4Address
    proto: Proto

    def __str__(self) -> str:
        return f"{self.proto.value}:{self.addr}"


#: Concrete resource named by an access request: a canonical file path or a
#: network destination.
ConcreteResource = str | NetResource


@dataclass(frozen=True)
class AccessRequest:
    """One resource plus the privilege being requested for it."""

    resource: ConcreteResource
    priv: AccessPriv


@dataclass(frozen=True)
class Rule:
    """One policy line: ``subject`` is None for application-wide defaults."""

    subject: FunctionId | None
    resource: ResourcePattern
    privs: AccessPriv

    @property
    def is_default(self) -> bool:
        return self.subject is None


@dataclass(frozen=True)
class Policy:
    rules: tuple[Rule, ...]
    source_path: str = field(default="<memory>", compare=False)


def match_resource(concrete: ConcreteResource, pattern: ResourcePattern) -> bool:
    """Does a concrete resource fall under a rule pattern?

    File patterns match exactly, or by prefix for recursive directory rules.
    Destination prefixes match on the address's top bits (and the protocol,
    if the rule restricts one); protocol patterns match on protocol alone.
    """
    if isinstance(pattern, FsPath):
        if not isinstance(concrete, str):
            return False
        if pattern.recursive_dir:
            if pattern.path == "/":
                return True
            return concrete == pattern.path or concrete.startswith(pattern.path + "/")
        return concrete == pattern.path
    if not isinstance(concrete, NetResource):
        return False
    if isinstance(pattern, NetDest):
        if pattern.proto is not None and pattern.proto is not concrete.proto:
            return False
        return concrete.addr in pattern.network
    return pattern.proto is concrete.proto


def _parse_fs_path(token: str, line: int) -> FsPath:
    if "\x00" in token:
        raise InvalidPathError(f"path contains NUL: {token!r}", line)
    if not token.startswith("/"):
        raise InvalidPathError(f"path must be absolute: {token!r}", line)
    recursive = token.endswith("/")
    normalized = posixpath.normpath(token)
    if normalized.startswith("//"):  # normpath keeps a POSIX double slash
        normalized = normalized[1:]
    if normalized == "/":
        return FsPath("/", recursive_dir=True)
    return FsPath(normalized, recursive_dir=recursive)


_PROTO_NAMES = {p.value: p for p in Proto}


def _parse_net_pattern(tokens: list[str], line: int) -> NetDest | NetProto:
    # tokens are everything after the "network" keyword
    if not tokens:
        raise PolicySyntaxError("network rule needs a destination or protocol", line)
    first = tokens[0]
    if first in _PROTO_NAMES:
        if len(tokens) > 1:
            raise PolicySyntaxError(f"unexpected token after protocol: {tokens[1]!r}", line)
        return NetProto(_PROTO_NAMES[first])
    addr_part = first.split("/", 1)[0]
    try:
        ipaddress.IPv4Address(addr_part)
    except (ipaddress.AddressValueError, ValueError):
        if any(c.isalpha() for c in first):
            raise DomainNameError(
                f"domain names are not supported; use an IPv4 prefix: {first!r}", line
            ) from None
        raise InvalidPrefixError(f"invalid IPv4 prefix: {first!r}", line) from None
    try:
        network = ipaddress.IPv4Network(first, strict=True)
    except ValueError as exc:
        raise InvalidPrefixError(f"invalid IPv4 prefix {first!r}: {exc}", line) from None
    proto = None
    if len(tokens) > 1:
        if tokens[1] not in _PROTO_NAMES:
            raise PolicySyntaxError(f"unknown protocol: {tokens[1]!r}", line)
        if len(tokens) > 2:
            raise PolicySyntaxError(f"unexpected token: {tokens[2]!r}", line)
        proto = _PROTO_NAMES[tokens[1]]
    return NetDest(network, proto)


def parse_resource_spec(tokens: list[str], line: int = 0) -> tuple[ResourcePattern, AccessPriv]:
    """Parse the resource half of a rule line (everything after the subject).

    Used both by the policy parser and by the baseline data-file loader.
    """
    if not tokens:
        raise PolicySyntaxError("missing resource", line)
    if tokens[0] == "network":
        # Network access is not split by direction; always read-write.
        return _parse_net_pattern(tokens[1:], line), AccessPriv.READ_WRITE
    if len(tokens) != 2:
        raise PolicySyntaxError(
            f"file rule needs exactly a path and a privilege, got {len(tokens)} tokens", line
        )
    pattern = _parse_fs_path(tokens[0], line)
    try:
        priv = AccessPriv.from_letter(tokens[1])
    except ValueError:
        raise PolicySyntaxError(f"unknown access privilege: {tokens[1]!r}", line) from None
    return pattern, priv


def _check_duplicates(rules: list[Rule], lines: list[int] | None = None) -> None:
    seen: dict[tuple[FunctionId | None, ResourcePattern], int] = {}
    for i, rule in enumerate(rules):
        key = (rule.subject, rule.resource)
        if key in seen:
            line = lines[i] if lines else 0
            raise DuplicateRuleError(
                f"duplicate rule for {rule.subject or 'default'} on {rule.resource}", line
            )
        seen[key] = i


def parse_policy(text: str, source_path: str = "<memory>") -> Policy:
    """Parse policy text into a validated Policy.

    One rule per line; ``#`` starts a comment; blank lines are ignored.
    Raises a PolicyError subtype carrying the 1-based line number on any
    malformed line; never raises anything else for str input.
    """
    rules: list[Rule] = []
    rule_lines: list[int] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].strip()
        if not stripped:
            continue
        tokens = stripped.split()
        subject_token = tokens[0]
        if subject_token == "default":
            subject = None
        else:
            try:
                subject = FunctionId(subject_token)
            except ValueError as exc:
                raise PolicySyntaxError(str(exc), lineno) from None
        resource, priv = parse_resource_spec(tokens[1:], lineno)
        rules.append(Rule(subject, resource, priv))
        rule_lines.append(lineno)
    _check_duplicates(rules, rule_lines)
    return Policy(tuple(rules), source_path)


def serialize_rule(rule: Rule) -> str:
    subject = rule.subject if rule.subject is not None else "default"
    if isinstance(rule.resource, FsPath):
        return f"{subject} {rule.resource} {rule.privs.letter}"
    return f"{subject} {rule.resource}"


def serialize_policy(policy: Policy) -> str:
    """Render a policy in the rule grammar; inverse of parse_policy."""
    if not policy.rules:
        return ""
    return "\n".join(serialize_rule(r) for r in policy.rules) + "\n"


def generate_template(
    baseline: list[tuple[ResourcePattern, AccessPriv]],
    app_dir_listing: list[str],
) -> Policy:
    """Build a starter policy of application-wide default rules.

    One rule per baseline entry, then one read rule per listed application
    file. Output size is exactly ``len(baseline) + len(app_dir_listing)``.
    """
    rules = [Rule(None, pattern, priv) for pattern, priv in baseline]
    for path in app_dir_listing:
        rules.append(Rule(None, _parse_fs_path(path, 0), AccessPriv.READ))
    _check_duplicates(rules)
    return Policy(tuple(rules), "<generated>")


def load_baseline(text: str, source: str = "<baseline>") -> list[tuple[ResourcePattern, AccessPriv]]:
    """Parse a baseline data file: one resource spec per line, no subjects.

    Lines use the resource half of the rule grammar, e.g. ``/etc/hosts r``
    or ``network tcp``.
    """
    entries: list[tuple[ResourcePattern, AccessPriv]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].strip()
        if not stripped:
            continue
        entries.append(parse_resource_spec(stripped.split(), lineno))
    return entries
