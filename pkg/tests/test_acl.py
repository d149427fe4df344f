"""ACL engine: defaults, the hash-log fast path, eviction, fork propagation."""

from collections import deque

from hypothesis import given, settings, strategies as st

from funcmac.acl import (
    ALLOW,
    DENY,
    FUNCTION_DENIED,
    HASH_LOG_CAPACITY,
    NO_PROVENANCE,
    PROCESS_DENIED,
    CheckStats,
    DefaultAcl,
    ProcessAcl,
    StackHashLog,
    StackUnavailable,
    check_access,
    is_default_access,
)
from funcmac.policy import (
    AccessPriv,
    AccessRequest,
    FunctionId,
    Policy,
    Rule,
    FsPath,
    parse_policy,
)
from funcmac.stack import canonical_hash, stack_of

POLICY = parse_policy(
    """\
tweepy.upload /app/photo.jpg r
m.a /r1 w
m.b /r1 r
default /etc/ssl/certs/ r
"""
)


def pacl() -> ProcessAcl:
    return ProcessAcl.from_policy(1, POLICY)


def read(resource: str) -> AccessRequest:
    return AccessRequest(resource, AccessPriv.READ)


def static_stack(*names: str):
    stack = stack_of(*names)
    return lambda: stack


def no_stack():
    raise StackUnavailable("no runtime attached")


class TestIsDefaultAccess:
    def test_certificate_file_covered(self):
        dacl = DefaultAcl.from_policy(POLICY)
        assert is_default_access(read("/etc/ssl/certs/ca.pem"), dacl)

    def test_write_on_read_only_default(self):
        dacl = DefaultAcl.from_policy(POLICY)
        assert not is_default_access(
            AccessRequest("/etc/ssl/certs/ca.pem", AccessPriv.READ_WRITE), dacl
        )

    def test_empty_default_acl(self):
        dacl = DefaultAcl([])
        assert not is_default_access(read("/anything"), dacl)


class TestCheckAccess:
    def test_default_short_circuits_without_stack(self):
        # a failing stack source proves the stack is never requested
        d = check_access(pacl(), read("/etc/ssl/certs/ca.pem"), None, no_stack)
        assert d.verdict == ALLOW and not d.inspected

    def test_unruled_resource_is_process_denied_without_stack(self):
        d = check_access(pacl(), read("/nonexistent"), None, no_stack)
        assert d.verdict == DENY and d.reason == PROCESS_DENIED and not d.inspected

    def test_stack_unavailable_is_no_provenance(self):
        d = check_access(pacl(), read("/app/photo.jpg"), None, no_stack)
        assert d.verdict == DENY and d.reason == NO_PROVENANCE

    def test_grant_then_fast_path_hit_skips_inspection(self):
        acl = pacl()
        stats = CheckStats()
        stack = stack_of("tweepy.upload", "app.main")
        first = check_access(acl, read("/app/photo.jpg"), None, lambda: stack, stats=stats)
        assert first.verdict == ALLOW and first.inspected
        assert stats.inspections == 1
        second = check_access(
            acl, read("/app/photo.jpg"), canonical_hash(stack), no_stack, stats=stats
        )
        assert second.verdict == ALLOW and second.fast_path
        assert stats.inspections == 1  # second request inspected nothing
        assert stats.fast_path_hits == 1

    def test_refusal_is_function_denied_with_provenance(self):
        d = check_access(pacl(), read("/app/photo.jpg"), None, static_stack("intruder.fn"))
        assert d.verdict == DENY and d.reason == FUNCTION_DENIED
        assert d.provenance == ("intruder.fn",)

    def test_deny_never_mutates_log(self):
        acl = pacl()
        check_access(acl, read("/app/photo.jpg"), None, static_stack("intruder.fn"))
        assert acl.hash_log.ring_sizes() == {}

    def test_log_key_includes_privilege(self):
        # a read-granted hash must not unlock read-write
        acl = ProcessAcl.from_policy(1, parse_policy("m.a /r1 w"))
        stack = stack_of("m.a")
        check_access(acl, read("/r1"), None, lambda: stack)
        d = check_access(
            acl,
            AccessRequest("/r1", AccessPriv.READ_WRITE),
            canonical_hash(stack),
            no_stack,
        )
        assert d.reason == NO_PROVENANCE  # fast path missed; full inspection needed

    def test_hash_ignored_when_log_disabled(self):
        acl = pacl()
        stack = stack_of("tweepy.upload")
        check_access(acl, read("/app/photo.jpg"), None, lambda: stack, log_enabled=False)
        assert acl.hash_log.ring_sizes() == {}
        d = check_access(
            acl, read("/app/photo.jpg"), canonical_hash(stack), no_stack, log_enabled=False
        )
        assert d.reason == NO_PROVENANCE


class TestEviction:
    def test_seventeen_distinct_stacks_keep_sixteen_newest(self):
        acl = pacl()
        request = read("/app/photo.jpg")
        stacks = [stack_of("tweepy.upload", f"caller{i}.fn") for i in range(17)]
        reference: deque = deque(maxlen=HASH_LOG_CAPACITY)
        for stack in stacks:
            d = check_access(acl, request, None, lambda s=stack: s)
            assert d.verdict == ALLOW
            reference.append(canonical_hash(stack))
        key = (request.resource, request.priv)
        assert acl.hash_log.hashes(key) == tuple(reference)
        assert canonical_hash(stacks[0]) not in acl.hash_log.hashes(key)

        # the evicted stack falls back to full inspection and is re-logged
        stats = CheckStats()
        d = check_access(
            acl, request, canonical_hash(stacks[0]), lambda: stacks[0], stats=stats
        )
        assert d.verdict == ALLOW and d.inspected and stats.inspections == 1
        reference.append(canonical_hash(stacks[0]))
        assert acl.hash_log.hashes(key) == tuple(reference)

    def test_ring_never_exceeds_capacity(self):
        log = StackHashLog()
        for i in range(100):
            log.record(("/r", AccessPriv.READ), canonical_hash(stack_of(f"f{i}.x")))
            assert all(n <= HASH_LOG_CAPACITY for n in log.ring_sizes().values())


class TestFork:
    def test_child_structurally_equals_parent(self):
        acl = pacl()
        stack = stack_of("tweepy.upload")
        check_access(acl, read("/app/photo.jpg"), None, lambda: stack)
        child = acl.clone_for(2)
        assert child.pid == 2
        assert child.function_acl == acl.function_acl
        assert child.default_acl == acl.default_acl
        assert child.hash_log == acl.hash_log

    def test_child_log_diverges_independently(self):
        acl = pacl()
        child = acl.clone_for(2)
        check_access(child, read("/app/photo.jpg"), None, static_stack("tweepy.upload"))
        assert child.hash_log != acl.hash_log
        assert acl.hash_log.ring_sizes() == {}


FUNCTIONS = ["m.a", "m.b", "m.c"]
RESOURCES = ["/r1", "/r2"]
PRIVS = [AccessPriv.READ, AccessPriv.READ_WRITE]

policies_st = st.builds(
    lambda fn_rules, defaults: Policy(
        tuple(
            {(s, FsPath(r)): Rule(FunctionId(s), FsPath(r), p) for s, r, p in fn_rules}.values()
        )
        + tuple({FsPath(r): Rule(None, FsPath(r), p) for r, p in defaults}.values())
    ),
    st.lists(
        st.tuples(st.sampled_from(FUNCTIONS), st.sampled_from(RESOURCES), st.sampled_from(PRIVS)),
        max_size=5,
    ),
    st.lists(st.tuples(st.sampled_from(RESOURCES), st.sampled_from(PRIVS)), max_size=2),
)

events_st = st.lists(
    st.tuples(
        st.sampled_from(RESOURCES),
        st.sampled_from(PRIVS),
        st.lists(st.sampled_from(FUNCTIONS), min_size=1, max_size=4),
        st.booleans(),  # send the (honest) preemptive hash?
        st.booleans(),  # fork before this event?
    ),
    max_size=40,
)


class TestDifferential:
    @settings(max_examples=200)
    @given(policy=policies_st, events=events_st)
    def test_fast_path_equals_full_inspection(self, policy, events):
        """Verdicts are log-independent for any interleaving of requests."""
        with_log = {1: ProcessAcl.from_policy(1, policy)}
        without_log = {1: ProcessAcl.from_policy(1, policy)}
        pid = 1
        for resource, priv, names, send_hash, fork in events:
            if fork and pid < 3:
                child = pid + 1
                with_log[child] = with_log[pid].clone_for(child)
                without_log[child] = without_log[pid].clone_for(child)
                pid = child
            stack = stack_of(*names)
            request = AccessRequest(resource, priv)
            recv = canonical_hash(stack) if send_hash else None
            a = check_access(with_log[pid], request, recv, lambda: stack, log_enabled=True)
            b = check_access(without_log[pid], request, recv, lambda: stack, log_enabled=False)
            assert (a.verdict, a.reason) == (b.verdict, b.reason)

    @settings(max_examples=200)
    @given(
        policy=policies_st,
        events=events_st,
        extra_default=st.tuples(st.sampled_from(RESOURCES), st.sampled_from(PRIVS)),
    )
    def test_adding_default_rule_is_monotone(self, policy, events, extra_default):
        resource, priv = extra_default
        if any(r.is_default and r.resource == FsPath(resource) for r in policy.rules):
            widened = policy
        else:
            widened = Policy(policy.rules + (Rule(None, FsPath(resource), priv),))
        base_acl = ProcessAcl.from_policy(1, policy)
        wide_acl = ProcessAcl.from_policy(1, widened)
        for res, p, names, send_hash, _fork in events:
            stack = stack_of(*names)
            request = AccessRequest(res, p)
            recv = canonical_hash(stack) if send_hash else None
            before = check_access(base_acl, request, recv, lambda: stack)
            after = check_access(wide_acl, request, recv, lambda: stack)
            if before.verdict == ALLOW:
                assert after.verdict == ALLOW
