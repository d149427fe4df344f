"""Drive a parsed trace through the monitor and summarize the outcome."""

from __future__ import annotations

import json
from dataclasses import dataclass

from .acl import DENY, Decision
from .monitor import COMPLAIN, ENFORCE, Monitor, suggest_rules
from .policy import Policy, serialize_rule
from .trace import TraceFile


@dataclass
class ReplayResult:
    monitor: Monitor
    decisions: list[Decision]

    @property
    def denials(self) -> list[Decision]:
        return [d for d in self.decisions if d.verdict == DENY]

    @property
    def would_denies(self) -> list[Decision]:
        return [d for d in self.decisions if d.would_deny is not None]

    @property
    def inspections(self) -> int:
        return self.monitor.stats.inspections

    @property
    def fast_path_hits(self) -> int:
        return self.monitor.stats.fast_path_hits


def run_trace(
    policy: Policy,
    trace: TraceFile,
    mode: str = ENFORCE,
    fast_path: bool = True,
) -> ReplayResult:
    monitor = Monitor(
        policy,
        trace.fs_model(),
        mode=mode,
        fast_path=fast_path,
        initial_pid=trace.initial_pid,
    )
    for ev in trace.events:
        monitor.handle_event(ev)
    return ReplayResult(monitor, monitor.decisions)


def _decision_record(d: Decision) -> dict:
    record: dict = {
        "seq": d.seq,
        "pid": d.pid,
        "verdict": d.verdict,
        "fast_path": d.fast_path,
        "inspected": d.inspected,
    }
    if d.reason is not None:
        record["reason"] = d.reason
    if d.would_deny is not None:
        record["would_deny"] = d.would_deny
    if d.resource is not None:
        record["resource"] = d.resource
        record["priv"] = d.priv
    if d.provenance is not None:
        record["stack"] = list(d.provenance)
    return record


def build_report(result: ReplayResult, policy: Policy) -> dict:
    """Deterministic replay report: per-decision records plus summary counts."""
    deny_by_reason: dict[str, int] = {}
    would_deny_by_reason: dict[str, int] = {}
    for d in result.decisions:
        if d.verdict == DENY:
            deny_by_reason[d.reason] = deny_by_reason.get(d.reason, 0) + 1
        if d.would_deny is not None:
            would_deny_by_reason[d.would_deny] = would_deny_by_reason.get(d.would_deny, 0) + 1
    grants, revokes = result.monitor.grant_revoke_counts()
    report = {
        "decisions": [_decision_record(d) for d in result.decisions],
        "summary": {
            "events": len(result.decisions),
            "allow": sum(1 for d in result.decisions if d.verdict != DENY),
            "deny": deny_by_reason,
            "would_deny": would_deny_by_reason,
            "fast_path_hits": result.fast_path_hits,
            "inspections": result.inspections,
            "domain_faults": result.monitor.domain_faults(),
            "grants": grants,
            "revokes": revokes,
        },
    }
    if result.monitor.mode == COMPLAIN:
        report["suggested_rules"] = [
            serialize_rule(r) for r in suggest_rules(policy, result.decisions)
        ]
    return report


def render_report(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"
