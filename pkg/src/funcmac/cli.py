"""Command-line front end: trace replay, policy generation, fast-path diffing.

Exit codes follow one contract across subcommands: 0 for success (replay:
zero denials), 2 for denials or fast-path divergence, 1 for any input
error (reported to stderr with a line number where available).
"""

from __future__ import annotations

import argparse
import os
import sys
from importlib import resources

from .monitor import (
    COMPLAIN,
    ENFORCE,
    MalformedEventError,
    SymlinkLoopError,
    UnknownPidError,
)
from .policy import (
    Policy,
    PolicyError,
    generate_template,
    load_baseline,
    parse_policy,
    serialize_policy,
)
from .replay import build_report, render_report, run_trace
from .trace import TraceFormatError, load_trace

BASELINE_ENV = "FUNCMAC_BASELINE"


class InputError(Exception):
    pass


def _load_policy(path: str) -> Policy:
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_policy(fh.read(), path)
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    except UnicodeDecodeError:
        raise InputError(f"{path}: policy file is not valid UTF-8") from None
    except PolicyError as exc:
        raise InputError(f"{path}: {exc}") from None


def _load_trace(path: str):
    try:
        return load_trace(path)
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    except UnicodeDecodeError:
        raise InputError(f"{path}: trace file is not valid UTF-8") from None
    except TraceFormatError as exc:
        raise InputError(f"{path}: {exc}") from None


def _replay(policy, trace, mode, fast_path):
    try:
        return run_trace(policy, trace, mode=mode, fast_path=fast_path)
    except (UnknownPidError, MalformedEventError, SymlinkLoopError) as exc:
        raise InputError(str(exc)) from None


def cmd_replay(args: argparse.Namespace) -> int:
    policy = _load_policy(args.policy)
    trace = _load_trace(args.trace)
    result = _replay(policy, trace, args.mode, not args.no_fast_path)
    report = build_report(result, policy)
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(render_report(report))
    for d in result.denials:
        print(f"deny seq={d.seq} pid={d.pid} resource={d.resource} priv={d.priv} reason={d.reason}")
    for d in result.would_denies:
        print(
            f"would-deny seq={d.seq} pid={d.pid} resource={d.resource} "
            f"priv={d.priv} reason={d.would_deny}"
        )
    s = report["summary"]
    print(
        f"events={s['events']} allow={s['allow']} deny={sum(s['deny'].values())} "
        f"would_deny={sum(s['would_deny'].values())} "
        f"fast_path_hits={s['fast_path_hits']} inspections={s['inspections']}"
    )
    return 2 if result.denials else 0


def default_baseline_text() -> str:
    override = os.environ.get(BASELINE_ENV)
    if override:
        with open(override, encoding="utf-8") as fh:
            return fh.read()
    return resources.files("funcmac").joinpath("data/baseline.txt").read_text("utf-8")


def list_app_dir(path: str) -> list[str]:
    entries = []
    for name in sorted(os.listdir(path)):
        full = os.path.join(os.path.abspath(path), name)
        if os.path.isfile(full):
            entries.append(full)
    return entries


def cmd_genpolicy(args: argparse.Namespace) -> int:
    try:
        if args.baseline:
            with open(args.baseline, encoding="utf-8") as fh:
                baseline_text = fh.read()
            source = args.baseline
        else:
            baseline_text = default_baseline_text()
            source = "<default baseline>"
        baseline = load_baseline(baseline_text, source)
        listing = list_app_dir(args.app_dir) if args.app_dir else []
        policy = generate_template(baseline, listing)
        text = serialize_policy(policy)
    except OSError as exc:
        raise InputError(f"{exc.filename or ''}: {exc.strerror}") from None
    except PolicyError as exc:
        raise InputError(str(exc)) from None
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_diff_fastpath(args: argparse.Namespace) -> int:
    policy = _load_policy(args.policy)
    trace = _load_trace(args.trace)
    with_fp = _replay(policy, trace, ENFORCE, True)
    without_fp = _replay(policy, trace, ENFORCE, False)
    on = [(d.seq, d.verdict, d.reason) for d in with_fp.decisions]
    off = [(d.seq, d.verdict, d.reason) for d in without_fp.decisions]
    print(f"inspections fast-path-on={with_fp.inspections} fast-path-off={without_fp.inspections}")
    if on != off:
        for a, b in zip(on, off):
            if a != b:
                print(f"divergence at seq={a[0]}: on={a[1]}/{a[2]} off={b[1]}/{b[2]}")
                break
        return 2
    print("verdicts identical")
    return 0


def cmd_check_trace(args: argparse.Namespace) -> int:
    trace = _load_trace(args.trace)
    print(f"ok: {len(trace.events)} events, initial pid {trace.initial_pid}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="funcmac",
        description="Function-granular MAC: replay traces against a policy.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    replay = sub.add_parser("replay", help="replay a trace against a policy")
    replay.add_argument("policy")
    replay.add_argument("trace")
    replay.add_argument("--mode", choices=[ENFORCE, COMPLAIN], default=ENFORCE)
    replay.add_argument("--no-fast-path", action="store_true", help="inspect every request")
    replay.add_argument("--report", help="write the JSON report here")
    replay.set_defaults(func=cmd_replay)

    gen = sub.add_parser("genpolicy", help="generate a policy template")
    gen.add_argument("--baseline", help=f"baseline data file (default: ${BASELINE_ENV} or packaged)")
    gen.add_argument("--app-dir", help="application directory to add read rules for")
    gen.add_argument("--out", help="output policy path (default: stdout)")
    gen.set_defaults(func=cmd_genpolicy)

    diff = sub.add_parser("diff-fastpath", help="compare verdicts with the fast path on and off")
    diff.add_argument("policy")
    diff.add_argument("trace")
    diff.set_defaults(func=cmd_diff_fastpath)

    check = sub.add_parser("check-trace", help="validate a trace file against the v1 schema")
    check.add_argument("trace")
    check.set_defaults(func=cmd_check_trace)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
