#!/usr/bin/env python3
"""Replay every checked-in case-study fixture and print a verdict table.

Each adversarial trace should end in a denial with the expected reason;
each benign trace should replay clean. Exits non-zero if any expectation
fails.
"""

import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

from funcmac.policy import parse_policy
from funcmac.replay import run_trace
from funcmac.trace import load_trace

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "tests" / "fixtures"

CASES = [
    ("twitter_photo.policy", "twitter_photo_benign.trace", None),
    ("twitter_photo.policy", "twitter_photo_ssh_key.trace", "function_denied"),
    ("twitter_photo.policy", "twitter_photo_netdest.trace", "destination_not_whitelisted"),
    ("plant_watering.policy", "plant_watering_benign.trace", None),
    ("plant_watering.policy", "plant_watering_symlink.trace", "function_denied"),
    ("plant_watering.policy", "plant_watering_shell_exec.trace", "process_denied"),
]


def main() -> int:
    failures = 0
    print(f"{'trace':42} {'expected':28} result")
    for policy_name, trace_name, expected in CASES:
        policy = parse_policy((FIXTURES / policy_name).read_text(), policy_name)
        result = run_trace(policy, load_trace(str(FIXTURES / trace_name)))
        reasons = [d.reason for d in result.denials]
        ok = reasons == ([] if expected is None else [expected])
        failures += not ok
        shown = expected or "no denials"
        print(f"{trace_name:42} {shown:28} {'ok' if ok else 'FAIL ' + str(reasons)}")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
