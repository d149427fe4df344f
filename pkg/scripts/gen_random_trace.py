#!/usr/bin/env python3
"""Emit a seeded random trace plus its paired policy.

Usage: gen_random_trace.py SEED COUNT OUT_PREFIX
Writes OUT_PREFIX.trace and OUT_PREFIX.policy, suitable for
``funcmac diff-fastpath OUT_PREFIX.policy OUT_PREFIX.trace``.
"""

import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

from funcmac.tracegen import GENERATOR_POLICY, random_events
from funcmac.trace import dump_trace


def main() -> int:
    if len(sys.argv) != 4:
        print(__doc__, file=sys.stderr)
        return 1
    seed, count, prefix = int(sys.argv[1]), int(sys.argv[2]), sys.argv[3]
    dump_trace(f"{prefix}.trace", random_events(seed, count))
    pathlib.Path(f"{prefix}.policy").write_text(GENERATOR_POLICY)
    print(f"wrote {prefix}.trace ({count} events, seed {seed}) and {prefix}.policy")
    return 0


if __name__ == "__main__":
    sys.exit(main())
