"""Run a Python script under the capture shim.

Usage: FUNCMAC_TRACE=out.trace python -m funcmac_shim script.py [args...]
An explicit ``--output FILE`` before the script path overrides the
environment variable.
"""

import os
import runpy
import sys

from .shim import ShimConfig, install_shim


def main(argv: list[str]) -> int:
    output = os.environ.get("FUNCMAC_TRACE")
    args = list(argv)
    if args and args[0] == "--output":
        if len(args) < 2:
            print("funcmac-shim: --output needs a file argument", file=sys.stderr)
            return 2
        output = args[1]
        args = args[2:]
    if not args:
        print(__doc__, file=sys.stderr)
        return 2
    if not output:
        print(
            "funcmac-shim: set FUNCMAC_TRACE or pass --output to name the trace file",
            file=sys.stderr,
        )
        return 2
    script, *script_args = args
    install_shim(ShimConfig(output=output))
    sys.argv = [script] + script_args
    runpy.run_path(script, run_name="__main__")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
