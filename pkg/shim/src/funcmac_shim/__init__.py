"""Capture-only instrumentation for real Python applications.

Installs runtime audit hooks that record file opens, outbound socket
connects and process executions together with the module-qualified call
stack active at each operation, and writes them as a funcmac version-1
trace (see the primary package's docs/trace-format.md). The shim never
blocks anything: enforcement fidelity lives entirely in the replay engine.

Activate by running a script under the shim with the output file named in
the environment:

    FUNCMAC_TRACE=/tmp/app.trace python -m funcmac_shim app.py [args...]

or programmatically, before the application's imports complete:

    from funcmac_shim import ShimConfig, install_shim
    install_shim(ShimConfig(output="/tmp/app.trace"))
"""

from .shim import ShimConfig, Shim, install_shim, install_from_env, qualify_frames

TRACE_ENV = "FUNCMAC_TRACE"

__all__ = [
    "Shim",
    "ShimConfig",
    "TRACE_ENV",
    "install_from_env",
    "install_shim",
    "qualify_frames",
]
