"""Audit-hook capture of open/connect/exec/fork events with call stacks."""

from __future__ import annotations

import atexit
import hashlib
import json
import os
import shutil
import socket
import sys
from dataclasses import dataclass, field

TRACE_VERSION = 1
CAPTURABLE = frozenset({"open", "connect", "exec", "fork"})

_WRITE_MODE_CHARS = set("wax+")
_WRITE_FLAGS = os.O_WRONLY | os.O_RDWR | os.O_APPEND | os.O_CREAT | os.O_TRUNC

# The runner executes as __main__, so shim frames are recognized by file
# location rather than by module name.
_SHIM_DIR = os.path.dirname(os.path.abspath(__file__))


@dataclass
class ShimConfig:
    output: str
    capture: frozenset = frozenset({"open", "connect", "exec"})
    depth_cap: int = 64

    def __post_init__(self):
        unknown = set(self.capture) - CAPTURABLE
        if unknown:
            raise ValueError(f"unknown capture kinds: {sorted(unknown)}")
        if self.depth_cap < 1:
            raise ValueError("depth_cap must be >= 1")


def _qualified(frame) -> str | None:
    module = frame.f_globals.get("__name__")
    func = frame.f_code.co_name
    if not isinstance(module, str) or not module:
        return None
    if func.startswith("<"):  # <module>, <lambda>, comprehensions, eval frames
        return None
    if os.path.dirname(os.path.abspath(frame.f_code.co_filename)) == _SHIM_DIR:
        return None
    name = f"{module}.{func}"
    if any(c.isspace() for c in name):
        return None
    return name


def qualify_frames(frame, depth_cap: int = 64) -> list[str]:
    """Map a raw frame chain to module-qualified names, innermost first.

    Frames without a resolvable module and anonymous frames are dropped;
    at most ``depth_cap`` qualified frames are kept.
    """
    names: list[str] = []
    while frame is not None and len(names) < depth_cap:
        name = _qualified(frame)
        if name is not None:
            names.append(name)
        frame = frame.f_back
    return names


def stack_digest(names: list[str]) -> str:
    """The canonical trace-format stack hash: each name + LF, SHA-256, hex."""
    h = hashlib.sha256()
    for name in names:
        h.update(name.encode("utf-8"))
        h.update(b"\n")
    return h.hexdigest()


class Shim:
    """One installed capture hook writing one trace file."""

    def __init__(self, config: ShimConfig):
        self.config = config
        self.enabled = False
        self.pid = os.getpid()
        self._seq = 0
        self._in_hook = False
        self._seen: set = set()
        self._fh = None

    # -- lifecycle -----------------------------------------------------------

    def install(self) -> bool:
        try:
            self._fh = open(self.config.output, "w", encoding="utf-8")
            self._emit_raw(
                {"version": TRACE_VERSION, "symlinks": {}, "initial_pid": self.pid}
            )
            self._emit({"kind": "runtime_register", "pid": self.pid})
            sys.addaudithook(self._hook)
            if "fork" in self.config.capture:
                os.register_at_fork(
                    before=self._flush, after_in_child=self._handle_child
                )
            atexit.register(self.close)
        except Exception as exc:  # hooks must never break the application
            self._diagnose(f"could not install: {exc}")
            self.enabled = False
            return False
        self.enabled = True
        return True

    def close(self) -> None:
        self.enabled = False
        if self._fh is not None:
            try:
                self._fh.close()
            except OSError:
                pass
            self._fh = None

    def _diagnose(self, message: str) -> None:
        print(f"funcmac-shim: {message}; capture disabled", file=sys.stderr)

    def _flush(self) -> None:
        if self._fh is not None:
            try:
                self._fh.flush()
            except OSError:
                pass

    def _handle_child(self) -> None:
        # Audit hooks survive fork, but interleaving two writers would corrupt
        # the sequence numbers: record nothing from the child. The fork event
        # itself is emitted by the parent's os.fork wrapper when enabled.
        self.enabled = False
        self._fh = None

    # -- event emission ---------------------------------------------------------

    def _emit_raw(self, obj: dict) -> None:
        self._fh.write(json.dumps(obj, sort_keys=True) + "\n")
        self._fh.flush()

    def _emit(self, fields: dict) -> None:
        self._seq += 1
        self._emit_raw({"seq": self._seq, **fields})

    def _emit_access(self, kind: str, fields: dict, key) -> None:
        # the frame filter drops the shim's own frames, so start at the top
        names = qualify_frames(sys._getframe(), self.config.depth_cap)
        event = {"kind": kind, "pid": self.pid, **fields}
        if names:
            event["stack"] = names
            if key in self._seen:
                event["recv_hash"] = stack_digest(names)
        self._seen.add(key)
        self._emit(event)

    # -- the audit hook -----------------------------------------------------------

    def _hook(self, event: str, args: tuple) -> None:
        if not self.enabled or self._in_hook or os.getpid() != self.pid:
            return
        self._in_hook = True
        try:
            if event == "open" and "open" in self.config.capture:
                self._on_open(args)
            elif event == "socket.connect" and "connect" in self.config.capture:
                self._on_connect(args)
            elif event in ("os.exec", "os.posix_spawn") and "exec" in self.config.capture:
                self._on_exec(args[0])
            elif event == "subprocess.Popen" and "exec" in self.config.capture:
                self._on_exec(args[0] if args[0] is not None else (args[1] or [None])[0])
        except Exception as exc:
            self.enabled = False
            self._diagnose(f"capture failed on {event}: {exc}")
        finally:
            self._in_hook = False

    def _on_open(self, args: tuple) -> None:
        path, mode, flags = args
        if isinstance(path, bytes):
            path = os.fsdecode(path)
        if not isinstance(path, str):
            return  # fd-relative opens are not attributable to a path
        path = os.path.abspath(path)
        if path == os.path.abspath(self.config.output):
            return
        if isinstance(mode, str):
            priv = "w" if _WRITE_MODE_CHARS & set(mode) else "r"
        else:
            priv = "w" if (flags or 0) & _WRITE_FLAGS else "r"
        self._emit_access("open", {"path": path, "priv": priv}, ("open", path, priv))

    def _on_connect(self, args: tuple) -> None:
        sock, address = args
        if getattr(sock, "family", None) != socket.AF_INET:
            return
        if not isinstance(address, tuple) or not address:
            return
        host = address[0]
        try:
            socket.inet_aton(host)
            if host.count(".") != 3:
                return
        except (OSError, TypeError):
            return  # hostnames and malformed addresses are not attributable
        sock_type = sock.type
        if sock_type == socket.SOCK_STREAM:
            proto = "tcp"
        elif sock_type == socket.SOCK_DGRAM:
            proto = "udp"
        elif sock_type == socket.SOCK_RAW:
            proto = "raw"
        else:
            return
        self._emit_access(
            "connect", {"proto": proto, "dest": host}, ("connect", host, proto)
        )

    def _on_exec(self, executable) -> None:
        if isinstance(executable, bytes):
            executable = os.fsdecode(executable)
        if not isinstance(executable, str) or not executable:
            return
        if "/" not in executable:
            resolved = shutil.which(executable)
            if resolved is None:
                return
            executable = resolved
        path = os.path.abspath(executable)
        self._emit_access("exec", {"path": path}, ("exec", path))


def install_shim(config: ShimConfig) -> Shim:
    """Install capture hooks; on failure the shim disables itself and the
    application continues unobserved."""
    shim = Shim(config)
    shim.install()
    return shim


def install_from_env() -> Shim | None:
    """Install if the trace environment variable names an output file."""
    output = os.environ.get("FUNCMAC_TRACE")
    if not output:
        return None
    return install_shim(ShimConfig(output=output))
