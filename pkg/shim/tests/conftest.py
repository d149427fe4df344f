import json
import pathlib
import shutil
import socket
import subprocess
import sys
import threading

import pytest

DEMOS = pathlib.Path(__file__).parent.parent / "demo"


def run_cli(*args: str) -> subprocess.CompletedProcess:
    """Invoke the primary engine through its CLI, its external interface."""
    return subprocess.run(
        [sys.executable, "-m", "funcmac", *args], capture_output=True, text=True
    )


def run_script(script: pathlib.Path, args, cwd, trace: pathlib.Path | None):
    """Run a demo app, optionally under the shim, with bytecode caching off."""
    env = {"PATH": "/usr/bin:/bin", "PYTHONDONTWRITEBYTECODE": "1"}
    if trace is not None:
        env["FUNCMAC_TRACE"] = str(trace)
        cmd = [sys.executable, "-m", "funcmac_shim", str(script), *map(str, args)]
    else:
        cmd = [sys.executable, str(script), *map(str, args)]
    return subprocess.run(cmd, cwd=cwd, env=env, capture_output=True, text=True, timeout=60)


class OneShotServer:
    """Accepts one length-prefixed upload and acknowledges it."""

    def __init__(self):
        self._sock = socket.socket()
        self._sock.bind(("127.0.0.1", 0))
        self._sock.listen(1)
        self.port = self._sock.getsockname()[1]
        self.payload = None
        self._thread = threading.Thread(target=self._serve, daemon=True)
        self._thread.start()

    def _serve(self):
        conn, _ = self._sock.accept()
        with conn:
            size = int.from_bytes(self._recv(conn, 4), "big")
            self.payload = self._recv(conn, size)
            conn.sendall(b"ok")
        self._sock.close()

    @staticmethod
    def _recv(conn, size):
        buf = b""
        while len(buf) < size:
            chunk = conn.recv(size - len(buf))
            if not chunk:
                break
            buf += chunk
        return buf

    def join(self):
        self._thread.join(timeout=10)


@pytest.fixture
def demo_copy(tmp_path):
    def copy(name: str) -> pathlib.Path:
        target = tmp_path / name
        shutil.copytree(DEMOS / name, target)
        return target

    return copy


def generated_policy_for(trace: pathlib.Path, app_dir: pathlib.Path, workdir: pathlib.Path):
    """The policy-generation workflow: template, complain pass, merge."""
    template = workdir / "template.policy"
    assert run_cli("genpolicy", "--app-dir", str(app_dir), "--out", str(template)).returncode == 0
    report_path = workdir / "complain.json"
    complain = run_cli(
        "replay", str(template), str(trace), "--mode", "complain",
        "--report", str(report_path),
    )
    assert complain.returncode == 0, complain.stderr
    suggestions = json.loads(report_path.read_text())["suggested_rules"]
    final = workdir / "final.policy"
    final.write_text(template.read_text() + "".join(s + "\n" for s in suggestions))
    return final
