#!/usr/bin/env python3
"""Regenerate the checked-in case-study fixtures under tests/fixtures/.

The four scenarios mirror classic data-leak patterns: credential
exfiltration through an authorized upload function, reading a protected
key through a /tmp symlink, shell execution of an unlisted binary, and
uploading to a destination outside the whitelisted prefix. Each attack
trace has a benign counterpart that must replay clean.
"""

import ipaddress
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

from funcmac.monitor import Event
from funcmac.policy import AccessPriv, Proto
from funcmac.stack import stack_of
from funcmac.trace import dump_trace

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "tests" / "fixtures"

TWITTER_PHOTO_POLICY = """\
# photo-tweeting appliance: capture an image, OAuth to the service, upload
camera.capture /app/photo.jpg w
tweepy.upload /app/photo.jpg r
tweepy.upload network 104.244.42.0/24
deploy.push_backup /app/id_rsa r
default /etc/ssl/certs/ r
"""

# Same app with the upload function's rules missing: complain-mode input.
TWITTER_PHOTO_UNDERSPEC = """\
camera.capture /app/photo.jpg w
deploy.push_backup /app/id_rsa r
default /etc/ssl/certs/ r
"""

PLANT_WATERING_POLICY = """\
# moisture-sensing appliance publishing readings over MQTT/TLS
sensor.read_moisture /app/moisture.cfg r
mqtt_client.connect_tls /app/private.key r
mqtt_client.connect_tls /app/client.crt r
mqtt_client.connect_tls network 52.94.0.0/16
mqtt_client.publish network 52.94.0.0/16
default /usr/bin/moisture-probe r
default /etc/ssl/certs/ r
"""


def ev(seq, kind, pid=1, **kw):
    if "stack" in kw:
        kw["stack"] = stack_of(*kw["stack"])
    if "priv" in kw:
        kw["priv"] = AccessPriv.from_letter(kw["priv"])
    if "proto" in kw:
        kw["proto"] = Proto(kw["proto"])
    if "dest" in kw:
        kw["dest"] = ipaddress.IPv4Address(kw["dest"])
    return Event(seq=seq, pid=pid, kind=kind, **kw)


def main() -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    (FIXTURES / "twitter_photo.policy").write_text(TWITTER_PHOTO_POLICY)
    (FIXTURES / "twitter_photo_underspec.policy").write_text(TWITTER_PHOTO_UNDERSPEC)
    (FIXTURES / "plant_watering.policy").write_text(PLANT_WATERING_POLICY)
    (FIXTURES / "empty.policy").write_text("# no rules: default-deny everything\n")

    dump_trace(
        str(FIXTURES / "twitter_photo_benign.trace"),
        [
            ev(1, "runtime_register"),
            ev(2, "open", path="/app/photo.jpg", priv="w",
               stack=["camera.capture", "twitter_photo.main"]),
            ev(3, "open", path="/etc/ssl/certs/ca-bundle.crt", priv="r",
               stack=["ssl.load_verify", "tweepy.upload", "twitter_photo.main"]),
            ev(4, "open", path="/app/photo.jpg", priv="r",
               stack=["tweepy.upload", "twitter_photo.main"]),
            ev(5, "connect", proto="tcp", dest="104.244.42.65",
               stack=["tweepy.upload", "twitter_photo.main"]),
            ev(6, "open", path="/app/id_rsa", priv="r",
               stack=["deploy.push_backup", "twitter_photo.main"]),
        ],
    )

    # (a) the authorized upload function is steered at the app's SSH key
    dump_trace(
        str(FIXTURES / "twitter_photo_ssh_key.trace"),
        [
            ev(1, "runtime_register"),
            ev(2, "open", path="/app/id_rsa", priv="r",
               stack=["tweepy.upload", "adversary.exfiltrate", "twitter_photo.main"]),
        ],
    )

    # (d) the authorized photo goes to a server outside the whitelisted prefix
    dump_trace(
        str(FIXTURES / "twitter_photo_netdest.trace"),
        [
            ev(1, "runtime_register"),
            ev(2, "open", path="/app/photo.jpg", priv="r",
               stack=["tweepy.upload", "adversary.reroute", "twitter_photo.main"]),
            ev(3, "connect", proto="tcp", dest="198.51.100.7",
               stack=["tweepy.upload", "adversary.reroute", "twitter_photo.main"]),
        ],
    )

    dump_trace(
        str(FIXTURES / "plant_watering_benign.trace"),
        [
            ev(1, "runtime_register"),
            ev(2, "open", path="/app/moisture.cfg", priv="r",
               stack=["sensor.read_moisture", "plant_watering.main"]),
            ev(3, "exec", path="/usr/bin/moisture-probe"),
            ev(4, "open", path="/app/private.key", priv="r",
               stack=["mqtt_client.connect_tls", "plant_watering.main"]),
            ev(5, "open", path="/app/client.crt", priv="r",
               stack=["mqtt_client.connect_tls", "plant_watering.main"]),
            ev(6, "connect", proto="tcp", dest="52.94.12.34",
               stack=["mqtt_client.connect_tls", "plant_watering.main"]),
            ev(7, "connect", proto="tcp", dest="52.94.12.34",
               stack=["mqtt_client.publish", "plant_watering.main"]),
        ],
        symlinks={"/tmp/upload.dat": "/app/private.key"},
    )

    # (b) the protected key is opened through a crafted /tmp symlink
    dump_trace(
        str(FIXTURES / "plant_watering_symlink.trace"),
        [
            ev(1, "runtime_register"),
            ev(2, "open", path="/tmp/upload.dat", priv="r",
               stack=["fileutil.read_all", "adversary.collect", "plant_watering.main"]),
        ],
        symlinks={"/tmp/upload.dat": "/app/private.key"},
    )

    # (c) injected shell command; the subprocess exec carries no stack
    dump_trace(
        str(FIXTURES / "plant_watering_shell_exec.trace"),
        [
            ev(1, "runtime_register"),
            ev(2, "exec", path="/bin/sh"),
        ],
    )

    appdir = FIXTURES / "appdir6"
    appdir.mkdir(exist_ok=True)
    demo_files = {
        "app.py": "print('appliance entry point')\n",
        "camera.py": "def capture():\n    return b'jpeg'\n",
        "uploader.py": "def upload(blob):\n    return len(blob)\n",
        "config.ini": "[service]\nendpoint = 104.244.42.65\n",
        "photo.jpg": "not really a jpeg\n",
        "README.md": "fixture application directory\n",
    }
    for name, content in demo_files.items():
        (appdir / name).write_text(content)

    print(f"fixtures written under {FIXTURES}")


if __name__ == "__main__":
    main()
