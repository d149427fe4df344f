"""Demo appliance: read a photo and upload it to the configured service.

Takes an optional port argument overriding config.json (the test harness
runs a local listener on an ephemeral port).
"""

import json
import os
import socket
import sys

APP_DIR = os.path.dirname(os.path.abspath(__file__))


def load_config():
    with open(os.path.join(APP_DIR, "config.json")) as fh:
        return json.load(fh)


def read_photo():
    with open(os.path.join(APP_DIR, "photo.jpg"), "rb") as fh:
        return fh.read()


def upload(host, port, payload):
    with socket.create_connection((host, port), timeout=5) as sock:
        sock.sendall(len(payload).to_bytes(4, "big"))
        sock.sendall(payload)
        return sock.recv(2)


def main():
    config = load_config()
    port = int(sys.argv[1]) if len(sys.argv) > 1 else config["port"]
    photo = read_photo()
    ack = upload(config["host"], port, photo)
    print(f"uploaded {len(photo)} bytes to {config['host']}, ack={ack.decode()}")


if __name__ == "__main__":
    main()
