"""Shared test helpers: synthetic datasets and a local HTTP test server."""

from __future__ import annotations

import json
import random
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from relay.schema import Component, DataPoint, TaskSchema

WORDS = [
    "alpha", "bridge", "castle", "delta", "ember", "forest", "garden", "harbor",
    "island", "jungle", "kernel", "lantern", "meadow", "nectar", "orchard",
    "pillar", "quarry", "river", "summit", "timber", "umbrella", "valley",
    "window", "yonder", "zephyr", "café", "straße", "naïve", "señor", "tōkyō",
    "data", "point", "training", "sequence", "question", "answer", "result",
]
PUNCT = [".", ",", "!", "?", ";", ":"]


def random_text(rng: random.Random, glyphs: str = "@#*", min_words: int = 3, max_words: int = 12) -> str:
    words = [rng.choice(WORDS) for _ in range(rng.randint(min_words, max_words))]
    if glyphs and rng.random() < 0.3:
        i = rng.randrange(len(words))
        words[i] = words[i] + rng.choice(glyphs)
    if rng.random() < 0.5:
        words[-1] += rng.choice(PUNCT)
    sep = "  " if rng.random() < 0.1 else " "
    return sep.join(words)


def make_points(schema: TaskSchema, n: int, rng: random.Random, glyphs: str = "@#*") -> list[DataPoint]:
    points = []
    for i in range(n):
        components = tuple(
            Component(name=name, text=random_text(rng, glyphs)) for name in schema.component_names
        )
        label = rng.choice(schema.label_space) if schema.labeled else None
        points.append(DataPoint(id=f"{schema.task_name}-{i}", components=components, label=label))
    return points


def write_dataset(path, points) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for dp in points:
            record = {"id": dp.id, "components": {c.name: c.text for c in dp.components}, "label": dp.label}
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


class _Handler(BaseHTTPRequestHandler):
    respond = None  # injected: (path, body, headers) -> (status, payload)

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length) or b"{}")
        status, payload = type(self).respond(self.path, body, dict(self.headers))
        data = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


@pytest.fixture
def local_server():
    """Start throwaway HTTP servers whose behavior each test injects."""
    servers = []

    def start(respond) -> str:
        handler = type("Handler", (_Handler,), {"respond": staticmethod(respond)})
        server = ThreadingHTTPServer(("127.0.0.1", 0), handler)
        threading.Thread(target=server.serve_forever, daemon=True).start()
        servers.append(server)
        return f"http://127.0.0.1:{server.server_port}"

    yield start
    for server in servers:
        server.shutdown()
        server.server_close()
