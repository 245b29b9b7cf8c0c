import json
import math
import socket
import threading
import time

import httpx
import pytest
import uvicorn
from fastapi.testclient import TestClient

from hallconst.cli import EXIT_NUMERIC, EXIT_USAGE, main
from hallconst.service.app import app
from hallconst.service.schemas import Envelope

client = TestClient(app)


def test_health():
    assert client.get("/health").json()["status"] == "ok"


def test_hall_endpoint():
    r = client.post("/hall", json={"n": 3, "recognize": True})
    assert r.status_code == 200
    env = Envelope.model_validate(r.json())
    assert env.status == "ok" and env.result["recognition"]["recognized_integer"] == "35"
    assert env.result["constant"] == pytest.approx(35 / math.pi, rel=1e-10)


def test_other_endpoints():
    assert client.post("/entropy", json={"n": 2}).json()["result"]["fit_denominator"] == 6
    spec = client.post("/spectrum", json={"n": 2}).json()["result"]
    assert spec["expected"][0] == pytest.approx(0.5 + 4 / (3 * math.pi), abs=1e-9)
    grid = client.post("/density", json={"case": "quasi2", "grid": 2}).json()["result"]
    assert len(grid["rows"]) == 2
    rec = client.post("/recognize", json={"value": 71680 / math.pi ** 2}).json()
    assert rec["result"]["recognized_integer"] == "71680"
    b = client.post("/bernoulli", json={"terms": 4}).json()["result"]["bernoulli"]
    assert b[2]["value"] == "1/6"


def test_errors_are_422():
    r = client.post("/hall", json={"n": 2, "beta": 3})
    assert r.status_code == 422 and r.json()["error"] == "DivergenceError"
    r = client.post("/hall", json={"n": 1})
    assert r.status_code == 422
    r = client.post("/density", json={"case": "bures2", "marginal": "phi"})
    assert r.status_code == 422 and r.json()["error"] == "ValueError"


def test_service_cache(tmp_path, monkeypatch):
    path = tmp_path / "svc.jsonl"
    monkeypatch.setenv("HALLCONST_CACHE", str(path))
    a = client.post("/hall", json={"n": 2}).json()
    b = client.post("/hall", json={"n": 2}).json()
    assert a == b and len(path.read_text().splitlines()) == 1


@pytest.fixture(scope="module")
def server():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    srv = uvicorn.Server(uvicorn.Config(app, host="127.0.0.1", port=port, log_level="warning"))
    t = threading.Thread(target=srv.run, daemon=True)
    t.start()
    url = f"http://127.0.0.1:{port}"
    for _ in range(200):
        try:
            httpx.get(url + "/health")
            break
        except httpx.HTTPError:
            time.sleep(0.05)
    yield url
    srv.should_exit = True
    t.join(5)


def test_cli_forwards_to_server(server, capsys):
    assert main(["hall", "2", "--server", server]) == 0
    remote = json.loads(capsys.readouterr().out)
    assert main(["hall", "2"]) == 0
    local = json.loads(capsys.readouterr().out)
    assert remote["result"] == local["result"]
    assert remote["manifest"]["result_digest"] == local["manifest"]["result_digest"]


def test_cli_server_error_codes(server, capsys):
    assert main(["hall", "2", "--beta", "3", "--server", server]) == EXIT_NUMERIC
    assert main(["hall", "1", "--server", server]) == EXIT_USAGE
    capsys.readouterr()


def test_cli_unreachable_server(capsys):
    assert main(["hall", "2", "--server", "http://127.0.0.1:9"]) == EXIT_NUMERIC
