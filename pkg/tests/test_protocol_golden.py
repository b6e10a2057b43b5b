"""Wire-protocol golden tests.

The fixtures file pins the exact request bodies the clients put on the
wire and the response shapes any server must produce.  The same file is
the conformance bar for out-of-repo server implementations, so nothing
here may special-case the stub.
"""

from __future__ import annotations

import json
from pathlib import Path

import httpx
import pytest

from textseam.backends import BackendEndpoint, GenParams, HttpGenerationBackend, HttpTokenLabeler

from stub_backend import StubBackendServer

FIXTURES_PATH = Path(__file__).parent / "golden" / "protocol_fixtures.json"
FIXTURES = json.loads(FIXTURES_PATH.read_text("utf-8"))


def validate_generate_response(request: dict, response: object) -> None:
    assert isinstance(response, dict)
    assert response["id"] == request["id"]
    assert isinstance(response["text"], str)


def validate_label_response(request: dict, response: object) -> None:
    assert isinstance(response, dict)
    assert response["id"] == request["id"]
    tokens = response["tokens"]
    assert isinstance(tokens, list)
    text_length = len(request["text"])
    prev_end = 0
    for token in tokens:
        start, end, label = token["start"], token["end"], token["label"]
        assert 0 <= start < end <= text_length
        assert start >= prev_end
        assert label in (0, 1)
        prev_end = end


def test_fixture_responses_satisfy_their_own_rules() -> None:
    for exchange in FIXTURES["exchanges"]["generate"]:
        validate_generate_response(exchange["request"], exchange["response"])
    for exchange in FIXTURES["exchanges"]["label_tokens"]:
        validate_label_response(exchange["request"], exchange["response"])


@pytest.mark.parametrize("index", range(len(FIXTURES["exchanges"]["generate"])))
def test_generation_client_wire_bytes_match_fixture(index: int) -> None:
    exchange = FIXTURES["exchanges"]["generate"][index]
    request = exchange["request"]
    with StubBackendServer() as server:
        server.enqueue({"body": exchange["response"]})
        backend = HttpGenerationBackend(BackendEndpoint(base_url=server.base_url), name="gen")
        params = GenParams(
            temperature=request["temperature"],
            top_p=request["top_p"],
            max_new_tokens=request["max_new_tokens"],
        )
        text = backend.generate(request["id"], request["prompt"], params)
        backend.close()
        assert text == exchange["response"]["text"]
        path, payload, _ = server.requests[0]
        assert path == "/v1/generate"
        assert payload == request


@pytest.mark.parametrize("index", range(len(FIXTURES["exchanges"]["label_tokens"])))
def test_labeling_client_wire_bytes_match_fixture(index: int) -> None:
    exchange = FIXTURES["exchanges"]["label_tokens"][index]
    request = exchange["request"]
    with StubBackendServer() as server:
        server.enqueue({"body": exchange["response"]})
        backend = HttpTokenLabeler(BackendEndpoint(base_url=server.base_url), name="lab")
        tokens = backend.label_tokens(request["id"], request["text"])
        backend.close()
        expected = [(t["start"], t["end"], t["label"]) for t in exchange["response"]["tokens"]]
        assert [(t.start, t.end, t.label) for t in tokens] == expected
        path, payload, _ = server.requests[0]
        assert path == "/v1/label_tokens"
        assert payload == request


def test_probe_requests_replay_against_a_live_server() -> None:
    with StubBackendServer() as server:
        with httpx.Client(base_url=server.base_url, timeout=10.0) as client:
            for request in FIXTURES["probe_requests"]["generate"]:
                response = client.post("/v1/generate", json=request)
                assert response.status_code == 200
                validate_generate_response(request, response.json())
            for request in FIXTURES["probe_requests"]["label_tokens"]:
                response = client.post("/v1/label_tokens", json=request)
                assert response.status_code == 200
                validate_label_response(request, response.json())


def test_error_responses_carry_an_error_object() -> None:
    with StubBackendServer() as server:
        server.enqueue({"status": 400, "body": {"error": "missing field"}})
        with httpx.Client(base_url=server.base_url) as client:
            response = client.post("/v1/generate", json={"id": 1})
            assert response.status_code == 400
            assert "error" in response.json()
