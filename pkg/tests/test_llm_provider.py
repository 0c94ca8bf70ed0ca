from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import httpx
import pytest

from kgreason.llm_provider import (
    CompletionRequest,
    HttpProvider,
    ProviderError,
    ScriptedProvider,
    ScriptExhaustedError,
    Tag,
    complete,
    provider_from_spec,
)


def req(tag="schema", prompt="q"):
    return CompletionRequest(prompt, tag)


def test_request_validation():
    with pytest.raises(ValueError):
        CompletionRequest("", Tag.SCHEMA)
    with pytest.raises(ValueError):
        CompletionRequest("p", Tag.SCHEMA, max_tokens=0)
    with pytest.raises(ValueError):
        CompletionRequest("p", Tag.SCHEMA, temperature=-0.1)
    with pytest.raises(ValueError):
        CompletionRequest("p", "banana")
    assert CompletionRequest("p", "answer").tag is Tag.ANSWER


def test_scripted_queue():
    p = ScriptedProvider({"schema": ["(q) friend_of (x). (x) works_at (y)."]})
    assert complete(p, req()).text == "(q) friend_of (x). (x) works_at (y)."


def test_scripted_default():
    p = ScriptedProvider(default="UNKNOWN")
    assert complete(p, req()).text == "UNKNOWN"


def test_scripted_fifo_per_tag_then_exhausted():
    p = ScriptedProvider({"schema": ["a", "b"], "answer": ["x"]})
    assert [p.complete(req("schema")).text, p.complete(req("answer")).text, p.complete(req("schema")).text] == ["a", "x", "b"]
    with pytest.raises(ScriptExhaustedError):
        p.complete(req("schema"))


def test_scripted_routes_take_priority():
    p = ScriptedProvider({"answer": ["queued"]}, routes=[{"tag": "answer", "contains": ["paris"], "responses": ["routed"]}])
    assert p.complete(req("answer", "about paris")).text == "routed"
    assert p.complete(req("answer", "about paris")).text == "queued"


def test_scripted_deterministic_replay():
    script = {"responses": {"schema": ["1", "2", "3"]}, "default": "d"}
    runs = []
    for _ in range(2):
        p = ScriptedProvider.from_dict(script)
        runs.append([p.complete(req()).text for _ in range(5)])
    assert runs[0] == runs[1] == ["1", "2", "3", "d", "d"]


def test_from_dict_rejects_unknown_keys():
    with pytest.raises(ValueError):
        ScriptedProvider.from_dict({"respones": {}})


def test_scripted_concurrent_calls_consume_each_response_once():
    p = ScriptedProvider({"answer": [str(i) for i in range(400)]})
    got: list[str] = []
    lock = threading.Lock()

    def worker():
        for _ in range(100):
            text = p.complete(req("answer")).text
            with lock:
                got.append(text)

    threads = [threading.Thread(target=worker) for _ in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert sorted(got, key=int) == [str(i) for i in range(400)]


class _Stub:
    """Local HTTP server replaying a list of (status, body) replies."""

    def __init__(self, replies):
        self.replies = list(replies)
        self.requests = []
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                stub.requests.append((json.loads(self.rfile.read(length)), self.headers.get("Authorization")))
                status, body = stub.replies.pop(0) if stub.replies else (500, "")
                data = body.encode()
                self.send_response(status)
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):
                pass

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.url = f"http://127.0.0.1:{self.server.server_address[1]}/complete"
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)

    def __enter__(self):
        self.thread.start()
        return self

    def __exit__(self, *exc):
        self.server.shutdown()
        self.server.server_close()


def test_http_success_and_wire_format():
    with _Stub([(200, '{"text":"paris"}')]) as stub:
        p = HttpProvider(stub.url, token="t0k", backoff=0)
        assert p.complete(CompletionRequest("where?", Tag.ANSWER, max_tokens=7)).text == "paris"
    body, auth = stub.requests[0]
    assert body == {"prompt": "where?", "max_tokens": 7, "temperature": 0.0}
    assert auth == "Bearer t0k"


def test_http_retries_then_succeeds():
    with _Stub([(500, ""), (503, ""), (200, '{"text":"ok"}')]) as stub:
        assert HttpProvider(stub.url, retries=2, backoff=0).complete(req()).text == "ok"
    assert len(stub.requests) == 3


def test_http_gives_up_after_retries():
    with _Stub([(500, "")] * 5) as stub:
        with pytest.raises(ProviderError) as info:
            HttpProvider(stub.url, retries=2, backoff=0).complete(req())
    assert info.value.retries == 2 and "HTTP 500" in str(info.value)
    assert len(stub.requests) == 3


@pytest.mark.parametrize("body", ["not json", '{"txt":"x"}', '{"text": 3}', "[]"])
def test_http_malformed_body(body):
    with _Stub([(200, body)] * 3) as stub:
        with pytest.raises(ProviderError, match="malformed"):
            HttpProvider(stub.url, retries=0, backoff=0).complete(req())


def test_http_transport_failure():
    def refuse(request):
        raise httpx.ConnectError("refused", request=request)

    p = HttpProvider("http://example.invalid/", retries=1, backoff=0, transport=httpx.MockTransport(refuse))
    with pytest.raises(ProviderError, match="transport failure") as info:
        p.complete(req())
    assert info.value.retries == 1


def test_provider_from_spec(tmp_path, monkeypatch):
    script = tmp_path / "s.json"
    script.write_text('{"default": "hi"}')
    assert provider_from_spec(f"scripted:{script}").complete(req()).text == "hi"
    monkeypatch.setenv("MY_TOKEN", "abc")
    http = provider_from_spec("http:http://localhost:1/x", token_env="MY_TOKEN")
    assert isinstance(http, HttpProvider) and http.token == "abc"
    with pytest.raises(ScriptExhaustedError):
        provider_from_spec("none").complete(req())
    for bad in ("scripted:", "ftp:x", "none:x"):
        with pytest.raises(ValueError):
            provider_from_spec(bad)
