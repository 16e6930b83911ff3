from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import httpx
import pytest

from opteval.benchsuite import load_case, load_prompt, render_prompt
from opteval.gateway import (
    BACKOFF,
    LIVE,
    MODEL_IDS,
    RECORD,
    REPLAY,
    FixtureStore,
    Gateway,
    GatewayError,
    HttpStatusError,
    MissingFixtureError,
    ModelConfig,
    Telemetry,
    TokenBucket,
    request_key,
)
from opteval.parser import parse_mathtext
from opteval.runner import default_fixture_root


class Script:
    """Queue of (status, body) replies served by the fake endpoint."""

    def __init__(self, replies):
        self.replies = list(replies)
        self.requests = []


def reply(text, prompt_tokens=11, completion_tokens=7):
    return {
        "choices": [{"message": {"role": "assistant", "content": text}}],
        "usage": {"prompt_tokens": prompt_tokens, "completion_tokens": completion_tokens},
    }


@pytest.fixture
def server():
    script = Script([])

    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
            script.requests.append((body, dict(self.headers)))
            status, doc = script.replies.pop(0) if script.replies else (200, reply("ok"))
            raw = json.dumps(doc).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(raw)))
            self.end_headers()
            self.wfile.write(raw)

        def log_message(self, *args):
            pass

    httpd = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
    thread = threading.Thread(target=httpd.serve_forever, daemon=True)
    thread.start()
    script.url = f"http://127.0.0.1:{httpd.server_address[1]}/v1/chat/completions"
    yield script
    httpd.shutdown()
    httpd.server_close()


def gateway(store=None, **kw):
    sleeps = []
    gw = Gateway(store, api_key="test-key", sleep=sleeps.append, rate_per_s=1000.0, **kw)
    return gw, sleeps


MSG = [{"role": "user", "content": "minimize x"}]


def test_live_request_shape(server):
    server.replies.append((200, reply("minimize x", 12, 3)))
    gw, _ = gateway()
    cfg = ModelConfig("m1", endpoint=server.url, mode=LIVE)
    out = gw.complete(cfg, MSG)
    assert out.text == "minimize x"
    assert (out.telemetry.input_tokens, out.telemetry.output_tokens) == (12, 3)
    assert out.telemetry.latency_ms > 0
    body, headers = server.requests[0]
    assert body == {"model": "m1", "messages": MSG, "temperature": 0.1, "max_tokens": 800}
    assert headers["Authorization"] == "Bearer test-key"


def test_retry_on_5xx_then_success(server):
    server.replies.extend([(503, {"error": "busy"}), (500, {"error": "oops"}), (200, reply("fine"))])
    gw, sleeps = gateway()
    out = gw.complete(ModelConfig("m1", endpoint=server.url, mode=LIVE), MSG)
    assert out.text == "fine"
    assert sleeps[:2] == list(BACKOFF[:2])


def test_retry_exhaustion(server):
    server.replies.extend([(502, {})] * 4)
    gw, sleeps = gateway()
    with pytest.raises(GatewayError, match="4 attempts"):
        gw.complete(ModelConfig("m1", endpoint=server.url, mode=LIVE), MSG)
    assert [s for s in sleeps if s in BACKOFF] == list(BACKOFF)


def test_no_retry_on_4xx(server):
    server.replies.append((401, {"error": "no key"}))
    gw, sleeps = gateway()
    with pytest.raises(HttpStatusError):
        gw.complete(ModelConfig("m1", endpoint=server.url, mode=LIVE), MSG)
    assert len(server.requests) == 1 and not any(s in BACKOFF for s in sleeps)


def test_transport_errors_are_retried():
    calls = []

    def handler(request):
        calls.append(request)
        if len(calls) < 3:
            raise httpx.ConnectError("refused")
        return httpx.Response(200, json=reply("back"))

    gw, sleeps = gateway(transport=httpx.MockTransport(handler))
    out = gw.complete(ModelConfig("m1", endpoint="http://invalid/v1", mode=LIVE), MSG)
    assert out.text == "back" and len(calls) == 3


def test_record_then_replay(server, tmp_path):
    server.replies.append((200, reply("maximize y", 20, 5)))
    store = FixtureStore(tmp_path)
    gw, _ = gateway(store)
    live = gw.complete(ModelConfig("org/model", endpoint=server.url, mode=RECORD), MSG)
    path = store.path("org/model", request_key("org/model", MSG))
    assert path.parent.name == "org__model" and path.is_file()
    again = Gateway(store).complete(ModelConfig("org/model", mode=REPLAY), MSG)
    assert (again.text, again.telemetry) == (live.text, live.telemetry)
    assert len(server.requests) == 1


def test_replay_missing_key(tmp_path):
    gw = Gateway(FixtureStore(tmp_path))
    with pytest.raises(MissingFixtureError) as info:
        gw.complete(ModelConfig("m1"), MSG)
    assert request_key("m1", MSG) in str(info.value)


def test_request_key_is_canonical():
    a = [{"role": "user", "content": "hi"}]
    b = [{"content": "hi", "role": "user"}]
    assert request_key("m", a) == request_key("m", b)
    assert request_key("m", a) != request_key("n", a)


def test_shipped_gpt5_knapsack_fixture():
    case = load_case("knapsack")
    (message,) = render_prompt(load_prompt("P1"), case)
    gw = Gateway(FixtureStore(default_fixture_root()))
    out = gw.complete(ModelConfig(MODEL_IDS["gpt5"]), [{"role": "user", "content": message}])
    assert out.telemetry == Telemetry(2000.0, 137, 39)
    assert parse_mathtext(out.text).model.objective.as_dict()


def test_multistep_sums_telemetry(tmp_path):
    store = FixtureStore(tmp_path)
    steps = ["one", "two", "three", "four"]
    history = []
    for k, step in enumerate(steps, start=1):
        messages = history + [{"role": "user", "content": step}]
        store.save("m1", messages, f"answer {k}", Telemetry(100.0 * k, k, 2 * k), recorded="t")
        history = messages + [{"role": "assistant", "content": f"answer {k}"}]
    t = Gateway(store).run_multistep(ModelConfig("m1"), steps)
    assert len(t.steps) == 4 and t.text == "answer 4"
    assert t.telemetry == Telemetry(1000.0, 10, 20)
    single = Gateway(store).run_multistep(ModelConfig("m1"), steps[:1])
    assert len(single.steps) == 1


def test_multistep_failure_keeps_prefix(server):
    server.replies.extend([(200, reply("a")), (200, reply("b")), (400, {"error": "bad"})])
    gw, _ = gateway()
    with pytest.raises(GatewayError) as info:
        gw.run_multistep(ModelConfig("m1", endpoint=server.url, mode=LIVE), ["s1", "s2", "s3", "s4"])
    err = info.value
    assert err.step == 3
    assert [m["content"] for m in err.transcript.messages] == ["s1", "a", "s2", "b"]


def test_token_bucket_waits():
    now = [0.0]
    waits = []

    def sleep(dt):
        waits.append(dt)
        now[0] += dt

    bucket = TokenBucket(rate=2.0, capacity=1.0, clock=lambda: now[0], sleep=sleep)
    for _ in range(3):
        bucket.acquire()
    assert waits == pytest.approx([0.5, 0.5])
