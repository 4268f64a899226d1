"""Cache store, providers, retries, and refusal handling."""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from gesturelab.errors import (
    CacheMissError,
    ConfigError,
    ProviderRefusalError,
    RateLimitedError,
    TransportError,
)
from gesturelab.gateway import (
    CacheStore,
    LiveProvider,
    MockProvider,
    ModelConfig,
    ModelGateway,
    ProviderKind,
    ReplayProvider,
    canonical_bytes,
    completion_request_body,
    make_gateway,
    mock_embedding,
    request_digest,
)
from gesturelab.prompts import ProbeKind, build_probe


def completion_payload(text: str, finish: str = "stop") -> bytes:
    return json.dumps(
        {
            "choices": [
                {
                    "index": 0,
                    "message": {"role": "assistant", "content": text},
                    "finish_reason": finish,
                }
            ]
        }
    ).encode("utf-8")


# --- cache store ---------------------------------------------------------------

def test_digest_is_stable_under_key_order():
    a = {"model": "m", "input": ["x"]}
    b = {"input": ["x"], "model": "m"}
    assert request_digest(a) == request_digest(b)
    assert canonical_bytes(a) == canonical_bytes(b)


def test_cache_layout_and_roundtrip(tmp_path):
    cache = CacheStore(tmp_path)
    body = completion_request_body(ModelConfig(model_name="m1"), "hello")
    assert cache.get("m1", body) is None
    digest = cache.put("m1", body, b"RESPONSE")
    entry = tmp_path / "m1" / digest
    assert (entry / "request").read_bytes() == canonical_bytes(body)
    assert (entry / "response").read_bytes() == b"RESPONSE"
    assert cache.get("m1", body) == b"RESPONSE"
    assert ("m1", digest) in cache


def test_cache_is_append_only(tmp_path):
    cache = CacheStore(tmp_path)
    body = {"model": "m1", "input": ["x"]}
    cache.put("m1", body, b"first")
    cache.put("m1", body, b"second")
    assert cache.get("m1", body) == b"first"


def test_cache_separates_models(tmp_path):
    cache = CacheStore(tmp_path)
    body_a = {"model": "a", "input": ["x"]}
    body_b = {"model": "b", "input": ["x"]}
    cache.put("a", body_a, b"A")
    assert cache.get("b", body_b) is None


# --- mock provider ---------------------------------------------------------------

def test_mock_completion_is_deterministic(tmp_path):
    config = ModelConfig(model_name="mock-chat")
    gw1 = make_gateway(ProviderKind.MOCK, config, tmp_path / "c1")
    gw2 = make_gateway(ProviderKind.MOCK, config, tmp_path / "c2")
    assert gw1.complete("a prompt").text == gw2.complete("a prompt").text


def test_mock_embedding_shape_and_determinism():
    vec = mock_embedding("negative sweep")
    assert len(vec) == 32
    assert all(-1.0 <= x <= 1.0 for x in vec)
    assert vec == mock_embedding("negative sweep")
    assert vec != mock_embedding("negative sweep ")


def test_gateway_reports_cache_state(tmp_path, mock_config):
    gw = make_gateway(ProviderKind.MOCK, mock_config, tmp_path / "cache")
    first = gw.complete("state check")
    second = gw.complete("state check")
    assert not first.from_cache and second.from_cache
    assert first.text == second.text
    assert first.digest == second.digest


def test_embed_many_one_request_per_text(tmp_path, mock_config):
    gw = make_gateway(ProviderKind.MOCK, mock_config, tmp_path / "cache")
    results = gw.embed_many(["alpha", "beta"])
    assert len(results) == 2
    assert results[0].digest != results[1].digest
    entries = list((tmp_path / "cache" / mock_config.model_name).iterdir())
    assert len(entries) == 2


# --- replay provider ---------------------------------------------------------------

def test_replay_round_trip_and_miss(tmp_path, mock_config):
    cache_root = tmp_path / "cache"
    live_like = make_gateway(ProviderKind.MOCK, mock_config, cache_root)
    recorded = live_like.complete("record me")
    replay = make_gateway(ProviderKind.REPLAY, mock_config, cache_root)
    replayed = replay.complete("record me")
    assert replayed.text == recorded.text
    assert replayed.from_cache
    with pytest.raises(CacheMissError, match="digest"):
        replay.complete("never recorded")


def test_replay_serves_prerecorded_probe_outputs(tmp_path, mock_config):
    # seed the cache by hand, the way a recorded session would have
    cache = CacheStore(tmp_path / "cache")
    bundle = build_probe(
        ProbeKind.OPAQUE_LABEL_COMPLETION,
        context="Label the final line.",
        utterance="a really big idea",
        examples=(("from start to finish", "lcg"), ("not a normal time", "ng")),
    )
    body = completion_request_body(mock_config, bundle.rendered)
    cache.put(mock_config.model_name, body, completion_payload("lcg"))
    replay = make_gateway(ProviderKind.REPLAY, mock_config, tmp_path / "cache")
    assert replay.complete(bundle.rendered).text == "lcg"


def test_cached_refusal_raises_like_a_fresh_one(tmp_path, mock_config):
    cache = CacheStore(tmp_path / "cache")
    body = completion_request_body(mock_config, "blocked prompt")
    cache.put(mock_config.model_name, body, completion_payload("", finish="content_filter"))
    replay = make_gateway(ProviderKind.REPLAY, mock_config, tmp_path / "cache")
    with pytest.raises(ProviderRefusalError) as exc_info:
        replay.complete("blocked prompt")
    assert exc_info.value.record is not None


# --- live provider over a local server ---------------------------------------------

class _ScriptedHandler(BaseHTTPRequestHandler):
    script: list[tuple[int, dict, bytes]] = []
    requests_seen: list[dict] = []

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length))
        type(self).requests_seen.append({"path": self.path, "body": body})
        status, headers, payload = self.script[min(len(self.requests_seen) - 1, len(self.script) - 1)]
        self.send_response(status)
        for key, value in headers.items():
            self.send_header(key, value)
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


@pytest.fixture
def scripted_server():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _ScriptedHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    _ScriptedHandler.script = []
    _ScriptedHandler.requests_seen = []
    yield f"http://127.0.0.1:{server.server_port}", _ScriptedHandler
    server.shutdown()
    thread.join(timeout=5)


def _live_config(base_url: str, **overrides) -> ModelConfig:
    defaults = dict(
        model_name="live-model",
        base_url=base_url,
        timeout=5.0,
        max_retries=2,
        backoff_base=0.01,
    )
    defaults.update(overrides)
    return ModelConfig(**defaults)


def test_live_success_sends_single_user_message(scripted_server, tmp_path):
    base_url, handler = scripted_server
    handler.script = [(200, {}, completion_payload("a span"))]
    config = _live_config(base_url)
    gw = make_gateway(ProviderKind.LIVE, config, tmp_path / "cache")
    result = gw.complete("what gesture?")
    assert result.text == "a span"
    sent = handler.requests_seen[0]
    assert sent["path"] == "/chat/completions"
    assert sent["body"]["messages"] == [{"role": "user", "content": "what gesture?"}]
    assert sent["body"]["temperature"] == 0.0


def test_live_retries_5xx_then_succeeds(scripted_server, tmp_path):
    base_url, handler = scripted_server
    handler.script = [
        (500, {}, b"boom"),
        (503, {}, b"busy"),
        (200, {}, completion_payload("container")),
    ]
    gw = make_gateway(ProviderKind.LIVE, _live_config(base_url), tmp_path / "cache")
    assert gw.complete("p").text == "container"
    assert len(handler.requests_seen) == 3


def test_live_gives_up_after_max_retries(scripted_server, tmp_path):
    base_url, handler = scripted_server
    handler.script = [(500, {}, b"boom")]
    gw = make_gateway(ProviderKind.LIVE, _live_config(base_url), tmp_path / "cache")
    with pytest.raises(TransportError, match="giving up"):
        gw.complete("p")
    assert len(handler.requests_seen) == 3  # initial try plus two retries


def test_live_429_honors_retry_after(scripted_server, tmp_path):
    base_url, handler = scripted_server
    handler.script = [
        (429, {"Retry-After": "0.02"}, b"slow down"),
        (200, {}, completion_payload("sweep")),
    ]
    sleeps: list[float] = []
    config = _live_config(base_url)
    provider = LiveProvider(config, sleep=sleeps.append)
    gw = ModelGateway(config, CacheStore(tmp_path / "cache"), provider)
    assert gw.complete("p").text == "sweep"
    assert sleeps == [0.02]


def test_live_429_exhaustion_raises_rate_limited(scripted_server, tmp_path):
    base_url, handler = scripted_server
    handler.script = [(429, {"Retry-After": "0.01"}, b"slow down")]
    config = _live_config(base_url)
    provider = LiveProvider(config, sleep=lambda _: None)
    gw = ModelGateway(config, CacheStore(tmp_path / "cache"), provider)
    with pytest.raises(RateLimitedError) as exc_info:
        gw.complete("p")
    assert exc_info.value.retry_after == 0.01


def test_live_4xx_fails_without_retry(scripted_server, tmp_path):
    base_url, handler = scripted_server
    handler.script = [(400, {}, b"bad request")]
    gw = make_gateway(ProviderKind.LIVE, _live_config(base_url), tmp_path / "cache")
    with pytest.raises(TransportError, match="HTTP 400"):
        gw.complete("p")
    assert len(handler.requests_seen) == 1


def test_live_writes_through_cache_for_replay(scripted_server, tmp_path):
    base_url, handler = scripted_server
    handler.script = [(200, {}, completion_payload("span"))]
    config = _live_config(base_url)
    gw = make_gateway(ProviderKind.LIVE, config, tmp_path / "cache")
    live_result = gw.complete("once only")
    replay = make_gateway(ProviderKind.REPLAY, config, tmp_path / "cache")
    assert replay.complete("once only").text == live_result.text
    assert len(handler.requests_seen) == 1


def test_embedding_response_parsing(scripted_server, tmp_path):
    base_url, handler = scripted_server
    payload = json.dumps(
        {"data": [{"index": 0, "embedding": [0.25, -0.5, 1.0]}]}
    ).encode()
    handler.script = [(200, {}, payload)]
    gw = make_gateway(ProviderKind.LIVE, _live_config(base_url), tmp_path / "cache")
    result = gw.embed("negative sweep")
    assert result.vector == (0.25, -0.5, 1.0)
    assert handler.requests_seen[0]["path"] == "/embeddings"
    assert handler.requests_seen[0]["body"]["input"] == ["negative sweep"]


def test_garbled_response_is_a_refusal(tmp_path, mock_config):
    cache = CacheStore(tmp_path / "cache")
    body = completion_request_body(mock_config, "odd")
    cache.put(mock_config.model_name, body, b"<html>gateway error</html>")
    replay = make_gateway(ProviderKind.REPLAY, mock_config, tmp_path / "cache")
    with pytest.raises(ProviderRefusalError):
        replay.complete("odd")


def test_model_config_validation():
    with pytest.raises(ConfigError):
        ModelConfig(model_name="")
    with pytest.raises(ConfigError):
        ModelConfig(model_name="m", max_retries=-1)


def test_embedding_model_overrides_completion_model(tmp_path):
    config = ModelConfig(model_name="chat", embedding_model="embed")
    gw = make_gateway(ProviderKind.MOCK, config, tmp_path / "cache")
    result = gw.embed("text")
    assert result.model_name == "embed"
    assert (tmp_path / "cache" / "embed").is_dir()
