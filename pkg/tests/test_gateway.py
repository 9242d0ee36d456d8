import json
import socket
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from agora.gateway import (
    BackendConfig,
    ChatMessage,
    ChatRequest,
    GatewayError,
    HttpBackend,
    LlmGateway,
    MockBackend,
    MockError,
    MockRule,
    MockScript,
    TokenBucket,
    cache_key,
    mock_complete,
    user,
)


def make_request(content="hello", **kwargs) -> ChatRequest:
    defaults = dict(model_id="m", messages=(user(content),), temperature=0.0, seed=1)
    defaults.update(kwargs)
    return ChatRequest(**defaults)


class TestChatRequest:
    def test_needs_messages(self):
        with pytest.raises(Exception):
            ChatRequest(model_id="m", messages=())

    def test_first_role_constrained(self):
        with pytest.raises(Exception):
            ChatRequest(model_id="m", messages=(ChatMessage("assistant", "x"),))


class TestCacheKey:
    def test_equal_requests_equal_keys(self):
        assert cache_key(make_request()) == cache_key(make_request())

    def test_temperature_changes_key(self):
        assert cache_key(make_request(temperature=0.0)) != cache_key(
            make_request(temperature=0.5)
        )

    def test_whitespace_changes_key(self):
        assert cache_key(make_request("a b")) != cache_key(make_request("a  b"))

    def test_seed_and_format_change_key(self):
        base = make_request()
        assert cache_key(base) != cache_key(make_request(seed=2))
        assert cache_key(base) != cache_key(make_request(response_format="json_object"))


class TestMockBackend:
    def test_scripted_substring_match(self):
        script = MockScript(
            rules=(MockRule("influence", '{"reframing":3,"regard":2,"solution":1}'),)
        )
        resp = mock_complete(make_request("rate the influence of each"), script)
        assert json.loads(resp.text) == {"reframing": 3, "regard": 2, "solution": 1}

    def test_unmatched_raises(self):
        with pytest.raises(MockError):
            mock_complete(make_request("nothing relevant"), MockScript())

    def test_seeded_generator_deterministic(self):
        a = MockBackend.seeded(7).send(make_request("tell me something"))
        b = MockBackend.seeded(7).send(make_request("tell me something"))
        assert a.text == b.text

    def test_different_seeds_diverge(self):
        a = MockBackend.seeded(1).send(make_request("tell me something"))
        b = MockBackend.seeded(2).send(make_request("tell me something"))
        assert a.text != b.text

    def test_records_requests(self):
        backend = MockBackend.seeded(0)
        backend.send(make_request("one"))
        backend.send(make_request("two"))
        assert [m.content for r in backend.requests for m in r.messages] == ["one", "two"]


class TestCache:
    def test_second_call_is_cached_and_identical(self, tmp_path):
        gw = LlmGateway(MockBackend.seeded(3), cache_dir=tmp_path)
        first = gw.complete(make_request("same"))
        second = gw.complete(make_request("same"))
        assert not first.cached
        assert second.cached
        assert second.text == first.text
        assert len(gw.backend.requests) == 1

    def test_different_requests_miss(self, tmp_path):
        gw = LlmGateway(MockBackend.seeded(3), cache_dir=tmp_path)
        gw.complete(make_request("one"))
        resp = gw.complete(make_request("two"))
        assert not resp.cached
        assert len(gw.backend.requests) == 2

    def test_cache_layout(self, tmp_path):
        gw = LlmGateway(MockBackend.seeded(3), cache_dir=tmp_path)
        req = make_request("layout")
        gw.complete(req)
        key = cache_key(req)
        entry = tmp_path / key[:2] / f"{key}.json"
        assert entry.exists()
        payload = json.loads(entry.read_text())
        assert set(payload) == {"request", "response", "timestamp"}

    def test_concurrent_writers_never_corrupt_entries(self, tmp_path):
        from concurrent.futures import ThreadPoolExecutor

        gw = LlmGateway(MockBackend.seeded(3), cache_dir=tmp_path)
        req = make_request("contended")
        with ThreadPoolExecutor(max_workers=8) as pool:
            texts = {r.text for r in pool.map(lambda _: gw.complete(req), range(32))}
        assert len(texts) == 1
        entry = tmp_path / cache_key(req)[:2] / f"{cache_key(req)}.json"
        assert json.loads(entry.read_text())["response"]["text"] in texts


class TestTokenBucket:
    def test_burst_of_one_then_paced(self):
        now = [0.0]
        sleeps = []

        def clock():
            return now[0]

        def sleeper(seconds):
            sleeps.append(seconds)
            now[0] += seconds

        bucket = TokenBucket(rate=2.0, clock=clock, sleeper=sleeper)
        for _ in range(5):
            bucket.acquire()
        # first request free, each later one waits ~1/rate
        assert len(sleeps) == 4
        assert all(abs(s - 0.5) < 1e-9 for s in sleeps)
        # rate bound: n requests within window <= 1 + rate * elapsed
        assert 5 <= 1 + 2.0 * now[0] + 1e-9

    def test_refill_allows_burst_after_idle(self):
        now = [0.0]
        bucket = TokenBucket(rate=1.0, clock=lambda: now[0], sleeper=lambda s: None)
        bucket.acquire()
        now[0] += 10.0
        assert bucket.acquire() == 0.0


class _ScriptedHandler(BaseHTTPRequestHandler):
    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        self.rfile.read(length)
        with self.server.lock:
            self.server.hits += 1
            status, body = (
                self.server.script.pop(0)
                if self.server.script
                else (200, _ok_body())
            )
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.end_headers()
        self.wfile.write(body.encode("utf-8"))

    def log_message(self, *args):
        pass


def _ok_body(text="hello from server"):
    return json.dumps(
        {
            "choices": [{"message": {"content": text}, "finish_reason": "stop"}],
            "usage": {"prompt_tokens": 3, "completion_tokens": 4},
        }
    )


@pytest.fixture
def http_server():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _ScriptedHandler)
    server.script = []
    server.hits = 0
    server.lock = threading.Lock()
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield server
    server.shutdown()


def _backend(server, **kwargs) -> HttpBackend:
    config = BackendConfig(
        base_url=f"http://127.0.0.1:{server.server_port}/v1",
        timeout_ms=2000,
        retry_backoff_ms=1,
        **kwargs,
    )
    return HttpBackend(config, sleeper=lambda s: None)


class TestHttpBackend:
    def test_success_parses_openai_payload(self, http_server):
        resp = _backend(http_server, max_retries=0).send(make_request())
        assert resp.text == "hello from server"
        assert resp.finish_reason == "stop"
        assert resp.usage.completion_tokens == 4

    def test_retries_transient_then_succeeds(self, http_server):
        http_server.script = [(500, "boom"), (429, "slow down")]
        resp = _backend(http_server, max_retries=2).send(make_request())
        assert resp.text == "hello from server"
        assert http_server.hits == 3

    def test_attempts_bounded_by_max_retries(self, http_server):
        http_server.script = [(500, "boom")] * 10
        with pytest.raises(GatewayError) as err:
            _backend(http_server, max_retries=2).send(make_request())
        assert err.value.kind == "transport"
        assert http_server.hits == 3  # 1 + max_retries

    def test_client_error_not_retried(self, http_server):
        http_server.script = [(404, "missing")]
        with pytest.raises(GatewayError) as err:
            _backend(http_server, max_retries=3).send(make_request())
        assert err.value.kind == "request"
        assert http_server.hits == 1

    def test_malformed_payload_is_protocol_error(self, http_server):
        http_server.script = [(200, '{"unexpected": true}')]
        with pytest.raises(GatewayError) as err:
            _backend(http_server, max_retries=0).send(make_request())
        assert err.value.kind == "protocol"

    def test_unreachable_host_is_transport_error(self):
        probe = socket.socket()
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]
        probe.close()
        config = BackendConfig(
            base_url=f"http://127.0.0.1:{port}/v1",
            timeout_ms=500,
            max_retries=0,
            retry_backoff_ms=1,
        )
        with pytest.raises(GatewayError) as err:
            HttpBackend(config, sleeper=lambda s: None).send(make_request())
        assert err.value.kind == "transport"


class TestBackendConfig:
    def test_validation(self):
        with pytest.raises(Exception):
            BackendConfig(base_url="http://x", timeout_ms=0)
        with pytest.raises(Exception):
            BackendConfig(base_url="http://x", max_retries=-1)

    def test_env_defaults(self, monkeypatch):
        monkeypatch.setenv("AGORA_BASE_URL", "http://env:1/v1")
        monkeypatch.setenv("AGORA_API_KEY", "secret")
        config = BackendConfig.from_env()
        assert config.base_url == "http://env:1/v1"
        assert config.api_key == "secret"

    def test_overrides_beat_env(self, monkeypatch):
        monkeypatch.setenv("AGORA_BASE_URL", "http://env:1/v1")
        config = BackendConfig.from_env(base_url="http://flag:2/v1")
        assert config.base_url == "http://flag:2/v1"
