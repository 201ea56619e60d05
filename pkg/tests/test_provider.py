"""
Tests for the provider client, against the offline backend and a scripted HTTP endpoint.
"""

import logging

import pytest
from pydantic import ValidationError

from src.agents import StrideContext, build_stride_request
from src.errors import AuthMissingError, EmptyCompletionError, MalformedResponseError, TransportError
from src.prompts import AgentRequest
from src.provider import OfflineBackend, ProviderClient, ProviderConfig, ProviderMode, complete
from tests.conftest import chat_reply

API_KEY = "sk-test-0123456789"


@pytest.fixture
def request_():
    return AgentRequest(agent="demo", system_text="system text", user_text="user text")


def _live(endpoint, **overrides):
    settings = dict(mode=ProviderMode.LIVE, endpoint=endpoint, model="test-model", retries=2, backoff_factor=0)
    settings.update(overrides)
    return ProviderConfig(**settings)


def test_live_config_needs_endpoint_and_model():
    """
    Tests that live mode without an endpoint or model is rejected.
    """
    with pytest.raises(ValidationError):
        ProviderConfig(mode=ProviderMode.LIVE, model="test-model")


def test_offline_defaults():
    """
    Tests the offline defaults and model name.
    """
    config = ProviderConfig()
    assert config.mode is ProviderMode.OFFLINE
    assert config.model_name == "offline"
    assert config.api_key_env == "PRIVREPORT_API_KEY"
    assert (config.retries, config.concurrency_limit, config.max_output_tokens) == (2, 4, 2048)


def test_offline_backend_rejects_unknown_agent(request_):
    """
    Tests that the offline backend only serves the agents it has templates for.
    """
    with pytest.raises(ValueError):
        OfflineBackend().render(request_)


async def test_retry_on_server_errors_then_success(chat_server, monkeypatch, request_):
    """
    Tests that two 500 responses are retried and the third attempt succeeds.
    """
    # --- Arrange ---
    monkeypatch.setenv("PRIVREPORT_API_KEY", API_KEY)
    script = [(500, "boom"), (500, "boom"), (200, chat_reply("Final."))]
    endpoint, calls = await chat_server(lambda payload, n: script[n - 1])

    # --- Act ---
    async with ProviderClient(_live(endpoint)) as client:
        content = await client.complete(request_)

    # --- Assert ---
    assert content == "Final."
    assert len(calls) == 3


async def test_gives_up_after_retries(chat_server, monkeypatch, request_):
    """
    Tests that persistent 5xx responses end in TransportError after retries + 1 attempts.
    """
    # --- Arrange ---
    monkeypatch.setenv("PRIVREPORT_API_KEY", API_KEY)
    endpoint, calls = await chat_server(lambda payload, n: (503, "unavailable"))

    # --- Act & Assert ---
    async with ProviderClient(_live(endpoint, retries=1)) as client:
        with pytest.raises(TransportError) as error:
            await client.complete(request_)
    assert error.value.status == 503
    assert len(calls) == 2


async def test_client_error_is_not_retried(chat_server, monkeypatch, request_):
    """
    Tests that a 4xx response fails at once.
    """
    # --- Arrange ---
    monkeypatch.setenv("PRIVREPORT_API_KEY", API_KEY)
    endpoint, calls = await chat_server(lambda payload, n: (401, "unauthorized"))

    # --- Act & Assert ---
    async with ProviderClient(_live(endpoint)) as client:
        with pytest.raises(TransportError):
            await client.complete(request_)
    assert len(calls) == 1


async def test_auth_missing_before_any_request(chat_server, request_):
    """
    Tests that an unset key variable fails before the endpoint is contacted.
    """
    # --- Arrange ---
    endpoint, calls = await chat_server(lambda payload, n: (200, chat_reply("unused")))
    client = ProviderClient(_live(endpoint))

    # --- Act & Assert ---
    with pytest.raises(AuthMissingError) as error:
        client.ensure_ready()
    assert error.value.env_name == "PRIVREPORT_API_KEY"
    with pytest.raises(AuthMissingError):
        await client.complete(request_)
    await client.close()
    assert calls == []


async def test_request_wire_format(chat_server, monkeypatch, request_):
    """
    Tests the JSON body and the bearer authorization header.
    """
    # --- Arrange ---
    monkeypatch.setenv("PRIVREPORT_API_KEY", API_KEY)
    endpoint, calls = await chat_server(lambda payload, n: (200, chat_reply("ok")))

    # --- Act ---
    async with ProviderClient(_live(endpoint)) as client:
        await client.complete(request_)

    # --- Assert ---
    assert calls[0]["payload"] == {
        "model": "test-model",
        "messages": [
            {"role": "system", "content": "system text"},
            {"role": "user", "content": "user text"},
        ],
        "temperature": 0.0,
        "max_tokens": 2048,
    }
    assert calls[0]["headers"]["Authorization"] == f"Bearer {API_KEY}"


async def test_reasoning_effort_only_for_extended_requests(chat_server, monkeypatch):
    """
    Tests that a configured reasoning effort is sent only with extended-reasoning requests.
    """
    # --- Arrange ---
    monkeypatch.setenv("PRIVREPORT_API_KEY", API_KEY)
    endpoint, calls = await chat_server(lambda payload, n: (200, chat_reply("ok")))
    plain = AgentRequest(agent="demo", system_text="s", user_text="u")
    extended = AgentRequest(agent="demo", system_text="s", user_text="u", extended_reasoning=True)

    # --- Act ---
    async with ProviderClient(_live(endpoint, reasoning_effort="high")) as client:
        await client.complete(plain)
        await client.complete(extended)

    # --- Assert ---
    assert "reasoning_effort" not in calls[0]["payload"]
    assert calls[1]["payload"]["reasoning_effort"] == "high"


@pytest.mark.parametrize("status, body, error", [
    # Test case 1: Not JSON at all
    (200, "<html>gateway</html>", MalformedResponseError),

    # Test case 2: No choices
    (200, {"choices": []}, MalformedResponseError),

    # Test case 3: Content is not text
    (200, {"choices": [{"message": {"content": None}}]}, MalformedResponseError),

    # Test case 4: Blank content
    (200, chat_reply("   "), EmptyCompletionError),
])
async def test_unusable_responses(chat_server, monkeypatch, request_, status, body, error):
    """
    Tests that malformed and empty responses raise the matching provider error.
    """
    # --- Arrange ---
    monkeypatch.setenv("PRIVREPORT_API_KEY", API_KEY)
    endpoint, _ = await chat_server(lambda payload, n: (status, body))

    # --- Act & Assert ---
    async with ProviderClient(_live(endpoint)) as client:
        with pytest.raises(error):
            await client.complete(request_)


async def test_api_key_never_logged(chat_server, monkeypatch, caplog, request_):
    """
    Tests that the key value stays out of the logs, retries included.
    """
    # --- Arrange ---
    caplog.set_level(logging.DEBUG)
    monkeypatch.setenv("PRIVREPORT_API_KEY", API_KEY)
    script = [(500, "boom"), (200, chat_reply("Final."))]
    endpoint, _ = await chat_server(lambda payload, n: script[n - 1])

    # --- Act ---
    async with ProviderClient(_live(endpoint)) as client:
        await client.complete(request_)

    # --- Assert ---
    assert "Transient provider failure" in caplog.text
    assert API_KEY not in caplog.text


async def test_offline_complete_needs_no_key(uc1_bundle):
    """
    Tests that offline completion works with the key variable unset.
    """
    # --- Arrange ---
    context = StrideContext(mermaid="flowchart LR", summary="A summary.", requirements="[]")
    client = ProviderClient(ProviderConfig())
    request = build_stride_request(uc1_bundle.stride[0], context, client)

    # --- Act ---
    raw = await complete(ProviderConfig(), request)

    # --- Assert ---
    assert "<how>Planned protection: encryption of the video stream</how>" in raw
