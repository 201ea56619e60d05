"""
Shared fixtures: the UC1 project, the golden files and a scripted chat-completion server.
"""

import shutil
from pathlib import Path

import pytest
from aiohttp import web

from src.artifacts import load_project

FIXTURES_DIR = Path(__file__).parent / "fixtures"
UC1_DIR = FIXTURES_DIR / "uc1"
GOLDEN_DIR = FIXTURES_DIR / "golden"


def read_golden(name: str) -> str:
    return (GOLDEN_DIR / name).read_text(encoding="utf-8")


@pytest.fixture
def uc1_bundle():
    return load_project(UC1_DIR)


@pytest.fixture
def uc1_copy(tmp_path):
    """A writable copy of the UC1 project."""
    target = tmp_path / "uc1"
    shutil.copytree(UC1_DIR, target)
    return target


@pytest.fixture(autouse=True)
def _clean_env(monkeypatch):
    monkeypatch.delenv("PRIVREPORT_API_KEY", raising=False)
    monkeypatch.delenv("SOURCE_DATE_EPOCH", raising=False)


def chat_reply(content: str) -> dict:
    """A chat-completion response body carrying one message."""
    return {"choices": [{"index": 0, "message": {"role": "assistant", "content": content}}]}


@pytest.fixture
def chat_server(aiohttp_server):
    """
    Starts a scripted chat-completion endpoint. `responder(payload, call_number)`
    returns (status, body); a dict body is sent as JSON, a str body as text.
    Returns the endpoint URL and the list of recorded calls.
    """
    async def start(responder):
        calls = []

        async def handler(request):
            payload = await request.json()
            calls.append({"payload": payload, "headers": dict(request.headers)})
            status, body = responder(payload, len(calls))
            if isinstance(body, str):
                return web.Response(status=status, text=body)
            return web.json_response(body, status=status)

        app = web.Application()
        app.router.add_post("/v1/chat/completions", handler)
        server = await aiohttp_server(app)
        return str(server.make_url("/v1/chat/completions")), calls

    return start
