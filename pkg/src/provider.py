"""
Chat-completion provider: a live JSON-over-HTTP client and the deterministic
offline backend that stands in for it.
"""

import asyncio
import json
import logging
import os
from enum import Enum
from typing import Any, Callable, Dict, Optional

import aiohttp
import backoff
from pydantic import BaseModel, ConfigDict, Field, model_validator

from . import constants
from .errors import (
    AuthMissingError,
    EmptyCompletionError,
    MalformedResponseError,
    TransportError,
)
from .prompts import AGENT_EASYREQ, AGENT_STRIDE_HANDLER, AgentRequest
from .utils import as_sentence

logger = logging.getLogger(__name__)

# (agent name, raw completion) -> raw completion
InjectHook = Callable[[str, str], str]


class ProviderMode(Enum):
    OFFLINE = "offline"
    LIVE = "live"


class ProviderConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    mode: ProviderMode = ProviderMode.OFFLINE
    endpoint: Optional[str] = None
    model: Optional[str] = None
    api_key_env: str = Field(constants.DEFAULT_API_KEY_ENV, min_length=1)
    temperature: float = Field(constants.DEFAULT_TEMPERATURE, ge=0.0, le=1.0)
    max_output_tokens: int = Field(constants.DEFAULT_MAX_OUTPUT_TOKENS, gt=0)
    retries: int = Field(constants.DEFAULT_RETRIES, ge=0)
    concurrency_limit: int = Field(constants.DEFAULT_CONCURRENCY_LIMIT, gt=0)
    timeout_seconds: float = Field(constants.DEFAULT_TIMEOUT_SECONDS, gt=0)
    backoff_factor: float = Field(constants.DEFAULT_BACKOFF_FACTOR, ge=0)
    reasoning_effort: Optional[str] = None

    @model_validator(mode="after")
    def _live_needs_endpoint(self) -> "ProviderConfig":
        if self.mode is ProviderMode.LIVE and not (self.endpoint and self.model):
            raise ValueError("live mode needs both 'endpoint' and 'model'")
        return self

    @property
    def is_live(self) -> bool:
        return self.mode is ProviderMode.LIVE

    @property
    def model_name(self) -> str:
        return self.model if self.is_live else constants.OFFLINE_MODEL_NAME


class _TransientError(TransportError):
    """Transport failure or 5xx; retried with backoff."""


class OfflineBackend:
    """Renders each agent's output contract from the filled prompt slots."""

    def __init__(self, inject: Optional[InjectHook] = None):
        self.inject = inject

    def render(self, request: AgentRequest) -> str:
        if request.agent == AGENT_EASYREQ:
            raw = self._easyreq(request)
        elif request.agent == AGENT_STRIDE_HANDLER:
            raw = self._stride_handler(request)
        else:
            raise ValueError(f"no offline template for agent '{request.agent}'")
        if self.inject:
            raw = self.inject(request.agent, raw)
        return raw

    @staticmethod
    def _easyreq(request: AgentRequest) -> str:
        use_case = json.loads(request.slots["use_case"])
        requirements = json.loads(request.slots["requirements"])
        goal = as_sentence(use_case["goal"])
        lines = [
            f"<system_description>{use_case['scenario'].strip()}</system_description>",
            f"<purpose>{goal}</purpose>",
        ]
        for requirement in requirements:
            lines.append(
                f'<item id="{requirement["id"]}">'
                f"<plain_text>The system will: {as_sentence(requirement['text'])}</plain_text>"
                f"<rationale>This supports the goal: {goal}</rationale>"
                "</item>"
            )
        return "\n".join(lines)

    @staticmethod
    def _stride_handler(request: AgentRequest) -> str:
        entry = json.loads(request.slots["entry"])
        return "\n".join([
            f"<what>Risk: {as_sentence(entry['title'])} {entry['description'].strip()}</what>",
            f"<why>Impact on monitored workers: {entry['impact'].strip()}</why>",
            f"<how>Planned protection: {entry['mitigation'].strip()}</how>",
        ])


class ProviderClient:
    """
    Sends AgentRequests to the configured provider. One client is shared by
    all concurrent workers of a pipeline run; use it as an async context manager.
    """

    def __init__(self, config: ProviderConfig, offline_backend: Optional[OfflineBackend] = None):
        self.config = config
        self.offline_backend = offline_backend or OfflineBackend()
        self._session: Optional[aiohttp.ClientSession] = None

    async def __aenter__(self) -> "ProviderClient":
        return self

    async def __aexit__(self, *exc_info) -> None:
        await self.close()

    def ensure_ready(self) -> None:
        """Fails fast with AuthMissingError before any live request is made."""
        if self.config.is_live:
            self._api_key()

    def _api_key(self) -> str:
        value = os.getenv(self.config.api_key_env, "")
        if not value.strip():
            raise AuthMissingError(self.config.api_key_env)
        return value.strip()

    async def _get_session(self) -> aiohttp.ClientSession:
        if self._session is None or self._session.closed:
            timeout = aiohttp.ClientTimeout(total=self.config.timeout_seconds)
            self._session = aiohttp.ClientSession(timeout=timeout)
        return self._session

    async def close(self) -> None:
        """Closes the HTTP session, if one was opened."""
        if self._session and not self._session.closed:
            await self._session.close()
        self._session = None

    async def complete(self, request: AgentRequest) -> str:
        """Returns the raw completion text for the request."""
        if not self.config.is_live:
            return self.offline_backend.render(request)

        api_key = self._api_key()
        payload: Dict[str, Any] = {
            "model": self.config.model,
            "messages": [
                {"role": "system", "content": request.system_text},
                {"role": "user", "content": request.user_text},
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }
        if request.extended_reasoning and self.config.reasoning_effort:
            payload["reasoning_effort"] = self.config.reasoning_effort
        headers = {"Authorization": f"Bearer {api_key}"}

        logger.info(f"Requesting completion for {request.agent} from {self.config.endpoint}")
        send = backoff.on_exception(
            backoff.expo,
            _TransientError,
            max_tries=self.config.retries + 1,
            factor=self.config.backoff_factor,
            on_backoff=self._log_retry,
        )(self._post)
        try:
            data = await send(payload, headers)
        except _TransientError as e:
            raise TransportError(
                f"giving up after {self.config.retries + 1} attempt(s): {e}", e.status) from None

        return self._content_of(data, request.agent)

    async def _post(self, payload: Dict[str, Any], headers: Dict[str, str]) -> Any:
        session = await self._get_session()
        try:
            async with session.post(self.config.endpoint, json=payload, headers=headers) as response:
                if response.status >= 500:
                    raise _TransientError(f"HTTP {response.status}", response.status)
                if response.status >= 400:
                    raise TransportError(f"HTTP {response.status}", response.status)
                body = await response.text()
        except (aiohttp.ClientError, asyncio.TimeoutError) as e:
            raise _TransientError(f"{type(e).__name__}: {e}")
        try:
            return json.loads(body)
        except json.JSONDecodeError as e:
            raise MalformedResponseError(f"response is not JSON: {e.msg}")

    @staticmethod
    def _content_of(data: Any, agent: str) -> str:
        try:
            content = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise MalformedResponseError("response has no choices[0].message.content")
        if not isinstance(content, str):
            raise MalformedResponseError("message content is not text")
        if not content.strip():
            raise EmptyCompletionError(agent)
        return content

    @staticmethod
    def _log_retry(details: Dict[str, Any]) -> None:
        logger.warning(
            f"Transient provider failure ({details['exception']}); "
            f"retry {details['tries']} after {details['wait']:.2f}s")


async def complete(
    config: ProviderConfig,
    request: AgentRequest,
    offline_backend: Optional[OfflineBackend] = None,
) -> str:
    """One-shot completion with a client of its own."""
    async with ProviderClient(config, offline_backend) as client:
        return await client.complete(request)
