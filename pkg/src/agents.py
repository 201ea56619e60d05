"""
The transformation agents: DFD summary, requirement simplification and
per-threat explanation. Each builds a prompt, obtains a completion, strips
the scratchpad and parses the tagged parts of the body.
"""

import json
import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, TypeVar

from pydantic import BaseModel, ConfigDict, Field

from .artifacts import ProjectBundle, Requirement
from .dfd_model import Dfd, emit_mermaid, summarize_dfd
from .errors import EmptyCompletionError, ItemCountMismatchError, MissingPartError, PreconditionViolated, ShapeError
from .prompts import (
    DFD_SUMMARY_TEMPLATE,
    EASYREQ_TEMPLATE,
    STRIDE_HANDLER_TEMPLATE,
    AgentRequest,
    PromptTemplate,
    build_prompt,
    extract_items,
    extract_part,
    strip_scratchpad,
)
from .provider import ProviderClient
from .stride import StrideEntry

logger = logging.getLogger(__name__)

T = TypeVar("T")


class DfdSummary(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    mermaid: str = Field(min_length=1)
    summary: str = Field(min_length=1)


class SimplifiedItem(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    requirement_id: str
    plain_text: str = Field(min_length=1)
    rationale: str = Field(min_length=1)


class SimplifiedRequirements(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    system_description: str = Field(min_length=1)
    purpose: str = Field(min_length=1)
    items: List[SimplifiedItem]


class ThreatExplanation(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    entry_id: str
    what: str = Field(min_length=1)
    why: str = Field(min_length=1)
    how: str = Field(min_length=1)


class ExplanationSet(BaseModel):
    """Checkpoint wrapper for the per-threat explanations."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    explanations: List[ThreatExplanation]


@dataclass(frozen=True)
class StrideContext:
    mermaid: str
    summary: str
    requirements: str


def _request(template: PromptTemplate, client: ProviderClient, **slots: str) -> AgentRequest:
    return build_prompt(
        template,
        slots,
        temperature=client.config.temperature,
        max_output_tokens=client.config.max_output_tokens,
    )


async def _complete_with_retry(
    client: ProviderClient, request: AgentRequest, parse: Callable[[str], T]
) -> T:
    """Parses the completion body; a malformed shape is retried once, then raised."""
    last_error: Optional[ShapeError] = None
    for attempt in (1, 2):
        raw = await client.complete(request)
        try:
            return parse(strip_scratchpad(raw).body)
        except ShapeError as e:
            last_error = e
            logger.warning(f"{request.agent} returned a malformed answer (attempt {attempt}): {e}")
    raise last_error


def requirements_json(requirements: List[Requirement]) -> str:
    payload = [r.model_dump(mode="json", include={"id", "text", "priority"}, exclude_none=True)
               for r in requirements]
    return json.dumps(payload, indent=2, ensure_ascii=False)


async def run_dfd_summary(dfd: Dfd, client: ProviderClient) -> DfdSummary:
    """Mermaid is always emitted locally; only the prose summary may come from the provider."""
    mermaid = emit_mermaid(dfd)
    structure = summarize_dfd(dfd)
    if not client.config.is_live:
        return DfdSummary(mermaid=mermaid, summary=structure)

    request = _request(DFD_SUMMARY_TEMPLATE, client, mermaid=mermaid, structure=structure)

    def parse(body: str) -> str:
        summary = extract_part(body, "summary") or body
        if not summary.strip():
            raise EmptyCompletionError(request.agent)
        return summary

    return DfdSummary(mermaid=mermaid, summary=await _complete_with_retry(client, request, parse))


def _parse_simplified(body: str, requirements: List[Requirement]) -> SimplifiedRequirements:
    system_description = extract_part(body, "system_description")
    if system_description is None:
        raise MissingPartError("system_description")
    purpose = extract_part(body, "purpose")
    if purpose is None:
        raise MissingPartError("purpose")

    blocks = extract_items(body)
    items: List[SimplifiedItem] = []
    for requirement in requirements:
        block = blocks.get(requirement.id)
        if block is None:
            continue
        plain_text = extract_part(block, "plain_text")
        rationale = extract_part(block, "rationale")
        if plain_text and rationale:
            items.append(SimplifiedItem(
                requirement_id=requirement.id, plain_text=plain_text, rationale=rationale))
    if len(items) != len(requirements):
        raise ItemCountMismatchError(len(requirements), len(items))
    return SimplifiedRequirements(system_description=system_description, purpose=purpose, items=items)


async def run_easyreq(bundle: ProjectBundle, client: ProviderClient) -> SimplifiedRequirements:
    """Plain-language use case and one simplified item per requirement."""
    use_case = bundle.use_case.model_dump(mode="json", exclude={"id"})
    requirements = list(bundle.requirements)
    request = _request(
        EASYREQ_TEMPLATE,
        client,
        use_case=json.dumps(use_case, indent=2, ensure_ascii=False),
        requirements=requirements_json(requirements),
    )
    result = await _complete_with_retry(client, request, lambda body: _parse_simplified(body, requirements))
    logger.info(f"Simplified {len(result.items)} requirements")
    return result


def _parse_explanation(body: str, entry_id: str) -> ThreatExplanation:
    parts = {}
    for name in ("what", "why", "how"):
        text = extract_part(body, name)
        if text is None:
            raise MissingPartError(name)
        parts[name] = text
    return ThreatExplanation(entry_id=entry_id, **parts)


def build_stride_request(entry: StrideEntry, context: StrideContext, client: ProviderClient) -> AgentRequest:
    missing = entry.missing_fields()
    if missing:
        raise PreconditionViolated(
            f"STRIDE entry '{entry.id}' has empty {', '.join(missing)}", subjects=[entry.id])
    entry_fields = entry.model_dump(mode="json", by_alias=True, exclude_none=True)
    return _request(
        STRIDE_HANDLER_TEMPLATE,
        client,
        mermaid=context.mermaid,
        summary=context.summary,
        requirements=context.requirements,
        entry=json.dumps(entry_fields, indent=2, ensure_ascii=False),
    )


async def run_stride_handler(
    entry: StrideEntry, context: StrideContext, client: ProviderClient
) -> ThreatExplanation:
    """What / why / how explanation of one STRIDE entry."""
    request = build_stride_request(entry, context, client)
    return await _complete_with_retry(client, request, lambda body: _parse_explanation(body, entry.id))
